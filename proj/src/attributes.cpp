#include "fh/attributes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fh {

int attribute_index(std::string_view name) {
  for (int i = 0; i < kNumAttributes; ++i) {
    if (kAttributeNames[static_cast<std::size_t>(i)] == name) return i;
  }
  throw std::invalid_argument("unknown attribute '" + std::string(name) + "'; schema is: " + attribute_schema_list());
}

std::string attribute_schema_list() {
  std::string out;
  for (auto n : kAttributeNames) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

bool AttributeVector::in_unit_range() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; });
}

bool AttributeVector::is_binary() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

void AttributeVector::validate() const {
  for (int i = 0; i < kNumAttributes; ++i) {
    const double v = values[static_cast<std::size_t>(i)];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw std::invalid_argument("attribute '" + std::string(kAttributeNames[static_cast<std::size_t>(i)]) +
                                  "' = " + std::to_string(v) + " is outside [0,1]");
    }
  }
}

AttributeVector AttributeVector::binarized() const {
  AttributeVector out;
  for (int i = 0; i < kNumAttributes; ++i) out[i] = (*this)[i] >= 0.5 ? 1.0 : 0.0;
  return out;
}

AttributeVector AttributeVector::from_span(std::span<const double> v) {
  if (v.size() != kNumAttributes) {
    throw std::invalid_argument("attribute vector needs " + std::to_string(kNumAttributes) + " values, got " +
                                std::to_string(v.size()));
  }
  AttributeVector a;
  std::copy(v.begin(), v.end(), a.values.begin());
  return a;
}

Tensor attributes_to_tensor(std::span<const AttributeVector> attrs) {
  Tensor t(Shape{static_cast<int>(attrs.size()), kNumAttributes, 1, 1});
  for (std::size_t n = 0; n < attrs.size(); ++n) {
    std::copy(attrs[n].values.begin(), attrs[n].values.end(), t.data() + n * kNumAttributes);
  }
  return t;
}

AttributeVector attributes_from_tensor(const Tensor& t, int n) {
  const Shape s = t.shape();
  if (s.c * s.h * s.w != kNumAttributes) throw std::invalid_argument("not an attribute tensor: " + s.str());
  AttributeVector a;
  std::copy_n(t.data() + static_cast<std::size_t>(n) * kNumAttributes, kNumAttributes, a.values.begin());
  return a;
}

}  // namespace fh
