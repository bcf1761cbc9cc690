#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include "fh/tensor.hpp"

namespace fh {

inline constexpr int kNumAttributes = 12;

/// Fixed schema order used by every network input and output.
inline constexpr std::array<std::string_view, kNumAttributes> kAttributeNames = {
    "Bald",           "Bangs",      "Black Hair", "Blond Hair", "Brown Hair", "Bushy Eyebrows",
    "Eyeglasses",     "Male",       "Mouth Open", "Mustache",   "Pale",       "Young"};

/// Index of a schema attribute; throws std::invalid_argument listing the schema otherwise.
int attribute_index(std::string_view name);

/// Comma-separated schema, for error messages.
std::string attribute_schema_list();

/// Twelve values in [0,1], one per schema attribute.
struct AttributeVector {
  std::array<double, kNumAttributes> values{};

  double& operator[](int i) { return values[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return values[static_cast<std::size_t>(i)]; }

  [[nodiscard]] bool in_unit_range() const;
  [[nodiscard]] bool is_binary() const;
  /// Throws std::invalid_argument naming the first offending attribute.
  void validate() const;
  /// Thresholds at 0.5.
  [[nodiscard]] AttributeVector binarized() const;

  static AttributeVector from_span(std::span<const double> v);

  friend bool operator==(const AttributeVector&, const AttributeVector&) = default;
};

/// [N, 12, 1, 1] conditioning tensor.
Tensor attributes_to_tensor(std::span<const AttributeVector> attrs);
AttributeVector attributes_from_tensor(const Tensor& t, int n = 0);

/// Randomised conditioning vector: independent fair coin flips per attribute,
/// or independent uniform draws when `continuous` is set.
template <typename Engine>
AttributeVector sample_random_attributes(Engine& rng, bool continuous = false) {
  AttributeVector a;
  for (auto& v : a.values) {
    const auto bits = static_cast<std::uint64_t>(rng());
    v = continuous ? static_cast<double>(bits >> 11) * 0x1.0p-53 : static_cast<double>(bits >> 63);
  }
  return a;
}

}  // namespace fh
