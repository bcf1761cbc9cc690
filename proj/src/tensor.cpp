#include "fh/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fh {

std::string Shape::str() const {
  return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw std::invalid_argument("tensor data size " + std::to_string(data_.size()) +
                                " does not match shape " + shape_.str());
  }
}

Tensor Tensor::reshaped(Shape s) const {
  if (s.numel() != shape_.numel()) {
    throw std::invalid_argument("cannot reshape " + shape_.str() + " to " + s.str());
  }
  return Tensor(s, data_);
}

Tensor Tensor::slice_batch(int first, int count) const {
  if (first < 0 || count < 0 || first + count > shape_.n) {
    throw std::out_of_range("batch slice out of range for " + shape_.str());
  }
  Shape s = shape_;
  s.n = count;
  const std::size_t per = static_cast<std::size_t>(shape_.c) * shape_.plane();
  return Tensor(s, std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(first * per),
                                       data_.begin() + static_cast<std::ptrdiff_t>((first + count) * per)));
}

double Tensor::item() const {
  if (data_.size() != 1) throw std::logic_error("item() on tensor of shape " + shape_.str());
  return data_[0];
}

double Tensor::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor stack_batch(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("stack_batch of nothing");
  Shape s = parts.front().shape();
  std::vector<double> data;
  data.reserve(s.numel() * parts.size());
  int n = 0;
  for (const auto& p : parts) {
    Shape ps = p.shape();
    if (ps.c != s.c || ps.h != s.h || ps.w != s.w) {
      throw std::invalid_argument("stack_batch shape mismatch: " + ps.str() + " vs " + s.str());
    }
    data.insert(data.end(), p.storage().begin(), p.storage().end());
    n += ps.n;
  }
  s.n = n;
  return Tensor(s, std::move(data));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("max_abs_diff shape mismatch " + a.shape().str() + " vs " +
                                b.shape().str());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace fh
