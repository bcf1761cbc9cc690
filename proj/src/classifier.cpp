#include "fh/classifier.hpp"

#include <stdexcept>

#include "fh/data_pipeline.hpp"

namespace fh {

void ClassifierConfig::validate() const {
  if (base_channels < 1) throw std::invalid_argument("classifier base_channels must be positive");
}

AttributeClassifier::AttributeClassifier(const ClassifierConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int b = config_.base_channels;
  conv1_ = make_conv(store_, "conv1", 3, b, 4, {2, 1}, true, 0.2, rng);
  conv2_ = make_conv(store_, "conv2", b, 2 * b, 4, {2, 1}, true, 0.2, rng);
  // A 4x4 valid convolution over the 4x4 map is the fully connected head.
  head_ = make_conv(store_, "head", 2 * b, kNumAttributes, 4, {1, 0}, true, 1.0, rng);
}

Var AttributeClassifier::forward(const Var& lr) const {
  const Shape s = lr.shape();
  if (s.c != 3 || s.h != kLrSize || s.w != kLrSize) {
    throw std::invalid_argument("classifier input must be [N,3,16,16], got " + s.str());
  }
  Var h = leaky_relu(conv1_.forward(lr), 0.2);
  h = leaky_relu(conv2_.forward(h), 0.2);
  return sigmoid(head_.forward(h));
}

AttributeVector AttributeClassifier::classify(const Image& lr) const {
  NoGradGuard no_grad;
  return attributes_from_tensor(forward(constant(lr.to_tensor())).value());
}

}  // namespace fh
