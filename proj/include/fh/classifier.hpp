#pragma once

#include <cstdint>

#include "fh/attributes.hpp"
#include "fh/image.hpp"
#include "fh/layers.hpp"

namespace fh {

struct ClassifierConfig {
  int base_channels = 32;
  void validate() const;
};

/// Attribute probabilities from a 16x16 LR face.
class AttributeClassifier {
 public:
  AttributeClassifier(const ClassifierConfig& config, std::uint64_t seed);

  /// lr is [N,3,16,16]; returns probabilities [N,12,1,1].
  [[nodiscard]] Var forward(const Var& lr) const;
  [[nodiscard]] AttributeVector classify(const Image& lr) const;

  [[nodiscard]] const ClassifierConfig& config() const { return config_; }
  [[nodiscard]] ParamStore& store() { return store_; }
  [[nodiscard]] const ParamStore& store() const { return store_; }

 private:
  ClassifierConfig config_;
  ParamStore store_;
  Conv2d conv1_;
  Conv2d conv2_;
  Conv2d head_;
};

}  // namespace fh
