#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "fh/layers.hpp"

namespace fh {

/// Frozen image-to-feature network used by the perceptual loss and the
/// feature cosine metric. Implementations never expose trainable parameters.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  /// [N,3,128,128] -> feature maps; differentiable in the input.
  [[nodiscard]] virtual Var features(const Var& images) const = 0;
  [[nodiscard]] virtual std::string layer() const = 0;
};

struct ExtractorConfig {
  int width = 8;
  std::uint64_t seed = 0x5eedULL;
  /// Optional weight file (checkpoint container) replacing the random init.
  std::string weights_path;
};

/// VGG-style stack (2-2-3 conv blocks with max pooling) truncated after the
/// first rectified convolution of block 4. The default random weights keep
/// metric properties but carry no identity information.
class VggExtractor final : public FeatureExtractor {
 public:
  explicit VggExtractor(const ExtractorConfig& config);

  [[nodiscard]] Var features(const Var& images) const override;
  [[nodiscard]] std::string layer() const override { return "relu4_1"; }

  /// Loads named weights ("conv1_1.weight", ...) from a checkpoint container.
  void load_weights(const std::filesystem::path& path);
  [[nodiscard]] const ParamStore& store() const { return store_; }

 private:
  ParamStore store_;
  std::vector<std::vector<Conv2d>> blocks_;
};

std::unique_ptr<FeatureExtractor> make_extractor(const ExtractorConfig& config);

}  // namespace fh
