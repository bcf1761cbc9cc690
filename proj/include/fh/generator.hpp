#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fh/attributes.hpp"
#include "fh/image.hpp"
#include "fh/layers.hpp"

namespace fh {

struct GeneratorConfig {
  int n_a = kNumAttributes;
  int base_channels = 64;
  int encoder_depth = 2;
  int residual_blocks_per_stage = 2;
  std::array<int, 3> stage_resolutions = {32, 64, 128};

  /// Throws std::invalid_argument describing the first problem.
  void validate() const;
  /// Feature width entering stage `stage` (0 is the decoder output at 16x16).
  [[nodiscard]] int stage_channels(int stage) const { return base_channels >> stage; }
};

/// Per-stage maps of one forward pass. Index 0 holds stage 1.
struct StageOutputs {
  int active_stage = 0;
  /// Bilinear upsampling of the LR input to 32x32; the recursion's merged(0).
  Var upsampled_lr;
  std::vector<Var> merged;
  std::vector<Var> rgb;

  /// Merged output of `stage`; throws std::out_of_range beyond the active stage.
  [[nodiscard]] const Var& image(int stage) const;
  /// Pre-merge RGB block map of `stage`; same bounds as image().
  [[nodiscard]] const Var& intermediate_rgb(int stage) const;
};

class Generator {
 public:
  Generator(const GeneratorConfig& config, std::uint64_t seed);

  /// lr is [N,3,16,16], attrs [N,12,1,1]. Only stages up to `active_stage` are evaluated.
  [[nodiscard]] StageOutputs forward(const Var& lr, const Var& attrs, int active_stage,
                                     const ForwardOptions& opt) const;

  /// Evaluation-mode single-image convenience; returns merged outputs for stages 1..active_stage.
  [[nodiscard]] std::vector<Image> generate(const Image& lr, const AttributeVector& attrs,
                                            int active_stage = 3) const;

  [[nodiscard]] const GeneratorConfig& config() const { return config_; }
  [[nodiscard]] ParamStore& store() { return store_; }
  [[nodiscard]] const ParamStore& store() const { return store_; }

 private:
  struct ConvBn {
    Conv2d conv;
    BatchNorm2d bn;
  };
  struct UpBn {
    ConvTranspose2d conv;
    BatchNorm2d bn;
  };
  struct ResidualBlock {
    ConvBn a;
    ConvBn b;
  };
  struct Stage {
    std::vector<ResidualBlock> residual;
    UpBn up;
    Conv2d to_rgb;
  };

  GeneratorConfig config_;
  ParamStore store_;
  std::vector<ConvBn> encoder_;
  ConvBn fuse_;
  std::vector<UpBn> decoder_;
  std::vector<Stage> stages_;
};

}  // namespace fh
