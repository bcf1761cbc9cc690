#include "fh/feature_extractor.hpp"

#include <stdexcept>

#include "fh/checkpoint.hpp"

namespace fh {
namespace {

Conv2d frozen_conv(ParamStore& store, const std::string& name, int in, int out, Rng& rng) {
  Conv2d c;
  c.weight = store.add_buffer(name + ".weight", he_normal(Shape{out, in, 3, 3}, in * 9, 0.0, rng));
  c.bias = store.add_buffer(name + ".bias", Tensor(Shape{1, out, 1, 1}));
  c.geo = {1, 1};
  return c;
}

}  // namespace

VggExtractor::VggExtractor(const ExtractorConfig& config) {
  if (config.width < 1) throw std::invalid_argument("extractor width must be positive");
  Rng rng(config.seed);
  const int w = config.width;
  const int widths[4] = {w, 2 * w, 4 * w, 8 * w};
  const int depth[4] = {2, 2, 3, 1};
  int in = 3;
  for (int b = 0; b < 4; ++b) {
    std::vector<Conv2d> block;
    for (int l = 0; l < depth[b]; ++l) {
      block.push_back(frozen_conv(store_, "conv" + std::to_string(b + 1) + "_" + std::to_string(l + 1), in,
                                  widths[b], rng));
      in = widths[b];
    }
    blocks_.push_back(std::move(block));
  }
  if (!config.weights_path.empty()) load_weights(config.weights_path);
}

Var VggExtractor::features(const Var& images) const {
  const Shape s = images.shape();
  if (s.c != 3 || s.h != 128 || s.w != 128) {
    throw std::invalid_argument("feature extractor expects [N,3,128,128], got " + s.str());
  }
  Var h = images;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    if (b > 0) h = maxpool2x2(h);
    for (const auto& c : blocks_[b]) h = relu(c.forward(h));
  }
  return h;
}

void VggExtractor::load_weights(const std::filesystem::path& path) {
  try {
    store_.load(read_checkpoint(path).arrays);
  } catch (const std::exception& e) {
    throw std::runtime_error("feature extractor weights unavailable (check extractor.weights_path in the config): " +
                             std::string(e.what()));
  }
}

std::unique_ptr<FeatureExtractor> make_extractor(const ExtractorConfig& config) {
  return std::make_unique<VggExtractor>(config);
}

}  // namespace fh
