#pragma once

#include <filesystem>
#include <memory>

#include "fh/trainer.hpp"

namespace fh {

/// Read-only model restored from a checkpoint: all five networks plus the
/// feature extractor named by the checkpoint's configuration.
struct Model {
  TrainConfig config;
  Networks nets;
  int stage = 1;
  std::unique_ptr<FeatureExtractor> extractor;

  explicit Model(const TrainConfig& cfg) : config(cfg), nets(cfg), extractor(make_extractor(cfg.extractor)) {}

  static std::unique_ptr<Model> load(const std::filesystem::path& path);
  static std::unique_ptr<Model> from_checkpoint(const Checkpoint& ckpt);
};

}  // namespace fh
