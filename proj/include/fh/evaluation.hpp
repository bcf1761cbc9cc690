#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "fh/data_pipeline.hpp"
#include "fh/model.hpp"

namespace fh {

enum class AttributeSource { classifier, ground_truth };

std::string to_string(AttributeSource s);
AttributeSource attribute_source_from_string(const std::string& s);

struct EvalRow {
  std::string id;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double cos_lr_gt = 0.0;  // NaN when no extractor was supplied
  double cos_sr_gt = 0.0;
};

struct EvalReport {
  std::string method;
  std::string attribute_source;
  std::string feature_layer;
  std::vector<EvalRow> rows;
  EvalRow mean;

  /// Mean of every column, accumulated in row order.
  void aggregate();
  [[nodiscard]] nlohmann::json to_json() const;
  [[nodiscard]] std::string to_csv() const;
};

/// Runs the stage-3 generator on every sample's LR input with attributes
/// taken from `source` and scores the 128x128 result against the HR target.
EvalReport evaluate(const Model& model, const std::vector<TrainingSample>& samples, AttributeSource source);

/// Loads the checkpoint and the test split of the manifest.
EvalReport evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
                    AttributeSource source);

/// Scores one-shot bilinear 16 -> 128 upsampling of each LR input.
EvalReport bilinear_baseline(const std::vector<TrainingSample>& samples, const FeatureExtractor* extractor = nullptr);

}  // namespace fh
