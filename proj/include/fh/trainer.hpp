#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fh/checkpoint.hpp"
#include "fh/classifier.hpp"
#include "fh/critic.hpp"
#include "fh/data_pipeline.hpp"
#include "fh/feature_extractor.hpp"
#include "fh/generator.hpp"
#include "fh/losses.hpp"
#include "fh/optim.hpp"

namespace fh {

struct TrainConfig {
  std::array<int, 3> stage_epochs = {4, 4, 8};
  int batch_size = 16;
  int n_critic = 5;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.9;
  LossWeights weights;
  std::uint64_t seed = 0;
  /// Periodic checkpoint cadence in steps; 0 disables it.
  int checkpoint_every = 0;
  std::string output_dir = "run";
  bool joint_stage_losses = false;
  bool continuous_attributes = false;

  GeneratorConfig generator;
  int critic_base_channels = 64;
  int critic_max_channels = 512;
  ClassifierConfig classifier;
  ExtractorConfig extractor;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// INI-style `key = value` text. Top-level keys mirror TrainConfig fields;
/// [weights], [generator], [critic], [classifier] and [extractor] sections
/// hold the nested ones. Unknown keys are rejected.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);
std::string format_config(const TrainConfig& config);
/// The configuration snapshot stored in a checkpoint.
TrainConfig config_from_checkpoint(const Checkpoint& ckpt);

/// 1 while epoch < e0, 2 while epoch < e0 + e1, otherwise 3.
int stage_for_epoch(int epoch, const std::array<int, 3>& stage_epochs);

/// Deterministic sample order for an epoch.
std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, int epoch);

struct Batch {
  Tensor lr;       // [N,3,16,16]
  Tensor attrs;    // [N,12,1,1]
  std::map<int, Tensor> targets;  // resolution -> [N,3,R,R]

  [[nodiscard]] int size() const { return lr.shape().n; }
};

Batch make_batch(const std::vector<TrainingSample>& samples, std::span<const std::size_t> indices);

struct StepLog {
  std::int64_t step = 0;
  int epoch = 0;
  int stage = 0;
  std::vector<std::pair<std::string, double>> components;
  double wall_time = 0.0;

  [[nodiscard]] double component(const std::string& name) const;
  [[nodiscard]] nlohmann::json to_json() const;
  static StepLog from_json(const nlohmann::json& j);
};

/// A loss term became NaN or infinite; the step was abandoned before the
/// offending update was applied.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& component, std::int64_t step)
      : std::runtime_error("loss component '" + component + "' is not finite at step " + std::to_string(step)),
        component_(component) {}
  [[nodiscard]] const std::string& component() const { return component_; }

 private:
  std::string component_;
};

/// Every network of one model. Critic i (index i-1) judges stage i.
struct Networks {
  explicit Networks(const TrainConfig& config);

  Generator generator;
  std::vector<Critic> critics;
  AttributeClassifier classifier;

  /// Prefixed names: generator/, critic1/..critic3/, classifier/.
  void save_into(Checkpoint& ckpt) const;
  void load_from(const Checkpoint& ckpt);
};

class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  /// n_critic updates of the active critic, one generator update and one
  /// classifier update on `batch`.
  StepLog train_step(const Batch& batch);

  // The phases of train_step in order; each appends its loss components to `log`.
  void critic_phase(const Batch& batch, StepLog& log);
  void generator_phase(const Batch& batch, StepLog& log);
  void classifier_phase(const Batch& batch, StepLog& log);

  [[nodiscard]] const TrainConfig& config() const { return config_; }
  [[nodiscard]] Networks& networks() { return nets_; }
  [[nodiscard]] const Networks& networks() const { return nets_; }
  [[nodiscard]] const FeatureExtractor& extractor() const { return *extractor_; }

  [[nodiscard]] int epoch() const { return epoch_; }
  [[nodiscard]] int batch_in_epoch() const { return batch_in_epoch_; }
  [[nodiscard]] std::int64_t global_step() const { return global_step_; }
  [[nodiscard]] int active_stage() const { return active_stage_; }
  [[nodiscard]] std::int64_t critic_updates() const { return critic_updates_; }
  [[nodiscard]] std::int64_t generator_updates() const { return generator_updates_; }

  /// Stages never move backwards.
  void set_active_stage(int stage);
  void set_position(int epoch, int batch_in_epoch);

  [[nodiscard]] Checkpoint to_checkpoint() const;
  void restore(const Checkpoint& ckpt);
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  double uniform();
  void check_batch(const Batch& batch) const;
  [[nodiscard]] std::vector<int> trained_stages() const;

  TrainConfig config_;
  Networks nets_;
  std::unique_ptr<FeatureExtractor> extractor_;
  Adam gen_opt_;
  std::vector<Adam> critic_opts_;
  Adam clf_opt_;
  Rng rng_;
  int epoch_ = 0;
  int batch_in_epoch_ = 0;
  std::int64_t global_step_ = 0;
  int active_stage_ = 1;
  std::int64_t critic_updates_ = 0;
  std::int64_t generator_updates_ = 0;
};

struct TrainingResult {
  std::filesystem::path final_checkpoint;
  std::vector<std::filesystem::path> stage_checkpoints;
  std::vector<std::filesystem::path> periodic_checkpoints;
  std::vector<StepLog> log;
};

using StepCallback = std::function<void(const StepLog&)>;

/// Runs the full progressive schedule over `samples`, appending one JSON line
/// per step to output_dir/train_log.jsonl and writing stage{i}.ckpt at each
/// stage boundary plus step{N}.ckpt every checkpoint_every steps.
TrainingResult run_training(const TrainConfig& config, const std::vector<TrainingSample>& samples,
                            const std::optional<std::filesystem::path>& resume = std::nullopt,
                            const StepCallback& on_step = {});

/// Same, reading the train split of a manifest.
TrainingResult run_training(const TrainConfig& config, const std::filesystem::path& manifest,
                            const std::optional<std::filesystem::path>& resume = std::nullopt,
                            const StepCallback& on_step = {});

std::vector<StepLog> read_training_log(const std::filesystem::path& path);

}  // namespace fh
