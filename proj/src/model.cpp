#include "fh/model.hpp"

namespace fh {

std::unique_ptr<Model> Model::from_checkpoint(const Checkpoint& ckpt) {
  auto model = std::make_unique<Model>(config_from_checkpoint(ckpt));
  model->nets.load_from(ckpt);
  try {
    model->stage = ckpt.metadata.at("stage").get<int>();
  } catch (const nlohmann::json::exception&) {
    throw CheckpointError("checkpoint metadata lacks the active stage");
  }
  return model;
}

std::unique_ptr<Model> Model::load(const std::filesystem::path& path) { return from_checkpoint(read_checkpoint(path)); }

}  // namespace fh
