#include "fh/trainer.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace fh {
namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using nlohmann::json;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) { return splitmix(seed ^ splitmix(tag)); }

// ---- config fields ----

std::string fmt_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, r.ptr};
}

template <typename T>
T parse_number(const std::string& key, const std::string& s) {
  T v{};
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc{} || r.ptr != e) throw std::invalid_argument("config key '" + key + "': bad value '" + s + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("config key '" + key + "': expected true or false, got '" + s + "'");
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

struct Field {
  std::string section;  // empty for top-level keys
  std::string key;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define FH_INT_FIELD(sec, name, member)                                                                     \
  Field {                                                                                                   \
    sec, name, [](TrainConfig& c, const std::string& v) { c.member = parse_number<int>(name, v); },         \
        [](const TrainConfig& c) { return std::to_string(c.member); }                                       \
  }
#define FH_DOUBLE_FIELD(sec, name, member)                                                                  \
  Field {                                                                                                   \
    sec, name, [](TrainConfig& c, const std::string& v) { c.member = parse_number<double>(name, v); },      \
        [](const TrainConfig& c) { return fmt_double(c.member); }                                           \
  }
#define FH_BOOL_FIELD(sec, name, member)                                                                    \
  Field {                                                                                                   \
    sec, name, [](TrainConfig& c, const std::string& v) { c.member = parse_bool(name, v); },                \
        [](const TrainConfig& c) { return std::string(c.member ? "true" : "false"); }                       \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      Field{"", "stage_epochs",
            [](TrainConfig& c, const std::string& v) {
              std::vector<int> parts;
              std::stringstream ss(v);
              std::string item;
              while (std::getline(ss, item, ',')) parts.push_back(parse_number<int>("stage_epochs", trim(item)));
              if (parts.size() != 3) throw std::invalid_argument("config key 'stage_epochs' needs three integers");
              c.stage_epochs = {parts[0], parts[1], parts[2]};
            },
            [](const TrainConfig& c) {
              return std::to_string(c.stage_epochs[0]) + ", " + std::to_string(c.stage_epochs[1]) + ", " +
                     std::to_string(c.stage_epochs[2]);
            }},
      FH_INT_FIELD("", "batch_size", batch_size),
      FH_INT_FIELD("", "n_critic", n_critic),
      FH_DOUBLE_FIELD("", "learning_rate", learning_rate),
      FH_DOUBLE_FIELD("", "adam_beta1", adam_beta1),
      FH_DOUBLE_FIELD("", "adam_beta2", adam_beta2),
      Field{"", "seed", [](TrainConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); },
            [](const TrainConfig& c) { return std::to_string(c.seed); }},
      FH_INT_FIELD("", "checkpoint_every", checkpoint_every),
      Field{"", "output_dir", [](TrainConfig& c, const std::string& v) { c.output_dir = v; },
            [](const TrainConfig& c) { return c.output_dir; }},
      FH_BOOL_FIELD("", "joint_stage_losses", joint_stage_losses),
      FH_BOOL_FIELD("", "continuous_attributes", continuous_attributes),
      FH_DOUBLE_FIELD("weights", "alpha", weights.alpha),
      FH_DOUBLE_FIELD("weights", "beta", weights.beta),
      FH_DOUBLE_FIELD("weights", "gamma", weights.gamma),
      FH_DOUBLE_FIELD("weights", "lambda", weights.lambda),
      FH_INT_FIELD("generator", "base_channels", generator.base_channels),
      FH_INT_FIELD("generator", "encoder_depth", generator.encoder_depth),
      FH_INT_FIELD("generator", "residual_blocks_per_stage", generator.residual_blocks_per_stage),
      FH_INT_FIELD("critic", "base_channels", critic_base_channels),
      FH_INT_FIELD("critic", "max_channels", critic_max_channels),
      FH_INT_FIELD("classifier", "base_channels", classifier.base_channels),
      FH_INT_FIELD("extractor", "width", extractor.width),
      Field{"extractor", "seed",
            [](TrainConfig& c, const std::string& v) { c.extractor.seed = parse_number<std::uint64_t>("seed", v); },
            [](const TrainConfig& c) { return std::to_string(c.extractor.seed); }},
      Field{"extractor", "weights_path", [](TrainConfig& c, const std::string& v) { c.extractor.weights_path = v; },
            [](const TrainConfig& c) { return c.extractor.weights_path; }},
  };
  return f;
}

#undef FH_INT_FIELD
#undef FH_DOUBLE_FIELD
#undef FH_BOOL_FIELD

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

void check_finite(const LossBreakdown& lb, const std::string& prefix, std::int64_t step) {
  for (const auto& t : lb.terms) {
    if (!std::isfinite(t.raw.item())) throw TrainingDiverged(prefix + t.name, step);
  }
  if (!std::isfinite(lb.total.item())) throw TrainingDiverged(prefix + "total", step);
}

// Ordered accumulation of named log values.
void accumulate(std::vector<std::pair<std::string, double>>& comps, const std::string& name, double v) {
  for (auto& [n, x] : comps) {
    if (n == name) {
      x += v;
      return;
    }
  }
  comps.emplace_back(name, v);
}

std::string opt_prefix(const std::string& net, char which) { return "opt/" + net + "/" + which + "/"; }

void save_adam(Checkpoint& ckpt, json& steps, const std::string& net, const Adam& opt, const ParamStore& store) {
  steps[net] = opt.steps();
  const auto& names = store.param_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    ckpt.arrays[opt_prefix(net, 'm') + names[i]] = opt.first_moments()[i];
    ckpt.arrays[opt_prefix(net, 'v') + names[i]] = opt.second_moments()[i];
  }
}

void load_adam(const Checkpoint& ckpt, const std::string& net, Adam& opt, const ParamStore& store) {
  std::vector<Tensor> m, v;
  for (const auto& name : store.param_names()) {
    auto mi = ckpt.arrays.find(opt_prefix(net, 'm') + name);
    auto vi = ckpt.arrays.find(opt_prefix(net, 'v') + name);
    if (mi == ckpt.arrays.end() || vi == ckpt.arrays.end()) {
      throw CheckpointError("checkpoint lacks optimizer state for " + net + "/" + name);
    }
    m.push_back(mi->second);
    v.push_back(vi->second);
  }
  opt.restore(ckpt.metadata.at("optimizer_steps").at(net).get<std::int64_t>(), std::move(m), std::move(v));
}

void save_store(Checkpoint& ckpt, const std::string& prefix, const ParamStore& store) {
  for (const auto& [name, var] : store.named_tensors()) ckpt.arrays[prefix + "/" + name] = var.value();
}

void load_store(const Checkpoint& ckpt, const std::string& prefix, ParamStore& store) {
  std::map<std::string, Tensor> values;
  const std::string p = prefix + "/";
  for (const auto& [name, t] : ckpt.arrays) {
    if (name.compare(0, p.size(), p) == 0) values.emplace(name.substr(p.size()), t);
  }
  try {
    store.load(values);
  } catch (const std::exception& e) {
    throw CheckpointError(prefix + ": " + e.what());
  }
}

AdamConfig adam_config(const TrainConfig& c) { return {c.learning_rate, c.adam_beta1, c.adam_beta2, 1e-8}; }

}  // namespace

// ---- config ----

void TrainConfig::validate() const {
  for (int e : stage_epochs) {
    if (e < 1) throw std::invalid_argument("stage_epochs must all be at least 1");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (n_critic < 1) throw std::invalid_argument("n_critic must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning_rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("adam betas must lie in [0,1)");
  }
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be non-negative");
  weights.validate();
  generator.validate();
  CriticConfig{1, critic_base_channels, critic_max_channels}.validate();
  classifier.validate();
  if (extractor.width < 1) throw std::invalid_argument("extractor width must be positive");
}

TrainConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  TrainConfig c;
  auto apply = [&c](const std::string& section, const std::string& key, const std::string& value) {
    const Field* f = find_field(section, key);
    if (!f) throw std::invalid_argument("unknown config key '" + (section.empty() ? key : section + "." + key) + "'");
    f->set(c, trim(value));
  };
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      apply("", name, node.data());
    } else {
      for (const auto& [key, leaf] : node) apply(name, key, leaf.data());
    }
  }
  return c;
}

TrainConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const TrainConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      section = f.section;
      out += "\n[" + section + "]\n";
    }
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

TrainConfig config_from_checkpoint(const Checkpoint& ckpt) {
  auto it = ckpt.metadata.find("config");
  if (it == ckpt.metadata.end() || !it->is_string()) throw CheckpointError("checkpoint has no config snapshot");
  return parse_config(it->get<std::string>());
}

int stage_for_epoch(int epoch, const std::array<int, 3>& stage_epochs) {
  if (epoch < stage_epochs[0]) return 1;
  if (epoch < stage_epochs[0] + stage_epochs[1]) return 2;
  return 3;
}

std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x1000 + static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

Batch make_batch(const std::vector<TrainingSample>& samples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("empty batch");
  std::vector<Image> lr;
  std::vector<AttributeVector> attrs;
  std::map<int, std::vector<Image>> targets;
  for (std::size_t i : indices) {
    const TrainingSample& s = samples.at(i);
    lr.push_back(s.lr);
    attrs.push_back(s.attributes);
    for (const auto& [res, img] : s.targets) targets[res].push_back(img);
  }
  Batch b;
  b.lr = images_to_tensor(lr);
  b.attrs = attributes_to_tensor(attrs);
  for (auto& [res, imgs] : targets) b.targets[res] = images_to_tensor(imgs);
  return b;
}

double StepLog::component(const std::string& name) const {
  for (const auto& [n, v] : components) {
    if (n == name) return v;
  }
  throw std::out_of_range("no logged component " + name);
}

json StepLog::to_json() const {
  json j = {{"step", step}, {"epoch", epoch}, {"stage", stage}};
  json c = json::object();
  for (const auto& [n, v] : components) c[n] = v;
  j["losses"] = c;
  j["wall_time"] = wall_time;
  return j;
}

StepLog StepLog::from_json(const json& j) {
  StepLog s;
  s.step = j.at("step").get<std::int64_t>();
  s.epoch = j.at("epoch").get<int>();
  s.stage = j.at("stage").get<int>();
  for (const auto& [n, v] : j.at("losses").items()) s.components.emplace_back(n, v.get<double>());
  s.wall_time = j.value("wall_time", 0.0);
  return s;
}

// ---- networks ----

Networks::Networks(const TrainConfig& config)
    : generator(config.generator, derive_seed(config.seed, 1)),
      classifier(config.classifier, derive_seed(config.seed, 2)) {
  for (int s = 1; s <= 3; ++s) {
    critics.emplace_back(CriticConfig{s, config.critic_base_channels, config.critic_max_channels},
                         derive_seed(config.seed, 10 + static_cast<std::uint64_t>(s)));
  }
}

void Networks::save_into(Checkpoint& ckpt) const {
  save_store(ckpt, "generator", generator.store());
  for (int s = 1; s <= 3; ++s) save_store(ckpt, "critic" + std::to_string(s), critics[static_cast<std::size_t>(s - 1)].store());
  save_store(ckpt, "classifier", classifier.store());
}

void Networks::load_from(const Checkpoint& ckpt) {
  load_store(ckpt, "generator", generator.store());
  for (int s = 1; s <= 3; ++s) load_store(ckpt, "critic" + std::to_string(s), critics[static_cast<std::size_t>(s - 1)].store());
  load_store(ckpt, "classifier", classifier.store());
}

// ---- trainer ----

Trainer::Trainer(TrainConfig config)
    : config_((config.validate(), std::move(config))),
      nets_(config_),
      extractor_(make_extractor(config_.extractor)),
      gen_opt_(nets_.generator.store().params(), adam_config(config_)),
      clf_opt_(nets_.classifier.store().params(), adam_config(config_)),
      rng_(derive_seed(config_.seed, 3)) {
  for (const auto& c : nets_.critics) critic_opts_.emplace_back(c.store().params(), adam_config(config_));
}

double Trainer::uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

void Trainer::set_active_stage(int stage) {
  if (stage < 1 || stage > 3) throw std::invalid_argument("stage must be in 1..3");
  if (stage < active_stage_) throw std::logic_error("active stage cannot decrease");
  active_stage_ = stage;
}

void Trainer::set_position(int epoch, int batch_in_epoch) {
  epoch_ = epoch;
  batch_in_epoch_ = batch_in_epoch;
}

void Trainer::check_batch(const Batch& batch) const {
  const int n = batch.size();
  if (batch.attrs.shape() != Shape{n, kNumAttributes, 1, 1}) throw std::invalid_argument("batch attributes malformed");
  for (int s = 1; s <= active_stage_; ++s) {
    const int res = config_.generator.stage_resolutions[static_cast<std::size_t>(s - 1)];
    auto it = batch.targets.find(res);
    if (it == batch.targets.end() || it->second.shape() != Shape{n, 3, res, res}) {
      throw std::invalid_argument("batch lacks " + std::to_string(res) + "x" + std::to_string(res) + " targets");
    }
  }
}

std::vector<int> Trainer::trained_stages() const {
  std::vector<int> stages;
  for (int s = config_.joint_stage_losses ? 1 : active_stage_; s <= active_stage_; ++s) stages.push_back(s);
  return stages;
}

void Trainer::critic_phase(const Batch& batch, StepLog& log) {
  check_batch(batch);
  const int n = batch.size();
  const Var lr = constant(batch.lr);
  const Var attrs = constant(batch.attrs);
  // Fakes stay fixed for the whole phase.
  StageOutputs fakes;
  {
    NoGradGuard no_grad;
    fakes = nets_.generator.forward(lr, attrs, active_stage_, {true, false});
  }
  const auto stages = trained_stages();
  for (int k = 0; k < config_.n_critic; ++k) {
    for (int s : stages) {
      Critic& critic = nets_.critics[static_cast<std::size_t>(s - 1)];
      Tensor t(Shape{n, 1, 1, 1});
      for (auto& v : t.storage()) v = uniform();
      CriticLossInputs ci{s, batch.targets.at(critic.resolution()), fakes.image(s).value(), attrs, t, &critic};
      LossBreakdown lb = critic_loss(ci, config_.weights);
      check_finite(lb, "critic_", log.step);
      critic_opts_[static_cast<std::size_t>(s - 1)].step(grad(lb.total, critic.store().params()));
      for (const auto& term : lb.terms) {
        accumulate(log.components, "critic_" + term.name, term.raw.item() / config_.n_critic);
      }
      accumulate(log.components, "critic_total", lb.total.item() / config_.n_critic);
    }
    ++critic_updates_;
  }
}

void Trainer::generator_phase(const Batch& batch, StepLog& log) {
  check_batch(batch);
  const Var lr = constant(batch.lr);
  const Var attrs = constant(batch.attrs);
  Generator& gen = nets_.generator;
  std::vector<AttributeVector> random(static_cast<std::size_t>(batch.size()));
  for (auto& a : random) a = sample_random_attributes(rng_, config_.continuous_attributes);
  const Var a_star = constant(attributes_to_tensor(random));
  // Only the ground-truth-attribute pass folds batch statistics into running statistics.
  // Running statistics move in the forward pass; an abandoned step puts them back.
  std::vector<std::pair<Var, Tensor>> saved;
  for (const auto& [name, v] : gen.store().named_tensors()) saved.emplace_back(v, v.value());
  StageOutputs out_gt = gen.forward(lr, attrs, active_stage_, {true, true});
  StageOutputs out_rand = gen.forward(lr, a_star, active_stage_, {true, false});
  Var total;
  std::vector<LossBreakdown> parts;
  try {
    for (int s : trained_stages()) {
      const Critic& critic = nets_.critics[static_cast<std::size_t>(s - 1)];
      GeneratorLossInputs gi{s,      out_gt.image(s), out_rand.image(s), constant(batch.targets.at(critic.resolution())),
                             a_star, &critic,         extractor_.get()};
      LossBreakdown lb = generator_loss(gi, config_.weights);
      check_finite(lb, "gen_", log.step);
      total = total.defined() ? add(total, lb.total) : lb.total;
      parts.push_back(std::move(lb));
    }
  } catch (const TrainingDiverged&) {
    for (auto& [v, t] : saved) v.mutable_value() = t;
    throw;
  }
  gen_opt_.step(grad(total, gen.store().params()));
  ++generator_updates_;
  for (const auto& lb : parts)
    for (const auto& term : lb.terms) accumulate(log.components, "gen_" + term.name, term.raw.item());
  accumulate(log.components, "gen_total", total.item());
}

void Trainer::classifier_phase(const Batch& batch, StepLog& log) {
  check_batch(batch);
  Var loss = classifier_loss(nets_.classifier.forward(constant(batch.lr)), constant(batch.attrs));
  if (!std::isfinite(loss.item())) throw TrainingDiverged("classifier_bce", log.step);
  clf_opt_.step(grad(loss, nets_.classifier.store().params()));
  accumulate(log.components, "classifier_bce", loss.item());
}

StepLog Trainer::train_step(const Batch& batch) {
  StepLog log;
  log.step = global_step_ + 1;
  log.epoch = epoch_;
  log.stage = active_stage_;
  critic_phase(batch, log);
  generator_phase(batch, log);
  classifier_phase(batch, log);
  ++global_step_;
  ++batch_in_epoch_;
  log.wall_time = std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
  return log;
}

Checkpoint Trainer::to_checkpoint() const {
  Checkpoint ckpt;
  json& m = ckpt.metadata;
  m["format_version"] = kCheckpointFormatVersion;
  m["config"] = format_config(config_);
  m["epoch"] = epoch_;
  m["batch_in_epoch"] = batch_in_epoch_;
  m["step"] = global_step_;
  m["stage"] = active_stage_;
  m["critic_updates"] = critic_updates_;
  m["generator_updates"] = generator_updates_;
  std::ostringstream rng;
  rng << rng_;
  m["rng"] = rng.str();
  nets_.save_into(ckpt);
  json steps = json::object();
  save_adam(ckpt, steps, "generator", gen_opt_, nets_.generator.store());
  for (int s = 1; s <= 3; ++s) {
    save_adam(ckpt, steps, "critic" + std::to_string(s), critic_opts_[static_cast<std::size_t>(s - 1)],
              nets_.critics[static_cast<std::size_t>(s - 1)].store());
  }
  save_adam(ckpt, steps, "classifier", clf_opt_, nets_.classifier.store());
  m["optimizer_steps"] = steps;
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt) {
  try {
    const json& m = ckpt.metadata;
    nets_.load_from(ckpt);
    load_adam(ckpt, "generator", gen_opt_, nets_.generator.store());
    for (int s = 1; s <= 3; ++s) {
      load_adam(ckpt, "critic" + std::to_string(s), critic_opts_[static_cast<std::size_t>(s - 1)],
                nets_.critics[static_cast<std::size_t>(s - 1)].store());
    }
    load_adam(ckpt, "classifier", clf_opt_, nets_.classifier.store());
    std::istringstream rng(m.at("rng").get<std::string>());
    rng >> rng_;
    if (!rng) throw CheckpointError("checkpoint RNG state is unreadable");
    epoch_ = m.at("epoch").get<int>();
    batch_in_epoch_ = m.at("batch_in_epoch").get<int>();
    global_step_ = m.at("step").get<std::int64_t>();
    active_stage_ = m.at("stage").get<int>();
    critic_updates_ = m.at("critic_updates").get<std::int64_t>();
    generator_updates_ = m.at("generator_updates").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint metadata incomplete: ") + e.what());
  }
}

void Trainer::save(const fs::path& path) const { write_checkpoint(path, to_checkpoint()); }

void Trainer::load(const fs::path& path) { restore(read_checkpoint(path)); }

// ---- orchestration ----

TrainingResult run_training(const TrainConfig& config, const std::vector<TrainingSample>& samples,
                            const std::optional<fs::path>& resume, const StepCallback& on_step) {
  config.validate();
  if (samples.empty()) throw std::invalid_argument("no training samples");
  const fs::path out_dir = config.output_dir;
  fs::create_directories(out_dir);

  Trainer trainer(config);
  if (resume) trainer.load(*resume);

  std::ofstream log_file(out_dir / "train_log.jsonl", resume ? std::ios::app : std::ios::trunc);
  if (!log_file) throw std::runtime_error("cannot open training log in " + out_dir.string());

  TrainingResult result;
  const auto& se = config.stage_epochs;
  const int total_epochs = se[0] + se[1] + se[2];
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  const std::size_t n_batches = (samples.size() + bs - 1) / bs;

  for (int epoch = trainer.epoch(); epoch < total_epochs; ++epoch) {
    const int stage = stage_for_epoch(epoch, se);
    trainer.set_active_stage(std::max(stage, trainer.active_stage()));
    const auto order = epoch_order(samples.size(), config.seed, epoch);
    for (std::size_t b = static_cast<std::size_t>(trainer.batch_in_epoch()); b < n_batches; ++b) {
      const std::size_t begin = b * bs;
      const std::size_t count = std::min(bs, samples.size() - begin);
      StepLog log = trainer.train_step(make_batch(samples, std::span(order).subspan(begin, count)));
      log_file << log.to_json().dump() << '\n';
      log_file.flush();
      if (on_step) on_step(log);
      result.log.push_back(std::move(log));
      if (config.checkpoint_every > 0 && trainer.global_step() % config.checkpoint_every == 0) {
        const fs::path p = out_dir / ("step" + std::to_string(trainer.global_step()) + ".ckpt");
        trainer.save(p);
        result.periodic_checkpoints.push_back(p);
      }
    }
    trainer.set_position(epoch + 1, 0);
    if (stage_for_epoch(epoch + 1, se) != stage || epoch + 1 == total_epochs) {
      const fs::path p = out_dir / ("stage" + std::to_string(stage) + ".ckpt");
      trainer.save(p);
      result.stage_checkpoints.push_back(p);
    }
  }
  if (result.stage_checkpoints.empty()) {
    const fs::path p = out_dir / "stage3.ckpt";
    trainer.save(p);
    result.stage_checkpoints.push_back(p);
  }
  result.final_checkpoint = result.stage_checkpoints.back();
  return result;
}

TrainingResult run_training(const TrainConfig& config, const fs::path& manifest,
                            const std::optional<fs::path>& resume, const StepCallback& on_step) {
  config.validate();
  auto records = filter_split(read_manifest(manifest), Split::train);
  if (records.empty()) throw std::invalid_argument("manifest " + manifest.string() + " has no train records");
  return run_training(config, load_samples(records), resume, on_step);
}

std::vector<StepLog> read_training_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open training log " + path.string());
  std::vector<StepLog> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(StepLog::from_json(json::parse(line)));
  }
  return out;
}

}  // namespace fh
