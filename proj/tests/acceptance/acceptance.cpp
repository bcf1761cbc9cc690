// Acceptance runner: one PASS / FAIL / SKIP line per criterion.
//
//   acceptance [criterion ...] [--work DIR] [--config FILE]
//
// With no criterion every one runs in order. The fixture-backed criteria
// train the overfit fixture on first use and reuse it afterwards.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "fh/evaluation.hpp"
#include "fh/metrics.hpp"
#include "fh/model.hpp"
#include "test_support.hpp"

using namespace fh;
using namespace fh::testing;
namespace fs = std::filesystem;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status;
  std::string detail;
};

struct Options {
  fs::path work = "acceptance_work";
  fs::path config;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

Outcome verdict(bool ok, const std::string& detail) { return {ok ? Status::pass : Status::fail, detail}; }

// ---- overfit fixture ------------------------------------------------------

struct FixturePaths {
  fs::path root, faces, manifest, run, ckpt, log, timing;
};

FixturePaths fixture_paths(const Options& o) {
  FixturePaths p;
  p.root = o.work / "fixture";
  p.faces = p.root / "faces";
  p.manifest = p.root / "manifest.jsonl";
  p.run = p.root / "run";
  p.ckpt = p.run / "stage3.ckpt";
  p.log = p.run / "train_log.jsonl";
  p.timing = p.root / "train_seconds.txt";
  return p;
}

TrainConfig fixture_config(const Options& o) {
  if (o.config.empty()) throw std::invalid_argument("--config is required for the overfit fixture");
  TrainConfig c = load_config(o.config);
  c.output_dir = fixture_paths(o).run.string();
  c.validate();
  return c;
}

bool fixture_current(const Options& o) {
  const FixturePaths p = fixture_paths(o);
  if (!fs::exists(p.ckpt) || !fs::exists(p.log) || !fs::exists(p.timing)) return false;
  try {
    // Where the run was written does not matter, only how it was trained.
    TrainConfig stored = config_from_checkpoint(read_checkpoint(p.ckpt));
    stored.output_dir = p.run.string();
    return format_config(stored) == format_config(fixture_config(o));
  } catch (const std::exception&) {
    return false;
  }
}

Outcome prepare_fixture(const Options& o) {
  const FixturePaths p = fixture_paths(o);
  if (fixture_current(o)) return {Status::pass, "reusing " + p.ckpt.string()};
  fs::remove_all(p.root);
  fs::create_directories(p.root);
  write_synthetic_corpus(p.faces, 32, 11);
  write_manifest(p.manifest, ingest_manifest(p.faces / "list_attr_celeba.txt", p.faces));
  const TrainConfig cfg = fixture_config(o);
  const auto t0 = Clock::now();
  const TrainingResult r = run_training(cfg, p.manifest);
  const double secs = seconds_since(t0);
  std::ofstream(p.timing) << secs << '\n';
  return {Status::pass, "trained " + std::to_string(r.log.size()) + " steps in " + fmt(secs) + " s"};
}

struct Fixture {
  std::unique_ptr<Model> model;
  std::vector<TrainingSample> samples;
  std::vector<StepLog> log;
  double train_seconds = 0.0;
};

Fixture load_fixture(const Options& o) {
  if (!fixture_current(o)) (void)prepare_fixture(o);
  const FixturePaths p = fixture_paths(o);
  Fixture f;
  f.model = Model::load(p.ckpt);
  f.samples = load_samples(read_manifest(p.manifest));
  f.log = read_training_log(p.log);
  std::ifstream(p.timing) >> f.train_seconds;
  return f;
}

// ---- criteria ---------------------------------------------------------------

Outcome metric_oracle(const Options&) {
  const auto t0 = Clock::now();
  double dp = 0.0, ds = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Image a = random_image(32, 32, 2 * i);
    Image b = random_image(32, 32, 2 * i + 1);
    // Every other pair is a noisy copy so SSIM spans its range.
    if (i % 2 == 0) {
      for (std::size_t k = 0; k < b.pixels().size(); ++k) {
        b.pixels()[k] = a.pixels()[k] + 0.05 * static_cast<double>(i % 10 + 1) * (b.pixels()[k] - 0.5);
      }
    }
    dp = std::max(dp, std::abs(psnr(a, b) - oracle_psnr(a, b)));
    ds = std::max(ds, std::abs(ssim(a, b) - oracle_ssim(a, b)));
  }
  const double secs = seconds_since(t0);
  return verdict(dp < 1e-6 && ds < 1e-6 && secs < 10.0,
                 "100 pairs, max |psnr - oracle| " + fmt(dp) + ", max |ssim - oracle| " + fmt(ds) +
                     " (tol 1e-6), " + fmt(secs, 3) + " s (< 10 s)");
}

Outcome bilinear_celeba(const Options&) {
  const char* root_env = std::getenv("FH_CELEBA_DIR");
  if (!root_env) return {Status::skip, "set FH_CELEBA_DIR to a CelebA root (list_attr_celeba.txt, img_align_celeba/)"};
  const fs::path root = root_env;
  const char* count_env = std::getenv("FH_CELEBA_COUNT");
  const std::size_t want = count_env ? std::stoul(count_env) : 1000;
  const auto t0 = Clock::now();

  auto records = ingest_manifest(root / "list_attr_celeba.txt", root / "img_align_celeba");
  std::vector<SampleRecord> test;
  if (fs::exists(root / "list_eval_partition.txt")) {
    std::ifstream in(root / "list_eval_partition.txt");
    std::set<std::string> ids;
    std::string name;
    int part;
    while (in >> name >> part) {
      if (part == 2) ids.insert(name);
    }
    for (const auto& r : records)
      if (ids.count(r.id)) test.push_back(r);
  } else {
    test = records;
  }
  if (test.size() > want) test.resize(want);
  if (test.size() < 1000) return {Status::fail, "only " + std::to_string(test.size()) + " test images (need >= 1000)"};
  const EvalReport r = bilinear_baseline(load_samples(test));
  const double secs = seconds_since(t0);
  const bool ok = std::abs(r.mean.psnr_db - 20.75) <= 1.0 && std::abs(r.mean.ssim - 0.574) <= 0.05 && secs < 300.0;
  return verdict(ok, std::to_string(test.size()) + " images: PSNR " + fmt(r.mean.psnr_db) + " dB (20.75 +- 1.0), SSIM " +
                         fmt(r.mean.ssim) + " (0.574 +- 0.05), " + fmt(secs, 3) + " s (< 300 s)");
}

Outcome shape_recursion(const Options&) {
  Generator g(GeneratorConfig{}, 1);
  const Tensor lr = random_tensor({2, 3, 16, 16}, 2, 0, 1);
  std::mt19937_64 rng(3);
  const AttributeVector at[2] = {sample_random_attributes(rng), sample_random_attributes(rng)};
  const Var attrs = constant(attributes_to_tensor(at));

  bool shapes = true;
  for (int active = 1; active <= 3; ++active) {
    const StageOutputs o = g.forward(constant(lr), attrs, active, ForwardOptions::eval());
    shapes &= o.merged.size() == static_cast<std::size_t>(active);
    for (int s = 1; s <= active; ++s) {
      const int r = 16 << s;
      shapes &= o.image(s).shape() == Shape{2, 3, r, r} && o.intermediate_rgb(s).shape() == Shape{2, 3, r, r};
    }
  }

  const StageOutputs o = g.forward(constant(lr), attrs, 3, ForwardOptions::eval());
  double recursion = 0.0;
  for (int n = 0; n < 2; ++n) {
    Image previous = oracle_bilinear(Image::from_tensor(lr, n), 32, 32);
    for (int s = 1; s <= 3; ++s) {
      const int r = 16 << s;
      const Image skip = s == 1 ? previous : oracle_bilinear(previous, r, r);
      const Image rgb = Image::from_tensor(o.intermediate_rgb(s).value(), n);
      const Image merged = Image::from_tensor(o.image(s).value(), n);
      for (std::size_t i = 0; i < merged.pixels().size(); ++i) {
        recursion = std::max(recursion, std::abs(merged.pixels()[i] - rgb.pixels()[i] - skip.pixels()[i]));
      }
      previous = merged;
    }
  }

  // Silenced RGB blocks leave nothing but the upsampling chain.
  for (const auto& [name, v] : g.store().named_tensors()) {
    if (name.find(".rgb.") != std::string::npos) {
      Var p = v;
      p.mutable_value().storage().assign(p.value().size(), 0.0);
    }
  }
  const StageOutputs z = g.forward(constant(lr), attrs, 3, ForwardOptions::eval());
  Tensor chain = kernels::resize_bilinear(lr, 32, 32);
  bool exact = true;
  double vs_oracle = 0.0;
  Image oracle = oracle_bilinear(Image::from_tensor(lr), 32, 32);
  for (int s = 1; s <= 3; ++s) {
    const int r = 16 << s;
    if (s > 1) {
      chain = kernels::resize_bilinear(chain, r, r);
      oracle = oracle_bilinear(oracle, r, r);
    }
    exact &= z.image(s).value().storage() == chain.storage();
    vs_oracle = std::max(vs_oracle, max_abs_diff(Image::from_tensor(z.image(s).value()), oracle));
  }
  return verdict(shapes && recursion < 1e-6 && exact && vs_oracle < 1e-12,
                 std::string("shapes ") + (shapes ? "ok" : "WRONG") + ", recursion max error " + fmt(recursion) +
                     " (tol 1e-6), zero-RGB rig " + (exact ? "bitwise equal to" : "DIFFERS from") +
                     " the bilinear chain, " + fmt(vs_oracle) + " from the independent resampler");
}

struct Concat {
  std::vector<double> a, n;
  void add(const GradCheck& r) {
    a.insert(a.end(), r.analytic.begin(), r.analytic.end());
    n.insert(n.end(), r.numeric.begin(), r.numeric.end());
  }
  [[nodiscard]] double rel() const { return relative_error(a, n); }
};

Outcome gradient_checks(const Options&) {
  const auto t0 = Clock::now();
  constexpr double kStep = 1e-3;
  std::vector<std::pair<std::string, double>> errs;

  {  // l1, entries kept clear of the |x| kink
    const Tensor target = random_tensor({2, 3, 6, 6}, 4, 0, 1);
    Tensor x0 = random_tensor({2, 3, 6, 6}, 5, 0.05, 0.5);
    for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = target[i] + (i % 2 ? x0[i] : -x0[i]);
    Var x(x0, true);
    const Tensor g = grad(l1_pixel_loss(x, constant(target)), {x})[0].value();
    Tensor probe = x0;
    errs.emplace_back("l1", check_gradient(probe, g, [&] {
                              return l1_pixel_loss(constant(probe), constant(target)).item();
                            }, {}, kStep).relative);
  }
  {  // bce
    const Tensor labels = random_tensor({2, 12, 1, 1}, 6, 0, 1);
    const Tensor p0 = random_tensor({2, 12, 1, 1}, 7, 0.05, 0.95);
    Var p(p0, true);
    const Tensor g = grad(attribute_bce(p, constant(labels)), {p})[0].value();
    Tensor probe = p0;
    errs.emplace_back("bce", check_gradient(probe, g, [&] {
                               return attribute_bce(constant(probe), constant(labels)).item();
                             }, {}, kStep).relative);
  }
  {  // generator: parameters under a pixel l1 probe, plus the attribute input
    GeneratorConfig gc;
    gc.base_channels = 8;
    gc.encoder_depth = 1;
    gc.residual_blocks_per_stage = 1;
    Generator g(gc, 14);
    const Tensor lr = random_tensor({2, 3, 16, 16}, 15, 0, 1);
    std::mt19937_64 rng(16);
    const AttributeVector av[2] = {sample_random_attributes(rng), sample_random_attributes(rng)};
    const Tensor at = attributes_to_tensor(av);
    const Tensor target = random_tensor({2, 3, 128, 128}, 17, 0, 1);
    auto out = [&](const Var& a) { return g.forward(constant(lr), a, 3, {true, false}).image(3); };
    auto probe = [&] { return mean(abs(sub(out(constant(at)), constant(target)))); };
    const auto params = g.store().params();
    const auto grads = grad(probe(), params);
    Concat c;
    for (std::size_t i = 0; i < params.size(); ++i) {
      Var p = params[i];
      c.add(check_gradient(p.mutable_value(), grads[i].value(), [&] { return probe().item(); },
                           spread_indices(p.value().size(), 6, i), kStep));
    }
    errs.emplace_back("generator weights", c.rel());
    // One output pixel: a probe with no |x| kink of its own.
    const std::size_t pixel = 3 * 128 * 64 + 70;
    Var a(at, true);
    const Var o = out(a);
    Tensor seed(o.shape());
    seed[pixel] = 1.0;
    const Tensor ga = grad(o, {a}, false, constant(seed))[0].value();
    Tensor pa = at;
    errs.emplace_back("generator attributes",
                      check_gradient(pa, ga, [&] { return out(constant(pa)).value()[pixel]; }, {}, kStep).relative);
  }
  {  // critic: input pixels and parameters
    Critic c({2, 4, 16}, 4);
    const Tensor x0 = random_tensor({2, 3, 64, 64}, 5, 0, 1);
    const Tensor labels = random_tensor({2, 12, 1, 1}, 6, 0, 1);
    Var x(x0, true);
    const Tensor gx = grad(sum(c.adversarial(x)), {x})[0].value();
    Tensor px = x0;
    errs.emplace_back("critic input", check_gradient(px, gx, [&] { return sum(c.adversarial(constant(px))).item(); },
                                                     spread_indices(x0.size(), 16, 7), kStep)
                                          .relative);
    auto probe = [&] {
      const CriticOutput o = c.forward(constant(x0));
      return add(mean(o.adv), mean(mul(o.attr, constant(labels))));
    };
    const auto params = c.store().params();
    const auto grads = grad(probe(), params);
    Concat cc;
    for (std::size_t i = 0; i < params.size(); ++i) {
      Var p = params[i];
      cc.add(check_gradient(p.mutable_value(), grads[i].value(), [&] { return probe().item(); },
                            spread_indices(p.value().size(), 8, i), kStep));
    }
    errs.emplace_back("critic weights", cc.rel());
  }
  std::size_t kept = 0, crossing = 0;
  {  // gradient penalty in the critic weights
    Critic c({1, 4, 16}, 13);
    const Tensor real = random_tensor({2, 3, 32, 32}, 14, 0, 1);
    const Tensor fake = random_tensor({2, 3, 32, 32}, 15, 0, 1);
    const Tensor t = random_tensor({2, 1, 1, 1}, 16, 0, 1);
    const PenaltyCheck r = check_penalty_gradient(c, real, fake, t, 10.0, 6, 50, kStep);
    kept = r.kept;
    crossing = r.crossing;
    errs.emplace_back("gradient penalty", relative_error(r.analytic, r.numeric));
  }
  const double secs = seconds_since(t0);
  bool ok = secs < 120.0 && kept >= 2 * crossing;
  std::string detail;
  for (const auto& [name, e] : errs) {
    ok &= e < 1e-2;
    detail += name + " " + fmt(e, 3) + ", ";
  }
  detail += "(tol 1e-2 at step 1e-3; penalty on " + std::to_string(kept) + " entries, " + std::to_string(crossing) +
            " sign-crossing entries left out), " + fmt(secs, 3) + " s (< 120 s)";
  return verdict(ok, detail);
}

Outcome gp_fixed_points(const Options&) {
  const Tensor real = random_tensor({4, 3, 32, 32}, 7, 0, 1);
  const Tensor fake = random_tensor({4, 3, 32, 32}, 8, 0, 1);
  const Tensor t = random_tensor({4, 1, 1, 1}, 9, 0, 1);
  const double d = 3.0 * 32 * 32;
  const AdversarialFn unit = [&](const Var& x) { return scale(sample_sum(x), 1.0 / std::sqrt(d)); };
  const AdversarialFn flat = [](const Var& x) { return constant(Tensor({x.shape().n, 1, 1, 1}, 3.0)); };
  const double u = gradient_penalty(unit, real, fake, t, 10.0).item();
  const double f = gradient_penalty(flat, real, fake, t, 10.0).item();
  return verdict(std::abs(u) < 1e-12 && f == 10.0,
                 "unit-gradient rig " + fmt(u, 3) + " (0, tol 1e-12 for rounding), constant critic " + fmt(f, 17) +
                     " (exactly 10)");
}

Outcome overfit(const Options& o) {
  const Fixture f = load_fixture(o);
  double first = -1.0;
  int last_epoch = 0;
  for (const auto& l : f.log) last_epoch = std::max(last_epoch, l.epoch);
  double tail = 0.0;
  int tail_n = 0;
  for (const auto& l : f.log) {
    if (l.stage != 3) continue;
    if (first < 0.0) first = l.component("gen_l1");
    if (l.epoch == last_epoch) {
      tail += l.component("gen_l1");
      ++tail_n;
    }
  }
  if (first < 0.0 || tail_n == 0) return {Status::fail, "training log has no stage-3 steps"};
  const double ratio = tail / tail_n / first;
  const double sr = evaluate(*f.model, f.samples, AttributeSource::ground_truth).mean.psnr_db;
  const double bl = bilinear_baseline(f.samples).mean.psnr_db;
  return verdict(ratio < 0.3 && sr - bl >= 1.0,
                 "stage-3 l1 " + fmt(first) + " -> " + fmt(tail / tail_n) + " (last-epoch mean, " + fmt(100 * ratio, 3) +
                     "% of initial, need < 30%); SR " + fmt(sr) + " dB vs bilinear " + fmt(bl) + " dB (" +
                     (sr >= bl ? "+" : "") + fmt(sr - bl, 3) + " dB, need >= +1.0) on " +
                     std::to_string(f.samples.size()) + " images; training " + fmt(f.train_seconds) + " s");
}

Outcome penalty_efficacy(const Options& o) {
  const Fixture f = load_fixture(o);
  std::vector<Image> real, fake;
  for (const auto& s : f.samples) {
    real.push_back(s.targets.at(128));
    fake.push_back(f.model->nets.generator.generate(s.lr, s.attributes, 3).back());
  }
  const Tensor t = random_tensor({static_cast<int>(real.size()), 1, 1, 1}, 77, 0, 1);
  const Critic& critic = f.model->nets.critics[2];
  const Tensor norms = interpolated_gradient_norms([&](const Var& x) { return critic.adversarial(x); },
                                                   images_to_tensor(real), images_to_tensor(fake), t, false)
                           .value();
  const double m = norms.sum() / static_cast<double>(norms.size());
  // Context only: for paired real/fake at mean distance d the critic's best
  // slope under this penalty is 1 + d / (2 lambda).
  double d = 0.0;
  for (std::size_t i = 0; i < real.size(); ++i) {
    double sq = 0.0;
    for (std::size_t k = 0; k < real[i].pixels().size(); ++k) {
      const double e = real[i].pixels()[k] - fake[i].pixels()[k];
      sq += e * e;
    }
    d += std::sqrt(sq) / static_cast<double>(real.size());
  }
  const double lambda = f.model->config.weights.lambda;
  return verdict(m >= 0.5 && m <= 1.5, "stage-3 critic mean interpolated gradient norm " + fmt(m) + " over " +
                                           std::to_string(norms.size()) + " pairs (need [0.5, 1.5]); mean real-fake "
                                           "distance " + fmt(d) + ", 1 + d/(2 lambda) = " + fmt(1.0 + d / (2.0 * lambda)));
}

Outcome classifier_sanity(const Options&) {
  const int k = attribute_index("Pale");
  const BrightnessSet train = make_brightness_set(2000, k, 16);
  const BrightnessSet held_out = make_brightness_set(500, k, 17);
  // Default architecture and batch. The lr was picked on a separate validation
  // draw (seed 19); the held-out set below never took part in that choice.
  const TrainConfig defaults;
  constexpr double kLr = 5e-4;
  AttributeClassifier clf(defaults.classifier, 18);
  const double acc = train_brightness_classifier(clf, train, held_out, k, 500, defaults.batch_size, kLr);
  return verdict(acc > 0.95, "held-out accuracy " + fmt(100 * acc, 4) + "% after 500 steps (batch " +
                                 std::to_string(defaults.batch_size) + ", lr " + fmt(kLr) + "; need > 95%)");
}

Outcome attribute_sensitivity(const Options& o) {
  const Fixture f = load_fixture(o);
  const Generator& g = f.model->nets.generator;
  double smallest = 1e9;
  std::string where;
  for (const auto& s : f.samples) {
    const Image base = g.generate(s.lr, s.attributes, 3).back().clamped();
    for (int i = 0; i < kNumAttributes; ++i) {
      AttributeVector a = s.attributes;
      a[i] = 1.0 - a[i];
      const double d = mean_abs_diff(g.generate(s.lr, a, 3).back().clamped(), base);
      if (d < smallest) {
        smallest = d;
        where = s.id + "/" + std::string(kAttributeNames[static_cast<std::size_t>(i)]);
      }
    }
  }
  const double gt = evaluate(*f.model, f.samples, AttributeSource::ground_truth).mean.psnr_db;
  const double clf = evaluate(*f.model, f.samples, AttributeSource::classifier).mean.psnr_db;
  return verdict(smallest > 1e-4 && gt >= clf,
                 "smallest single-flip change " + fmt(smallest) + " at " + where + " (need > 1e-4); PSNR with true "
                     "attributes " + fmt(gt, 6) + " dB vs classifier attributes " + fmt(clf, 6) + " dB (need gt >= "
                     "classifier)");
}

Outcome resumability(const Options& o) {
  const fs::path dir = o.work / "resume";
  fs::remove_all(dir);
  const auto samples = synthetic_samples(16, 4);
  TrainConfig c = tiny_train_config();
  c.stage_epochs = {1, 1, 1};
  c.checkpoint_every = 6;
  c.output_dir = (dir / "full").string();
  const TrainingResult full = run_training(c, samples);
  c.output_dir = (dir / "resumed").string();
  const TrainingResult resumed = run_training(c, samples, dir / "full" / "step6.ckpt");

  bool same = resumed.log.size() + 6 == full.log.size();
  for (std::size_t i = 0; same && i < resumed.log.size(); ++i) {
    same = resumed.log[i].step == full.log[i + 6].step && resumed.log[i].components == full.log[i + 6].components;
  }
  const Checkpoint a = read_checkpoint(full.final_checkpoint);
  const Checkpoint b = read_checkpoint(resumed.final_checkpoint);
  bool weights = a.arrays.size() == b.arrays.size();
  for (const auto& [n, t] : a.arrays) weights &= b.arrays.count(n) && b.arrays.at(n).storage() == t.storage();
  return verdict(same && weights, "resumed at step 6 of " + std::to_string(full.log.size()) + " (mid stage 2): " +
                                      (same ? "loss components bitwise identical" : "loss trace DIFFERS") + ", final weights " +
                                      (weights ? "bitwise identical" : "DIFFER"));
}

struct Criterion {
  const char* name;
  Outcome (*run)(const Options&);
};

const Criterion kCriteria[] = {
    {"metric_oracle", metric_oracle},
    {"bilinear_celeba", bilinear_celeba},
    {"shape_recursion", shape_recursion},
    {"gradient_checks", gradient_checks},
    {"gp_fixed_points", gp_fixed_points},
    {"overfit", overfit},
    {"penalty_efficacy", penalty_efficacy},
    {"classifier_sanity", classifier_sanity},
    {"attribute_sensitivity", attribute_sensitivity},
    {"resumability", resumability},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Acceptance criteria");
  Options opt;
  std::vector<std::string> names;
  app.add_option("criteria", names, "criteria to run (default: all), or prepare_fixture");
  app.add_option("--work", opt.work, "scratch directory for fixtures");
  app.add_option("--config", opt.config, "overfit fixture training config")->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);
  opt.work = fs::absolute(opt.work);

  if (names.size() == 1 && names[0] == "prepare_fixture") {
    try {
      const Outcome r = prepare_fixture(opt);
      std::cout << "READY fixture: " << r.detail << std::endl;
      return 0;
    } catch (const std::exception& e) {
      std::cout << "ERROR fixture: " << e.what() << std::endl;
      return 1;
    }
  }
  if (names.empty())
    for (const auto& c : kCriteria) names.emplace_back(c.name);

  bool any_fail = false, all_skip = true;
  for (const auto& n : names) {
    const Criterion* c = nullptr;
    for (const auto& k : kCriteria)
      if (n == k.name) c = &k;
    Outcome r{Status::fail, "unknown criterion"};
    if (c) {
      try {
        r = c->run(opt);
      } catch (const std::exception& e) {
        r = {Status::fail, std::string("error: ") + e.what()};
      }
    }
    const char* tag = r.status == Status::pass ? "PASS" : r.status == Status::fail ? "FAIL" : "SKIP";
    std::cout << tag << ' ' << n << ": " << r.detail << std::endl;
    any_fail |= r.status == Status::fail;
    all_skip &= r.status == Status::skip;
  }
  if (any_fail) return 1;
  return all_skip ? 77 : 0;
}
