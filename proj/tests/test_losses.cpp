#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fh/feature_extractor.hpp"
#include "fh/losses.hpp"
#include "test_support.hpp"

using namespace fh;
using namespace fh::testing;

namespace {

double value(const Var& v) { return v.item(); }

Tensor binary_labels(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<AttributeVector> v;
  for (int i = 0; i < n; ++i) v.push_back(sample_random_attributes(rng));
  return attributes_to_tensor(v);
}

// Critic whose adversarial head is silenced to a constant.
Critic flat_critic(int stage, double level) {
  Critic c({stage, 4, 16}, 21);
  for (auto& [name, v] : c.store().named_tensors()) {
    Var p = v;
    if (name == "adv.weight") p.mutable_value().storage().assign(p.value().size(), 0.0);
    if (name == "adv.bias") p.mutable_value().storage().assign(1, level);
  }
  return c;
}

struct GenRig {
  int stage;
  Critic critic;
  std::unique_ptr<FeatureExtractor> extractor;
  Tensor gt_out, rand_out, target, rand_attrs;

  explicit GenRig(int s, std::uint64_t seed = 1)
      : stage(s), critic({s, 4, 16}, seed), extractor(make_extractor({2, 5, ""})) {
    const int r = 16 << s;
    gt_out = random_tensor({2, 3, r, r}, seed + 1, 0, 1);
    rand_out = random_tensor({2, 3, r, r}, seed + 2, 0, 1);
    target = random_tensor({2, 3, r, r}, seed + 3, 0, 1);
    rand_attrs = binary_labels(2, seed + 4);
  }

  [[nodiscard]] LossBreakdown run(const LossWeights& w, const Critic* c = nullptr) const {
    return generator_loss({stage, constant(gt_out), constant(rand_out), constant(target), constant(rand_attrs),
                           c ? c : &critic, extractor.get()},
                          w);
  }
};

struct CriticRig {
  Critic critic;
  Tensor real, fake, attrs, t;

  explicit CriticRig(std::uint64_t seed = 1) : critic({1, 4, 16}, seed) {
    real = random_tensor({3, 3, 32, 32}, seed + 1, 0, 1);
    fake = random_tensor({3, 3, 32, 32}, seed + 2, 0, 1);
    attrs = binary_labels(3, seed + 3);
    t = random_tensor({3, 1, 1, 1}, seed + 4, 0, 1);
  }

  [[nodiscard]] LossBreakdown run(const LossWeights& w, const Critic* c = nullptr) const {
    return critic_loss({1, real, fake, constant(attrs), t, c ? c : &critic}, w);
  }
};

double recombined(const LossBreakdown& b, const std::string& skip = "") {
  double total = 0.0;
  bool first = true;
  for (const auto& term : b.terms) {
    if (term.name == skip) continue;
    const double w = term.raw.item() * term.weight;
    total = first ? w : total + w;
    first = false;
  }
  return total;
}

}  // namespace

TEST_CASE("pixel l1 closed forms") {
  const Tensor a = random_tensor({2, 3, 8, 8}, 1, 0, 1);
  CHECK(value(l1_pixel_loss(constant(a), constant(a))) == 0.0);
  CHECK(value(l1_pixel_loss(constant(Tensor({2, 3, 8, 8}, 0.0)), constant(Tensor({2, 3, 8, 8}, 1.0)))) == 1.0);
  Tensor shifted = a;
  for (auto& v : shifted.storage()) v += 0.25;
  CHECK(value(l1_pixel_loss(constant(shifted), constant(a))) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(l1_pixel_loss(constant(a), constant(Tensor({2, 3, 8, 4}))), std::invalid_argument);
}

TEST_CASE("attribute bce closed forms and monotonicity") {
  const Tensor truth = binary_labels(2, 2);
  CHECK(value(attribute_bce(constant(Tensor({2, 12, 1, 1}, 0.5)), constant(truth))) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(value(attribute_bce(constant(truth), constant(truth))) < 1e-6);

  Tensor p = random_tensor({2, 12, 1, 1}, 3, 0.1, 0.9);
  for (std::size_t i : {0u, 5u, 17u}) {
    const double before = value(attribute_bce(constant(p), constant(truth)));
    Tensor moved = p;
    moved[i] += (truth[i] - moved[i]) * 0.3;
    CHECK(value(attribute_bce(constant(moved), constant(truth))) < before);
  }

  // Saturated predictions stay finite under the clamp.
  Tensor wrong = truth;
  for (auto& v : wrong.storage()) v = 1.0 - v;
  CHECK(std::isfinite(value(attribute_bce(constant(wrong), constant(truth)))));
  Tensor out = truth;
  out[3] = 1.5;
  CHECK_THROWS_AS(attribute_bce(constant(out), constant(truth)), std::invalid_argument);
}

TEST_CASE("l1 and bce gradients match finite differences") {
  const Tensor target = random_tensor({2, 3, 6, 6}, 4, 0, 1);
  // Every entry at least 0.05 from its target, clear of the |x| kink.
  Tensor x0 = random_tensor({2, 3, 6, 6}, 5, 0.05, 0.5);
  for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = target[i] + (i % 2 ? x0[i] : -x0[i]);
  {
    Var x(x0, true);
    const Tensor g = grad(l1_pixel_loss(x, constant(target)), {x})[0].value();
    Tensor probe = x0;
    CHECK(check_gradient(probe, g, [&] { return value(l1_pixel_loss(constant(probe), constant(target))); }).relative <
          1e-2);
  }
  const Tensor labels = random_tensor({2, 12, 1, 1}, 6, 0, 1);
  const Tensor p0 = random_tensor({2, 12, 1, 1}, 7, 0.05, 0.95);
  {
    Var p(p0, true);
    const Tensor g = grad(attribute_bce(p, constant(labels)), {p})[0].value();
    Tensor probe = p0;
    CHECK(check_gradient(probe, g, [&] { return value(attribute_bce(constant(probe), constant(labels))); }).relative <
          1e-2);
  }
}

TEST_CASE("perceptual distance") {
  const auto ex = make_extractor({2, 5, ""});
  const Tensor a = random_tensor({1, 3, 128, 128}, 8, 0, 1);
  const Tensor b = random_tensor({1, 3, 128, 128}, 9, 0, 1);
  CHECK(value(perceptual_loss(constant(a), constant(a), *ex)) == 0.0);
  const double ab = value(perceptual_loss(constant(a), constant(b), *ex));
  CHECK(ab == value(perceptual_loss(constant(b), constant(a), *ex)));
  CHECK(ab > 0.0);

  // Features pulled once, distance by hand.
  const Tensor fa = ex->features(constant(a)).value();
  const Tensor fb = ex->features(constant(b)).value();
  double acc = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) acc += (fa[i] - fb[i]) * (fa[i] - fb[i]);
  CHECK(ab == doctest::Approx(acc / static_cast<double>(fa.size())).epsilon(1e-5));
  // Frozen: weights are buffers, nothing trainable.
  const VggExtractor vgg({2, 5, ""});
  CHECK(vgg.store().params().empty());
  CHECK_FALSE(vgg.store().named_tensors().empty());
}

TEST_CASE("generator loss terms by stage") {
  for (int stage = 1; stage <= 3; ++stage) {
    const GenRig rig(stage);
    const LossBreakdown b = rig.run(LossWeights{});
    CHECK(b.find("adv") != nullptr);
    CHECK(b.find("l1") != nullptr);
    CHECK(b.find("attr") != nullptr);
    CHECK((b.find("perceptual") != nullptr) == (stage == 3));
    CHECK(b.total.item() == doctest::Approx(recombined(b)).epsilon(1e-6));
    CHECK(std::isfinite(b.total.item()));
  }
  const GenRig rig(2);
  const Critic wrong({1, 4, 16}, 3);
  CHECK_THROWS_AS(rig.run(LossWeights{}, &wrong), std::invalid_argument);
  LossWeights negative;
  negative.beta = -1.0;
  CHECK_THROWS_AS(rig.run(negative), std::invalid_argument);
}

TEST_CASE("generator loss with only alpha at the target is zero") {
  GenRig rig(3);
  rig.gt_out = rig.target;
  const Critic silent = flat_critic(3, 0.0);
  const LossBreakdown b = rig.run({100.0, 0.0, 0.0, 10.0}, &silent);
  CHECK(b.total.item() == 0.0);
}

TEST_CASE("zeroing one weight removes exactly that term") {
  const GenRig g(3);
  const LossBreakdown full = g.run(LossWeights{});
  const std::pair<std::string, double LossWeights::*> gen_terms[] = {
      {"l1", &LossWeights::alpha}, {"attr", &LossWeights::beta}, {"perceptual", &LossWeights::gamma}};
  for (const auto& [name, field] : gen_terms) {
    CAPTURE(name);
    LossWeights w;
    w.*field = 0.0;
    const LossBreakdown z = g.run(w);
    for (const auto& term : full.terms) CHECK(z.raw(term.name) == term.raw.item());
    CHECK(z.total.item() == recombined(full, name));
  }

  const CriticRig c;
  const LossBreakdown cfull = c.run(LossWeights{});
  LossWeights w;
  w.lambda = 0.0;
  const LossBreakdown z = c.run(w);
  for (const auto& term : cfull.terms) CHECK(z.raw(term.name) == term.raw.item());
  CHECK(z.total.item() == recombined(cfull, "gp"));
}

TEST_CASE("critic loss bookkeeping") {
  const CriticRig rig;
  const LossBreakdown b = rig.run(LossWeights{});
  for (const char* n : {"wasserstein", "attr_real", "attr_fake", "gp"}) CHECK(b.find(n) != nullptr);
  CHECK(b.total.item() == doctest::Approx(recombined(b)).epsilon(1e-6));
  CHECK(b.find("gp")->weight == 10.0);
  CHECK(b.raw("gp") == doctest::Approx(gradient_penalty(rig.critic, rig.real, rig.fake, rig.t, 1.0).item()).epsilon(1e-12));

  const Critic flat = flat_critic(1, 0.7);
  CHECK(rig.run(LossWeights{}, &flat).raw("wasserstein") == 0.0);
  // Constant scores carry no input gradient: the raw penalty is (0 - 1)^2.
  CHECK(rig.run(LossWeights{}, &flat).raw("gp") == 1.0);

  const Critic wrong({2, 4, 16}, 1);
  CHECK_THROWS_AS(rig.run(LossWeights{}, &wrong), std::invalid_argument);
}

TEST_CASE("raising the fake score lowers the generator term and raises the critic term") {
  GenRig g(1, 30);
  const Var x(g.rand_out, true);
  const Tensor up = grad(mean(g.critic.adversarial(x)), {x})[0].value();
  Tensor better = g.rand_out;
  for (std::size_t i = 0; i < better.size(); ++i) better[i] += 0.5 * up[i];
  const double before = mean(g.critic.adversarial(constant(g.rand_out))).item();
  const double after = mean(g.critic.adversarial(constant(better))).item();
  REQUIRE(after > before);

  const double gen_before = g.run(LossWeights{}).raw("adv");
  CriticRig c;
  c.critic = g.critic;
  c.real = g.target;
  c.fake = g.rand_out;
  c.attrs = g.rand_attrs;
  c.t = random_tensor({2, 1, 1, 1}, 31, 0, 1);
  const double wass_before = c.run(LossWeights{}).raw("wasserstein");
  g.rand_out = better;
  c.fake = better;
  CHECK(g.run(LossWeights{}).raw("adv") < gen_before);
  CHECK(c.run(LossWeights{}).raw("wasserstein") > wass_before);
  CHECK(g.run(LossWeights{}).raw("adv") - gen_before == doctest::Approx(-(after - before)).epsilon(1e-9));
  CHECK(c.run(LossWeights{}).raw("wasserstein") - wass_before == doctest::Approx(after - before).epsilon(1e-9));
}

TEST_CASE("generator loss gradient in its inputs matches finite differences") {
  const GenRig g(1, 40);
  Var gt(g.gt_out, true), rnd(g.rand_out, true);
  auto total = [&](const Var& a, const Var& b) {
    return generator_loss({1, a, b, constant(g.target), constant(g.rand_attrs), &g.critic, nullptr}, LossWeights{}).total;
  };
  const auto grads = grad(total(gt, rnd), {gt, rnd});
  Tensor pa = g.gt_out, pb = g.rand_out;
  const auto idx = spread_indices(pa.size(), 24, 41);
  const auto ra = check_gradient(pa, grads[0].value(), [&] { return total(constant(pa), constant(pb)).item(); }, idx);
  const auto rb = check_gradient(pb, grads[1].value(), [&] { return total(constant(pa), constant(pb)).item(); }, idx);
  std::vector<double> a = ra.analytic, n = ra.numeric;
  a.insert(a.end(), rb.analytic.begin(), rb.analytic.end());
  n.insert(n.end(), rb.numeric.begin(), rb.numeric.end());
  CHECK(relative_error(a, n) < 1e-2);
}
