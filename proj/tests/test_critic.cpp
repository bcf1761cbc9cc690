#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fh/critic.hpp"
#include "fh/trainer.hpp"
#include "test_support.hpp"

using namespace fh;
using namespace fh::testing;

namespace {

CriticConfig tiny(int stage) { return {stage, 4, 16}; }

Tensor uniform_t(int n, std::uint64_t seed) { return random_tensor({n, 1, 1, 1}, seed, 0, 1); }

}  // namespace

TEST_CASE("critic heads have the documented shapes and ranges") {
  for (int stage = 1; stage <= 3; ++stage) {
    const Critic c(tiny(stage), static_cast<std::uint64_t>(stage));
    const int r = 16 << stage;
    const CriticOutput o = c.forward(constant(random_tensor({3, 3, r, r}, 1, 0, 1)));
    CHECK(o.adv.shape() == Shape{3, 1, 1, 1});
    CHECK(o.attr.shape() == Shape{3, 12, 1, 1});
    for (double p : o.attr.value().storage()) {
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
  }
  const Critic c1(tiny(1), 1);
  CHECK_THROWS_AS((void)c1.forward(constant(Tensor({1, 3, 64, 64}))), std::invalid_argument);
  CHECK_THROWS_AS(Critic({4, 4, 16}, 1), std::invalid_argument);
}

TEST_CASE("critic weights are reproducible from the seed") {
  const Critic a(tiny(3), 5), b(tiny(3), 5);
  const auto ta = a.store().named_tensors();
  const auto tb = b.store().named_tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(ta[i].second.value().storage() == tb[i].second.value().storage());
}

TEST_CASE("critic input gradient matches finite differences on a four-pixel probe") {
  const Critic c(tiny(1), 2);
  const Tensor x0 = random_tensor({1, 3, 32, 32}, 3, 0, 1);
  Var x(x0, true);
  const Tensor g = grad(sum(c.adversarial(x)), {x})[0].value();
  Tensor probe = x0;
  const std::vector<std::size_t> pixels = {0, 33 * 16 + 5, 1024 + 500, 2048 + 1023};
  const auto r = check_gradient(probe, g, [&] { return c.adversarial(constant(probe)).item(); }, pixels);
  CHECK(r.relative < 1e-2);
}

TEST_CASE("critic parameter gradients match finite differences") {
  Critic c(tiny(2), 4);
  const Tensor x = random_tensor({2, 3, 64, 64}, 5, 0, 1);
  const Tensor labels = random_tensor({2, 12, 1, 1}, 6, 0, 1);
  auto probe = [&] {
    const CriticOutput o = c.forward(constant(x));
    return add(mean(o.adv), mean(mul(o.attr, constant(labels))));
  };
  const auto params = c.store().params();
  const auto grads = grad(probe(), params);
  std::vector<double> a, n;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Var p = params[i];
    const auto idx = spread_indices(p.value().size(), 8, i);
    CHECK(check_gradient(p.mutable_value(), grads[i].value(), [&] { return probe().item(); }, idx, 1e-6).relative <
          1e-4);
    const auto r = check_gradient(p.mutable_value(), grads[i].value(), [&] { return probe().item(); }, idx, 1e-3);
    a.insert(a.end(), r.analytic.begin(), r.analytic.end());
    n.insert(n.end(), r.numeric.begin(), r.numeric.end());
  }
  CHECK(relative_error(a, n) < 1e-2);
}

TEST_CASE("gradient penalty fixed points") {
  const Tensor real = random_tensor({4, 3, 32, 32}, 7, 0, 1);
  const Tensor fake = random_tensor({4, 3, 32, 32}, 8, 0, 1);
  const Tensor t = uniform_t(4, 9);
  const double per_sample = 3.0 * 32 * 32;

  // sum(pixels) / sqrt(D): every input gradient has unit norm.
  const AdversarialFn unit = [&](const Var& x) { return scale(sample_sum(x), 1.0 / std::sqrt(per_sample)); };
  CHECK(gradient_penalty(unit, real, fake, t, 10.0).item() == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(std::abs(gradient_penalty(unit, real, fake, t, 10.0).item()) < 1e-12);

  const AdversarialFn flat = [](const Var& x) { return constant(Tensor({x.shape().n, 1, 1, 1}, 3.0)); };
  CHECK(gradient_penalty(flat, real, fake, t, 10.0).item() == 10.0);
  const AdversarialFn zeroed = [](const Var& x) { return scale(sample_sum(x), 0.0); };
  CHECK(gradient_penalty(zeroed, real, fake, t, 10.0).item() == 10.0);

  // Norm 2 everywhere: (2 - 1)^2 * lambda.
  const AdversarialFn twice = [&](const Var& x) { return scale(sample_sum(x), 2.0 / std::sqrt(per_sample)); };
  CHECK(gradient_penalty(twice, real, fake, t, 10.0).item() == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("interpolation endpoints and convexity") {
  const Tensor real = random_tensor({3, 3, 8, 8}, 10, 0, 1);
  const Tensor fake = random_tensor({3, 3, 8, 8}, 11, 0, 1);
  CHECK(interpolate(real, fake, Tensor({3, 1, 1, 1}, 1.0)).storage() == real.storage());
  CHECK(interpolate(real, fake, Tensor({3, 1, 1, 1}, 0.0)).storage() == fake.storage());
  const Tensor mid = interpolate(real, fake, uniform_t(3, 12));
  for (std::size_t i = 0; i < mid.size(); ++i) {
    CHECK(mid[i] >= std::min(real[i], fake[i]));
    CHECK(mid[i] <= std::max(real[i], fake[i]));
  }
}

TEST_CASE("gradient penalty is non-negative and differentiable in the critic weights") {
  Critic c(tiny(1), 13);
  const Tensor real = random_tensor({2, 3, 32, 32}, 14, 0, 1);
  const Tensor fake = random_tensor({2, 3, 32, 32}, 15, 0, 1);
  for (std::uint64_t s = 0; s < 5; ++s) CHECK(gradient_penalty(c, real, fake, uniform_t(2, s), 10.0).item() >= 0.0);

  const Tensor t = uniform_t(2, 16);
  const PenaltyCheck r = check_penalty_gradient(c, real, fake, t, 10.0, 6, 50, 1e-3);
  MESSAGE("kept " << r.kept << ", sign crossings " << r.crossing);
  CHECK(r.kept >= 2 * r.crossing);
  CHECK(relative_error(r.analytic, r.numeric) < 1e-2);
  CHECK_THROWS_AS(gradient_penalty(c, Tensor({2, 3, 64, 64}), Tensor({2, 3, 64, 64}), t, 10.0),
                  std::invalid_argument);
}

TEST_CASE("the three critics share no parameters") {
  TrainConfig cfg;
  cfg.critic_base_channels = 4;
  cfg.critic_max_channels = 16;
  cfg.generator.base_channels = 8;
  Networks nets(cfg);
  const Tensor x2 = random_tensor({1, 3, 64, 64}, 17, 0, 1);
  const Tensor x3 = random_tensor({1, 3, 128, 128}, 18, 0, 1);
  const double before2 = nets.critics[1].adversarial(constant(x2)).item();
  const double before3 = nets.critics[2].adversarial(constant(x3)).item();
  for (auto& p : nets.critics[0].store().params()) {
    Var v = p;
    for (auto& w : v.mutable_value().storage()) w += 0.5;
  }
  CHECK(nets.critics[1].adversarial(constant(x2)).item() == before2);
  CHECK(nets.critics[2].adversarial(constant(x3)).item() == before3);
}
