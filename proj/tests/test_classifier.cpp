#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fh/classifier.hpp"
#include "fh/losses.hpp"
#include "test_support.hpp"

using namespace fh;
using namespace fh::testing;

namespace {

Tensor binary_labels(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<AttributeVector> v;
  for (int i = 0; i < n; ++i) v.push_back(sample_random_attributes(rng));
  return attributes_to_tensor(v);
}

double loss_of(const Tensor& pred, const Tensor& truth) { return classifier_loss(constant(pred), constant(truth)).item(); }

}  // namespace

TEST_CASE("classifier outputs twelve probabilities and is deterministic") {
  const AttributeClassifier clf({8}, 3);
  const Image lr = random_image(16, 16, 4);
  const AttributeVector a = clf.classify(lr);
  for (double p : a.values) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  CHECK(clf.classify(lr) == a);
  CHECK(AttributeClassifier({8}, 3).classify(lr) == a);
  CHECK(clf.forward(constant(random_tensor({5, 3, 16, 16}, 5, 0, 1))).shape() == Shape{5, 12, 1, 1});
  CHECK_THROWS_AS((void)clf.classify(random_image(32, 32, 6)), std::invalid_argument);
  CHECK_THROWS_AS(AttributeClassifier({0}, 1), std::invalid_argument);
}

TEST_CASE("classifier loss closed forms") {
  const Tensor truth = binary_labels(3, 7);
  // 12 ln 2 per sample.
  CHECK(loss_of(Tensor({3, 12, 1, 1}, 0.5), truth) == doctest::Approx(12.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(loss_of(Tensor({3, 12, 1, 1}, 0.5), truth) == doctest::Approx(8.3178).epsilon(1e-4));

  // pred == truth: every log is clamped at 1 - eps.
  const double exact = loss_of(truth, truth);
  CHECK(exact >= 0.0);
  CHECK(exact == doctest::Approx(-12.0 * std::log(1.0 - kLogEps)).epsilon(1e-9));
  CHECK(exact < 1e-5);

  Tensor flipped = truth;
  for (auto& v : flipped.storage()) v = 1.0 - v;
  CHECK(loss_of(flipped, truth) == doctest::Approx(12.0 * std::log(1.0 / kLogEps)).epsilon(1e-6));

  Tensor bad = truth;
  bad[4] = 1.2;
  CHECK_THROWS_AS(loss_of(bad, truth), std::invalid_argument);
  bad[4] = -0.1;
  CHECK_THROWS_AS(loss_of(bad, truth), std::invalid_argument);
  CHECK_THROWS_AS(loss_of(Tensor({3, 11, 1, 1}, 0.5), truth), std::invalid_argument);
}

TEST_CASE("classifier loss is non-negative and minimal at the truth") {
  const Tensor truth = binary_labels(4, 8);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Tensor pred = random_tensor({4, 12, 1, 1}, 100 + s, 0.01, 0.99);
    CHECK(loss_of(pred, truth) >= 0.0);
    CHECK(loss_of(pred, truth) > loss_of(truth, truth));
  }
}

TEST_CASE("classifier loss gradient matches finite differences") {
  const Tensor truth = binary_labels(3, 9);
  const Tensor p0 = random_tensor({3, 12, 1, 1}, 10, 0.05, 0.95);
  Var p(p0, true);
  const Tensor g = grad(classifier_loss(p, constant(truth)), {p})[0].value();
  Tensor probe = p0;
  const auto r = check_gradient(probe, g, [&] { return loss_of(probe, truth); }, {}, 1e-5);
  CHECK(r.relative < 1e-3);
}

TEST_CASE("classifier loss ignores batch order") {
  const Tensor truth = binary_labels(5, 11);
  const Tensor pred = random_tensor({5, 12, 1, 1}, 12, 0.01, 0.99);
  const int order[5] = {3, 0, 4, 1, 2};
  Tensor tp(truth.shape()), pp(pred.shape());
  for (int n = 0; n < 5; ++n)
    for (int c = 0; c < 12; ++c) {
      tp[n * 12 + c] = truth[order[n] * 12 + c];
      pp[n * 12 + c] = pred[order[n] * 12 + c];
    }
  CHECK(loss_of(pp, tp) == doctest::Approx(loss_of(pred, truth)).epsilon(1e-12));
}

TEST_CASE("classifier parameter gradients match finite differences") {
  AttributeClassifier clf({4}, 13);
  const Tensor lr = random_tensor({2, 3, 16, 16}, 14, 0, 1);
  const Tensor truth = binary_labels(2, 15);
  auto probe = [&] { return classifier_loss(clf.forward(constant(lr)), constant(truth)); };
  const auto params = clf.store().params();
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

TEST_CASE("classifier learns a brightness attribute") {
  const int k = attribute_index("Pale");
  const BrightnessSet train = make_brightness_set(400, k, 16);
  const BrightnessSet held_out = make_brightness_set(200, k, 17);
  AttributeClassifier clf({8}, 18);
  const double before = brightness_accuracy(clf, held_out, k);
  const double after = train_brightness_classifier(clf, train, held_out, k, 300);
  MESSAGE("held-out accuracy " << before << " -> " << after);
  CHECK(after > 0.95);
}
