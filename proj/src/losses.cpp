#include "fh/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "fh/attributes.hpp"

namespace fh {
namespace {

void same_shape(const Var& a, const Var& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(what) + ": shapes " + a.shape().str() + " and " + b.shape().str() +
                                " differ");
  }
}

// NaN passes through so a diverged network shows up as a non-finite loss.
void check_probabilities(const Var& p, const char* what) {
  for (double v : p.value().span()) {
    if (v < 0.0 || v > 1.0) {
      throw std::invalid_argument(std::string(what) + ": prediction " + std::to_string(v) + " is outside [0,1]");
    }
  }
}

// Elementwise -[t log p + (1 - t) log(1 - p)] with clamped logs.
Var bce_elements(const Var& pred, const Var& target, const char* what) {
  same_shape(pred, target, what);
  check_probabilities(pred, what);
  Var p = clamp(pred, kLogEps, 1.0 - kLogEps);
  Var pos = mul(target, log(p));
  Var negative = mul(add_scalar(neg(target), 1.0), log(add_scalar(neg(p), 1.0)));
  return neg(add(pos, negative));
}

Var weighted_total(const std::vector<LossTerm>& terms) {
  Var total;
  for (const auto& t : terms) {
    Var w = scale(t.raw, t.weight);
    total = total.defined() ? add(total, w) : w;
  }
  return total;
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {alpha, beta, gamma, lambda}) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("loss weights must be finite and non-negative");
  }
}

Var l1_pixel_loss(const Var& pred, const Var& target) {
  same_shape(pred, target, "l1_pixel_loss");
  return mean(abs(sub(pred, target)));
}

Var attribute_bce(const Var& pred, const Var& target) { return mean(bce_elements(pred, target, "attribute_bce")); }

Var classifier_loss(const Var& pred, const Var& truth) {
  Var e = bce_elements(pred, truth, "classifier_loss");
  return scale(mean(e), static_cast<double>(e.shape().c * e.shape().h * e.shape().w));
}

Var perceptual_loss(const Var& pred, const Var& target, const FeatureExtractor& extractor) {
  same_shape(pred, target, "perceptual_loss");
  Var d = sub(extractor.features(pred), extractor.features(target));
  return mean(mul(d, d));
}

const LossTerm* LossBreakdown::find(const std::string& name) const {
  for (const auto& t : terms) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

double LossBreakdown::raw(const std::string& name) const {
  const LossTerm* t = find(name);
  if (!t) throw std::out_of_range("no loss term " + name);
  return t->raw.item();
}

LossBreakdown generator_loss(const GeneratorLossInputs& in, const LossWeights& w) {
  w.validate();
  if (!in.critic) throw std::invalid_argument("generator_loss needs a critic");
  if (in.critic->config().stage != in.stage) {
    throw std::invalid_argument("generator_loss: stage " + std::to_string(in.stage) + " paired with the stage-" +
                                std::to_string(in.critic->config().stage) + " critic");
  }
  same_shape(in.output_gt_attrs, in.target, "generator_loss");
  same_shape(in.output_gt_attrs, in.output_rand_attrs, "generator_loss");

  CriticOutput d = in.critic->forward(in.output_rand_attrs);
  LossBreakdown out;
  out.terms.push_back({"adv", neg(mean(d.adv)), 1.0});
  out.terms.push_back({"l1", l1_pixel_loss(in.output_gt_attrs, in.target), w.alpha});
  out.terms.push_back({"attr", attribute_bce(d.attr, in.random_attrs), w.beta});
  if (in.stage == 3) {
    if (!in.extractor) throw std::invalid_argument("stage-3 generator loss needs a feature extractor");
    out.terms.push_back({"perceptual", perceptual_loss(in.output_gt_attrs, in.target, *in.extractor), w.gamma});
  }
  out.total = weighted_total(out.terms);
  return out;
}

LossBreakdown critic_loss(const CriticLossInputs& in, const LossWeights& w) {
  w.validate();
  if (!in.critic) throw std::invalid_argument("critic_loss needs a critic");
  if (in.critic->config().stage != in.stage) throw std::invalid_argument("critic_loss: stage/critic mismatch");
  if (in.real.shape() != in.fake.shape()) throw std::invalid_argument("critic_loss: real and fake shapes differ");

  CriticOutput real = in.critic->forward(constant(in.real));
  CriticOutput fake = in.critic->forward(constant(in.fake));
  LossBreakdown out;
  out.terms.push_back({"wasserstein", neg(sub(mean(real.adv), mean(fake.adv))), 1.0});
  out.terms.push_back({"attr_real", attribute_bce(real.attr, in.attrs), 1.0});
  out.terms.push_back({"attr_fake", attribute_bce(fake.attr, in.attrs), 1.0});
  out.terms.push_back({"gp", gradient_penalty_raw([&](const Var& x) { return in.critic->adversarial(x); }, in.real,
                                                  in.fake, in.t),
                       w.lambda});
  out.total = weighted_total(out.terms);
  return out;
}

}  // namespace fh
