#pragma once

#include <string>
#include <vector>

#include "fh/critic.hpp"
#include "fh/feature_extractor.hpp"

namespace fh {

inline constexpr double kLogEps = 1e-7;

struct LossWeights {
  double alpha = 100.0;  // pixel l1
  double beta = 10.0;    // attribute
  double gamma = 0.1;    // perceptual
  double lambda = 10.0;  // gradient penalty

  void validate() const;
};

/// Mean absolute difference over every element.
Var l1_pixel_loss(const Var& pred, const Var& target);

/// Binary cross entropy averaged over attributes and batch, logs clamped at kLogEps.
Var attribute_bce(const Var& pred, const Var& target);

/// Binary cross entropy summed over attributes, averaged over the batch.
Var classifier_loss(const Var& pred, const Var& truth);

/// Mean squared difference of extractor features.
Var perceptual_loss(const Var& pred, const Var& target, const FeatureExtractor& extractor);

struct LossTerm {
  std::string name;
  Var raw;
  double weight = 1.0;
};

/// Named components; total is the weighted sum in term order.
struct LossBreakdown {
  std::vector<LossTerm> terms;
  Var total;

  [[nodiscard]] const LossTerm* find(const std::string& name) const;
  [[nodiscard]] double raw(const std::string& name) const;
};

struct GeneratorLossInputs {
  int stage = 1;
  Var output_gt_attrs;    // G_i(lr, a)
  Var output_rand_attrs;  // G_i(lr, a*)
  Var target;
  Var random_attrs;  // a*
  const Critic* critic = nullptr;
  const FeatureExtractor* extractor = nullptr;  // required at stage 3 when gamma > 0
};

/// Terms: adv, l1, attr and, at stage 3 only, perceptual.
LossBreakdown generator_loss(const GeneratorLossInputs& in, const LossWeights& w);

struct CriticLossInputs {
  int stage = 1;
  Tensor real;
  Tensor fake;  // detached generator output
  Var attrs;    // ground-truth labels of the real batch
  Tensor t;     // [N,1,1,1] interpolation weights
  const Critic* critic = nullptr;
};

/// Terms: wasserstein, attr_real, attr_fake, gp (raw penalty, weight lambda).
LossBreakdown critic_loss(const CriticLossInputs& in, const LossWeights& w);

}  // namespace fh
