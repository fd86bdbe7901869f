#pragma once

#include <array>
#include <optional>
#include <stdexcept>

namespace nhdp {

// Truncated-normal prior on a concentration parameter (support x > 0).
struct TruncNormalPrior {
  double mean = 2.0;
  double sd = 1.0;
};

// Inverse-gamma prior on the observation variance: shape beta0, scale beta1.
struct InvGammaPrior {
  double beta0 = 5.0;
  double beta1 = 1.0;
};

// Which concentration parameter an update targets. alpha0 governs the dish
// level (how tables share dishes), alpha1 the table level (customers within
// a restaurant), alpha2 the restaurant level (groups into restaurants).
enum class AlphaIndex { alpha0 = 0, alpha1 = 1, alpha2 = 2 };

// Model hyperparameters. A parameter with a prior attached is sampled inside
// the chain; without one it stays fixed at the given value.
struct Hyperparams {
  double alpha0 = 1.0;
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  // One prior per concentration, in AlphaIndex order, or absent for all-fixed.
  std::optional<std::array<TruncNormalPrior, 3>> alpha_prior;

  double sigma2 = 1.0;
  std::optional<InvGammaPrior> sigma2_prior;

  // Prior precision ratio of the cluster-mean prior N(0, sigma2 / k0).
  double k0 = 1.0;

  double alpha(AlphaIndex which) const {
    switch (which) {
      case AlphaIndex::alpha0: return alpha0;
      case AlphaIndex::alpha1: return alpha1;
      default: return alpha2;
    }
  }

  void set_alpha(AlphaIndex which, double v) {
    switch (which) {
      case AlphaIndex::alpha0: alpha0 = v; break;
      case AlphaIndex::alpha1: alpha1 = v; break;
      default: alpha2 = v; break;
    }
  }

  void check() const {
    if (!(alpha0 > 0.0) || !(alpha1 > 0.0) || !(alpha2 > 0.0))
      throw std::invalid_argument("hyperparams: concentrations must be positive");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("hyperparams: sigma2 must be positive");
    if (!(k0 > 0.0)) throw std::invalid_argument("hyperparams: k0 must be positive");
    if (sigma2_prior && (!(sigma2_prior->beta0 > 0.0) || !(sigma2_prior->beta1 > 0.0)))
      throw std::invalid_argument("hyperparams: inverse-gamma prior parameters must be positive");
    if (alpha_prior) {
      for (const auto& p : *alpha_prior)
        if (!(p.sd > 0.0))
          throw std::invalid_argument("hyperparams: truncated-normal prior sd must be positive");
    }
  }
};

// Elicited defaults for real crime-density runs: sigma2 prior with mean 0.25
// and sd 0.1, tight cluster-mean prior, truncated-normal priors on all
// concentrations.
inline Hyperparams real_data_defaults() {
  Hyperparams hp;
  hp.alpha0 = 1.0;
  hp.alpha1 = 1.0;
  hp.alpha2 = 1.0;
  hp.alpha_prior = std::array<TruncNormalPrior, 3>{
      TruncNormalPrior{2.0, 1.0}, TruncNormalPrior{2.0, 1.0}, TruncNormalPrior{2.0, 1.0}};
  hp.sigma2 = 0.25;
  hp.sigma2_prior = InvGammaPrior{8.25, 1.8125};
  hp.k0 = 0.1;
  return hp;
}

// Defaults used by the simulation studies: concentrations fixed at
// (alpha0, alpha1, alpha2) = (1, 0.5, 1), diffuse sigma2 prior, k0 = 1/100.
inline Hyperparams simulation_defaults() {
  Hyperparams hp;
  hp.alpha0 = 1.0;
  hp.alpha1 = 0.5;
  hp.alpha2 = 1.0;
  hp.sigma2 = 0.25;
  hp.sigma2_prior = InvGammaPrior{5.0, 1.0};
  hp.k0 = 0.01;
  return hp;
}

}  // namespace nhdp
