#pragma once

#include <cstdint>
#include <vector>

#include "nhdp/dataset.hpp"

namespace nhdp {

// Total variation distance between two discrete distributions on the same
// support: 0.5 * sum |p_i - q_i|. Each input must sum to 1 within 1e-9.
double tv_distance(const std::vector<double>& p, const std::vector<double>& q);

// Output of either generator: the observations plus everything needed to
// score recovery afterwards.
struct SynthData {
  TwoLevelDataset data;
  std::vector<int> true_gamma_l;    // group-level truth, canonical labels
  std::vector<int> true_gamma_h;    // unit-level truth, canonical labels
  std::vector<double> true_theta;   // per unit: mean of its generating component
  std::vector<double> true_phi;     // per group: mean of its generating mixture
  std::vector<double> holdout;      // second-framework replicate draws (empty otherwise)
  // Second framework only: the accepted per-restaurant mixing vectors, one row
  // per occupied restaurant in true_gamma_l label order.
  std::vector<std::vector<double>> mixture_weights;
};

// First framework: six fixed Gaussian components at
// (-6.25, -3.75, -1.25, 1.25, 3.75, 6.25) with sd 0.5, and six fixed mixing
// vectors over them. Each group is assigned one of the six mixtures; units
// draw a component from their group's mixture. The mixture assignment uses
// its own RNG stream so the group-level truth is identical across
// units_per_group settings at a fixed seed.
struct Framework1Config {
  int n_groups = 25;
  int units_per_group = 50;
  std::uint64_t seed = 1;
};
SynthData gen_framework1(const Framework1Config& cfg);

// The six mixing vectors (rows) over the six components, exposed for tests.
const std::vector<std::vector<double>>& framework1_weights();
const std::vector<double>& framework1_means();

// Second framework: weights drawn from the model itself by truncated
// stick-breaking. Restaurant weights Beta(1, alpha2) truncated at n_groups
// atoms; base weights Beta(1, alpha0) truncated at the unit count; each
// occupied restaurant's unit-level weights by hierarchical sticks
// Beta(alpha1 b_k, alpha1 (1 - sum_{l<=k} b_l)), every truncation closed by
// assigning the leftover mass to the final atom. Draws are rejected until all
// pairwise total variation distances between occupied restaurant weight
// vectors exceed min_tv. Atom locations are evenly spaced with gap
// kappa * sigma, centered at zero, over the atoms actually occupied. Each
// unit also gets an independent holdout replicate from its component.
struct Framework2Config {
  int n_groups = 10;
  int units_per_group = 10;
  double alpha0 = 1.0, alpha1 = 1.0, alpha2 = 1.0;
  double kappa = 5.0;
  double sigma = 0.5;
  double min_tv = 0.8;
  long max_attempts = 100000;
  std::uint64_t seed = 1;
};
SynthData gen_framework2(const Framework2Config& cfg);

}  // namespace nhdp
