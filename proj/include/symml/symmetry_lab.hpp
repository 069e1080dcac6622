#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "symml/data.hpp"
#include "symml/features.hpp"
#include "symml/mlp.hpp"

namespace symml::lab {

// ---------------------------------------------------------------------------
// Group-summed utility over digit data

// Sum over samples of cross-entropy loss.
double dataset_loss(const Mlp& mlp, const FeatureMap& map, const Dataset& dataset);

// Omega = sum_i sum_{g in group} L(y_i, f(U(g) x_i)).
double symmetrized_loss(const Mlp& mlp, const FeatureMap& map, const Dataset& dataset,
                        std::span<const GroupElement> group);

// Every image has a negated twin with the same label (as a multiset).
bool is_inversion_closed(const Dataset& dataset);

// Copy with the first-layer weights negated, i.e. w -> w U(g) for U = -1.
Mlp flip_first_layer(const Mlp& mlp);

struct WeightFlipResult {
  double loss = 0.0;          // Omega(W1)
  double flipped_loss = 0.0;  // Omega(-W1)
  double deviation = 0.0;     // |Omega(W1) - Omega(-W1)| / Omega(W1)
};

// Unchecked measurement; works on any dataset.
WeightFlipResult weight_flip_deviation(const Mlp& mlp, const Dataset& dataset);

// The probe proper: requires a bias-free model and an inversion-closed dataset
// (PreconditionError otherwise). The network consumes raw pixels.
WeightFlipResult weight_orbit_invariance(const Mlp& mlp, const Dataset& symmetrized);

// Max over samples of |L(x) - L(-x)| for a model behind a feature map. Zero for
// every inversion-invariant map.
double max_inversion_loss_change(const Mlp& mlp, const FeatureMap& map, const Dataset& dataset);

struct SampledLossResult {
  double full_loss = 0.0;  // Omega
  double mu = 1.0;
  int trials = 0;
  double mean = 0.0;       // mean of the eta-weighted loss over trials
  double std_error = 0.0;  // of that mean
  double ratio = 0.0;      // mean / (mu * Omega)
  double z_score = 0.0;    // (mean - mu * Omega) / std_error, 0 when std_error is 0
  std::vector<double> trial_losses;
};

// Draws eta_{i,g} ~ Bernoulli(mu) independently per (sample, element) per trial.
// Requires 0 < mu <= 1 and trials >= 1.
SampledLossResult sampled_loss_expectation(const Mlp& mlp, const FeatureMap& map, const Dataset& dataset,
                                           std::span<const GroupElement> group, double mu, int trials,
                                           std::uint64_t seed);

// {identity, inversion}
std::vector<GroupElement> inversion_group();
// {rot90(0..3)}
std::vector<GroupElement> quarter_turn_group();

// ---------------------------------------------------------------------------
// Rotation toy task

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
Vec2 rotate(Vec2 v, double angle);
double norm(Vec2 v);

// Points on two circles (radius 0.5 -> label -1, radius 1.0 -> label +1),
// optionally replicated through every rotation of the cyclic group C_n.
// Point k of base sample i lives at index i * group_order + k.
struct ToyRotationTask {
  std::vector<Vec2> points;
  std::vector<double> labels;
  int group_order = 1;  // n of C_n; 1 means "not augmented"
  std::size_t base_count = 0;
};

ToyRotationTask make_toy_task(int group_order, std::uint64_t seed, std::size_t base_count = 200);

// Checks the layout above to 1e-12 and that labels are constant per orbit.
bool is_rotation_closed(const ToyRotationTask& task);

// Model f(x; w) = tanh(w.x)^2, squared-error loss. The utility is the
// group-summed loss divided by the group order, so tasks with different n
// weight the base samples equally.
double toy_loss(const ToyRotationTask& task, Vec2 w);
Vec2 toy_gradient(const ToyRotationTask& task, Vec2 w);
// Analytic 2x2 Hessian, row-major {h_xx, h_xy, h_yx, h_yy}.
std::array<double, 4> toy_hessian(const ToyRotationTask& task, Vec2 w);

// (L(w + h u) - 2 L(w) + L(w - h u)) / h^2, accumulated per sample in extended precision.
double toy_second_difference(const ToyRotationTask& task, Vec2 w, Vec2 u, double step);

struct ToyFit {
  Vec2 w;
  double loss = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
};

// Damped Newton from a seeded starting point until the gradient norm is below `tolerance`.
ToyFit fit_toy(const ToyRotationTask& task, std::uint64_t seed, double tolerance = 1e-12);

// (angle, utility at w rotated by angle) for angles 2 pi k / n_angles. Unchecked.
std::vector<std::pair<double, double>> orbit_profile(const ToyRotationTask& task, Vec2 w, int n_angles);

// The same scan over the task's own group; PreconditionError unless the task is
// C_n-closed with n >= 2.
std::vector<std::pair<double, double>> orbit_loss_scan(const ToyRotationTask& task, Vec2 w);

// (max - min) / |mean| of a profile.
double relative_spread(const std::vector<std::pair<double, double>>& profile);

struct CurvatureReport {
  Vec2 generator;                 // G w*, G = [[0, -1], [1, 0]]
  double gradient_norm = 0.0;
  bool at_minimum = false;        // gradient norm below 1e-6
  double directional_derivative = 0.0;  // grad . (G w*)
  double generator_curvature = 0.0;     // second difference along the unit generator
  double radial_curvature = 0.0;        // second difference along w*/|w*|
  double smallest_eigenvalue = 0.0;     // power iteration on finite-difference Hessian products
  double largest_eigenvalue = 0.0;
};

// Second differences use step 1e-4.
CurvatureReport generator_curvature(const ToyRotationTask& task, Vec2 w_star);

}  // namespace symml::lab
