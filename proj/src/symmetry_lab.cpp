#include "symml/symmetry_lab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "symml/errors.hpp"
#include "symml/random.hpp"

namespace symml::lab {

double dataset_loss(const Mlp& mlp, const FeatureMap& map, const Dataset& dataset) {
  double total = 0.0;
  for (const auto& img : dataset.images) total += sample_loss(mlp, map.apply(img), img.label);
  return total;
}

double symmetrized_loss(const Mlp& mlp, const FeatureMap& map, const Dataset& dataset,
                        std::span<const GroupElement> group) {
  double total = 0.0;
  for (const auto& img : dataset.images) {
    for (const auto& g : group) total += sample_loss(mlp, map.apply(apply_group(g, img)), img.label);
  }
  return total;
}

bool is_inversion_closed(const Dataset& dataset) {
  using Key = std::pair<int, std::array<double, kPixelCount>>;
  std::vector<Key> direct, negated;
  direct.reserve(dataset.size());
  negated.reserve(dataset.size());
  for (const auto& img : dataset.images) {
    direct.emplace_back(img.label, img.pixels);
    negated.emplace_back(img.label, apply_group(Inversion{}, img).pixels);
  }
  std::sort(direct.begin(), direct.end());
  std::sort(negated.begin(), negated.end());
  return direct == negated;
}

Mlp flip_first_layer(const Mlp& mlp) {
  Mlp out = mlp;
  for (double& w : out.mutable_layers().front().weights) w = -w;
  return out;
}

WeightFlipResult weight_flip_deviation(const Mlp& mlp, const Dataset& dataset) {
  const FeatureMap identity = FeatureMap::identity();
  WeightFlipResult r;
  r.loss = dataset_loss(mlp, identity, dataset);
  r.flipped_loss = dataset_loss(flip_first_layer(mlp), identity, dataset);
  r.deviation = std::abs(r.loss - r.flipped_loss) / r.loss;
  return r;
}

WeightFlipResult weight_orbit_invariance(const Mlp& mlp, const Dataset& symmetrized) {
  if (mlp.has_bias()) throw PreconditionError("weight-flip probe requires a model without biases");
  if (symmetrized.size() == 0) throw PreconditionError("weight-flip probe on an empty dataset");
  if (!is_inversion_closed(symmetrized)) {
    throw PreconditionError("weight-flip probe requires an inversion-closed (symmetrized) dataset");
  }
  return weight_flip_deviation(mlp, symmetrized);
}

double max_inversion_loss_change(const Mlp& mlp, const FeatureMap& map, const Dataset& dataset) {
  double worst = 0.0;
  for (const auto& img : dataset.images) {
    const double a = sample_loss(mlp, map.apply(img), img.label);
    const double b = sample_loss(mlp, map.apply(apply_group(Inversion{}, img)), img.label);
    worst = std::max(worst, std::abs(a - b));
  }
  return worst;
}

SampledLossResult sampled_loss_expectation(const Mlp& mlp, const FeatureMap& map, const Dataset& dataset,
                                           std::span<const GroupElement> group, double mu, int trials,
                                           std::uint64_t seed) {
  if (!(mu > 0.0 && mu <= 1.0)) throw PreconditionError("inclusion probability must be in (0, 1]");
  if (trials < 1) throw PreconditionError("trials must be at least 1");
  if (group.empty()) throw PreconditionError("empty group");

  std::vector<double> terms;
  terms.reserve(dataset.size() * group.size());
  for (const auto& img : dataset.images) {
    for (const auto& g : group) terms.push_back(sample_loss(mlp, map.apply(apply_group(g, img)), img.label));
  }

  SampledLossResult r;
  r.mu = mu;
  r.trials = trials;
  for (double t : terms) r.full_loss += t;

  Rng rng(seed, streams::kSampling);
  r.trial_losses.reserve(static_cast<std::size_t>(trials));
  for (int k = 0; k < trials; ++k) {
    double s = 0.0;
    for (double t : terms) {
      if (rng.bernoulli(mu)) s += t;
    }
    r.trial_losses.push_back(s);
  }
  // Shifted by the first trial: exact when every trial is equal (mu = 1).
  const double shift = r.trial_losses.front();
  double sum = 0.0;
  for (double s : r.trial_losses) sum += s - shift;
  r.mean = shift + sum / trials;
  if (trials > 1) {
    double ss = 0.0;
    for (double s : r.trial_losses) ss += (s - r.mean) * (s - r.mean);
    r.std_error = std::sqrt(ss / (trials - 1)) / std::sqrt(static_cast<double>(trials));
  }
  const double expected = mu * r.full_loss;
  r.ratio = r.mean / expected;
  r.z_score = r.std_error > 0.0 ? (r.mean - expected) / r.std_error : 0.0;
  return r;
}

std::vector<GroupElement> inversion_group() { return {IdentityAction{}, Inversion{}}; }

std::vector<GroupElement> quarter_turn_group() {
  return {Rotation90{0}, Rotation90{1}, Rotation90{2}, Rotation90{3}};
}

// ---------------------------------------------------------------------------

Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

namespace {

double group_angle(int k, int n) { return 2.0 * std::numbers::pi * k / n; }

// f = tanh(z)^2 and its first two derivatives in z.
struct Readout {
  double f, df, d2f;
};

Readout readout(double z) {
  const double t = std::tanh(z);
  const double s = 1.0 - t * t;
  return {t * t, 2.0 * t * s, 2.0 * s * (1.0 - 3.0 * t * t)};
}

}  // namespace

ToyRotationTask make_toy_task(int group_order, std::uint64_t seed, std::size_t base_count) {
  if (group_order < 1) throw PreconditionError("group order must be at least 1");
  if (base_count == 0) throw PreconditionError("toy task needs at least one point");
  Rng rng(seed, streams::kToy);
  ToyRotationTask task;
  task.group_order = group_order;
  task.base_count = base_count;
  task.points.reserve(base_count * group_order);
  for (std::size_t i = 0; i < base_count; ++i) {
    const bool inner = i % 2 == 0;
    const double radius = inner ? 0.5 : 1.0;
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Vec2 base{radius * std::cos(phi), radius * std::sin(phi)};
    for (int k = 0; k < group_order; ++k) {
      task.points.push_back(k == 0 ? base : rotate(base, group_angle(k, group_order)));
      task.labels.push_back(inner ? -1.0 : 1.0);
    }
  }
  return task;
}

bool is_rotation_closed(const ToyRotationTask& task) {
  const auto n = static_cast<std::size_t>(task.group_order);
  if (task.points.size() != task.base_count * n || task.labels.size() != task.points.size()) return false;
  for (std::size_t i = 0; i < task.base_count; ++i) {
    const Vec2 base = task.points[i * n];
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2 expect = rotate(base, group_angle(static_cast<int>(k), task.group_order));
      const Vec2 got = task.points[i * n + k];
      if (std::abs(expect.x - got.x) > 1e-12 || std::abs(expect.y - got.y) > 1e-12) return false;
      if (task.labels[i * n + k] != task.labels[i * n]) return false;
    }
  }
  return true;
}

double toy_loss(const ToyRotationTask& task, Vec2 w) {
  double total = 0.0;
  for (std::size_t i = 0; i < task.points.size(); ++i) {
    const double r = task.labels[i] - readout(dot(w, task.points[i])).f;
    total += r * r;
  }
  return total / task.group_order;
}

Vec2 toy_gradient(const ToyRotationTask& task, Vec2 w) {
  Vec2 g;
  for (std::size_t i = 0; i < task.points.size(); ++i) {
    const Vec2 x = task.points[i];
    const Readout o = readout(dot(w, x));
    const double dz = -2.0 * (task.labels[i] - o.f) * o.df;
    g.x += dz * x.x;
    g.y += dz * x.y;
  }
  g.x /= task.group_order;
  g.y /= task.group_order;
  return g;
}

std::array<double, 4> toy_hessian(const ToyRotationTask& task, Vec2 w) {
  std::array<double, 4> h{};
  for (std::size_t i = 0; i < task.points.size(); ++i) {
    const Vec2 x = task.points[i];
    const Readout o = readout(dot(w, x));
    const double d2 = 2.0 * o.df * o.df - 2.0 * (task.labels[i] - o.f) * o.d2f;
    h[0] += d2 * x.x * x.x;
    h[1] += d2 * x.x * x.y;
    h[3] += d2 * x.y * x.y;
  }
  for (double& v : h) v /= task.group_order;
  h[2] = h[1];
  return h;
}

double toy_second_difference(const ToyRotationTask& task, Vec2 w, Vec2 u, double step) {
  // Per-sample stencils in extended precision; differencing the summed loss
  // would leave a rounding floor far above the curvature being measured.
  long double total = 0.0L;
  const long double wx = w.x, wy = w.y, ux = u.x, uy = u.y, h = step;
  for (std::size_t i = 0; i < task.points.size(); ++i) {
    const long double px = task.points[i].x, py = task.points[i].y, y = task.labels[i];
    const auto loss_at = [&](long double sgn) {
      const long double z = (wx + sgn * h * ux) * px + (wy + sgn * h * uy) * py;
      const long double t = std::tanh(z);
      const long double r = y - t * t;
      return r * r;
    };
    total += loss_at(1.0L) - 2.0L * loss_at(0.0L) + loss_at(-1.0L);
  }
  return static_cast<double>(total / (h * h) / task.group_order);
}

ToyFit fit_toy(const ToyRotationTask& task, std::uint64_t seed, double tolerance) {
  Rng rng(seed, streams::kInit);
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  Vec2 w{std::cos(phi), std::sin(phi)};
  double loss = toy_loss(task, w);
  double lambda = 1e-3;
  int it = 0;
  Vec2 g = toy_gradient(task, w);
  for (; it < 500 && norm(g) >= tolerance; ++it) {
    const auto h = toy_hessian(task, w);
    // Levenberg-Marquardt damping keeps the step a descent direction when the
    // Hessian is singular along the orbit.
    for (int attempt = 0; attempt < 60; ++attempt) {
      const double a = h[0] + lambda, b = h[1], d = h[3] + lambda;
      const double det = a * d - b * b;
      Vec2 step{0.0, 0.0};
      if (det > 0.0 && a > 0.0) {
        step = {-(d * g.x - b * g.y) / det, -(-b * g.x + a * g.y) / det};
      } else {
        lambda *= 4.0;
        continue;
      }
      const Vec2 trial{w.x + step.x, w.y + step.y};
      const double trial_loss = toy_loss(task, trial);
      const Vec2 trial_grad = toy_gradient(task, trial);
      // Near the minimum the loss stops resolving progress, so a step that keeps
      // the loss within rounding and shrinks the gradient is also accepted.
      const bool better = trial_loss < loss ||
                          (trial_loss <= loss + 1e-13 * std::abs(loss) && norm(trial_grad) < norm(g));
      if (better) {
        w = trial;
        loss = trial_loss;
        g = trial_grad;
        lambda = std::max(lambda / 3.0, 1e-12);
        break;
      }
      lambda *= 4.0;
    }
    if (lambda > 1e12) break;
  }
  return {w, loss, norm(g), it};
}

std::vector<std::pair<double, double>> orbit_profile(const ToyRotationTask& task, Vec2 w, int n_angles) {
  if (n_angles < 1) throw PreconditionError("orbit profile needs at least one angle");
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(n_angles));
  for (int k = 0; k < n_angles; ++k) {
    const double theta = group_angle(k, n_angles);
    out.emplace_back(theta, toy_loss(task, rotate(w, theta)));
  }
  return out;
}

std::vector<std::pair<double, double>> orbit_loss_scan(const ToyRotationTask& task, Vec2 w) {
  if (task.group_order < 2 || !is_rotation_closed(task)) {
    throw PreconditionError("orbit scan requires a task augmented over its full rotation group");
  }
  return orbit_profile(task, w, task.group_order);
}

double relative_spread(const std::vector<std::pair<double, double>>& profile) {
  if (profile.empty()) return 0.0;
  double lo = profile.front().second, hi = lo, sum = 0.0;
  for (const auto& [theta, v] : profile) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  const double mean = sum / static_cast<double>(profile.size());
  return (hi - lo) / std::abs(mean);
}

CurvatureReport generator_curvature(const ToyRotationTask& task, Vec2 w_star) {
  constexpr double kStep = 1e-4;
  CurvatureReport r;
  const Vec2 grad = toy_gradient(task, w_star);
  r.gradient_norm = norm(grad);
  r.at_minimum = r.gradient_norm < 1e-6;
  r.generator = {-w_star.y, w_star.x};
  r.directional_derivative = dot(grad, r.generator);

  const double len = norm(w_star);
  if (len == 0.0) throw PreconditionError("generator direction undefined at w = 0");
  r.generator_curvature = toy_second_difference(task, w_star, {r.generator.x / len, r.generator.y / len}, kStep);
  r.radial_curvature = toy_second_difference(task, w_star, {w_star.x / len, w_star.y / len}, kStep);

  // Hessian-vector products by central differences of the analytic gradient.
  const double h = 1e-5 * std::max(1.0, len);
  const auto hess_times = [&](Vec2 v) {
    const Vec2 gp = toy_gradient(task, {w_star.x + h * v.x, w_star.y + h * v.y});
    const Vec2 gm = toy_gradient(task, {w_star.x - h * v.x, w_star.y - h * v.y});
    return Vec2{(gp.x - gm.x) / (2.0 * h), (gp.y - gm.y) / (2.0 * h)};
  };
  const auto power_iterate = [](auto&& op) {
    Vec2 v{0.6, 0.8};
    double lambda = 0.0;
    for (int it = 0; it < 500; ++it) {
      const Vec2 hv = op(v);
      const double n = norm(hv);
      const double next = dot(v, hv);
      if (n == 0.0) return 0.0;
      v = {hv.x / n, hv.y / n};
      if (it > 5 && std::abs(next - lambda) <= 1e-14 * std::max(1.0, std::abs(next))) return next;
      lambda = next;
    }
    return lambda;
  };
  const double dominant = power_iterate(hess_times);
  const double shift = std::abs(dominant);
  const double shifted = power_iterate([&](Vec2 v) {
    const Vec2 hv = hess_times(v);
    return Vec2{shift * v.x - hv.x, shift * v.y - hv.y};
  });
  const double a = dominant, b = shift - shifted;
  r.largest_eigenvalue = std::max(a, b);
  r.smallest_eigenvalue = std::min(a, b);
  return r;
}

}  // namespace symml::lab
