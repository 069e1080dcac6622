#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "symml/errors.hpp"
#include "symml/mlp.hpp"

using namespace symml;
using testing::negated;
using testing::random_vector;

namespace {

const std::vector<std::size_t> kDims{64, 10, 5, 10};

// Direct re-computation of the layer recurrence, independent of forward().
std::vector<double> oracle_logits(const Mlp& mlp, std::vector<double> z) {
  const auto& layers = mlp.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    std::vector<double> next(L.fan_out);
    for (std::size_t o = 0; o < L.fan_out; ++o) {
      double s = L.bias ? (*L.bias)[o] : 0.0;
      for (std::size_t i = 0; i < L.fan_in; ++i) s += L.weights[o * L.fan_in + i] * z[i];
      next[o] = l + 1 == layers.size() ? s : std::tanh(s);
    }
    z = std::move(next);
  }
  return z;
}

FeatureDataset random_dataset(Rng& rng, std::size_t n, std::size_t dim) {
  FeatureDataset ds;
  ds.dim = dim;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = random_vector(rng, dim);
    ds.push_back(x, static_cast<int>(i % 10));
  }
  return ds;
}

}  // namespace

TEST_CASE("random init") {
  const Mlp m = Mlp::random(kDims, false, 0);
  CHECK(m.dims() == kDims);
  CHECK_FALSE(m.has_bias());
  CHECK(m.parameter_count() == 64 * 10 + 10 * 5 + 5 * 10);
  for (const auto& L : m.layers()) {
    CHECK_FALSE(L.bias);
    const double a = 1.0 / std::sqrt(static_cast<double>(L.fan_in));
    for (double w : L.weights) CHECK(std::abs(w) <= a);
  }
  const Mlp b = Mlp::random(kDims, true, 0);
  CHECK(b.parameter_count() == m.parameter_count() + 25);
  for (const auto& L : b.layers()) {
    REQUIRE(L.bias);
    for (double v : *L.bias) CHECK(v == 0.0);
  }
  CHECK(Mlp::random(kDims, false, 0) == m);
  CHECK_FALSE(Mlp::random(kDims, false, 1) == m);
}

TEST_CASE("construction validates shapes and finiteness") {
  Mlp m = Mlp::random(kDims, false, 0);
  auto layers = m.layers();
  layers[1].fan_in = 9;
  CHECK_THROWS_AS(Mlp{layers}, ShapeError);

  layers = m.layers();
  layers[0].bias = std::vector<double>(10, 0.0);  // mixed bias modes
  CHECK_THROWS_AS(Mlp{layers}, ShapeError);

  layers = m.layers();
  layers[2].weights[3] = std::nan("");
  CHECK_THROWS(Mlp{layers});
}

TEST_CASE("forward") {
  const Mlp m = Mlp::random(kDims, false, 0);
  SUBCASE("zero input gives zero logits") {
    const std::vector<double> zero(64, 0.0);
    for (double v : forward(m, zero).logits) CHECK(v == 0.0);
  }
  SUBCASE("matches the hand-rolled recurrence") {
    std::vector<double> x(64);
    for (int i = 0; i < 64; ++i) x[i] = std::sin(0.37 * i);
    const auto pass = forward(m, x);
    const auto expected = oracle_logits(m, x);
    REQUIRE(pass.logits.size() == 10);
    for (int k = 0; k < 10; ++k) CHECK(pass.logits[k] == doctest::Approx(expected[k]).epsilon(1e-14));
    REQUIRE(pass.activations.size() == 3);
    for (std::size_t l = 1; l < pass.activations.size(); ++l) {
      for (double z : pass.activations[l]) CHECK((z > -1.0 && z < 1.0));
    }
  }
  SUBCASE("with bias") {
    Mlp b = Mlp::random(kDims, true, 3);
    Rng rng(3);
    for (auto& L : b.mutable_layers()) {
      for (double& v : *L.bias) v = rng.uniform(-0.5, 0.5);
    }
    const auto x = random_vector(rng, 64);
    const auto got = forward(b, x).logits;
    const auto expected = oracle_logits(b, x);
    for (int k = 0; k < 10; ++k) CHECK(got[k] == doctest::Approx(expected[k]).epsilon(1e-14));
  }
  SUBCASE("shape mismatch") {
    const std::vector<double> short_x(63, 0.0);
    CHECK_THROWS_AS(forward(m, short_x), ShapeError);
  }
}

TEST_CASE("odd network antisymmetry over 1000 random pairs") {
  Rng rng(11);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Mlp m = Mlp::random(kDims, false, static_cast<std::uint64_t>(t));
    const auto x = random_vector(rng, 64);
    const auto a = forward(m, x).logits;
    const auto b = forward(m, negated(x)).logits;
    for (int k = 0; k < 10; ++k) worst = std::max(worst, std::abs(a[k] + b[k]));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("probability inversion") {
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    const Mlp m = Mlp::random(kDims, false, 100 + t);
    const auto x = random_vector(rng, 64);
    const auto logits = forward(m, x).logits;
    const auto p_neg = softmax(forward(m, negated(x)).logits);
    const auto p_flip = softmax(negated(logits));
    CHECK(p_neg == p_flip);
    // unnormalized probabilities invert: p(-x)_a * p(x)_a is constant over a
    const auto p = softmax(logits);
    const double c0 = p[0] * p_neg[0];
    for (int k = 1; k < 10; ++k) CHECK(p[k] * p_neg[k] == doctest::Approx(c0).epsilon(1e-10));
  }
}

TEST_CASE("softmax") {
  const std::vector<double> flat(10, 3.5);
  for (double p : softmax(flat)) CHECK(p == doctest::Approx(0.1).epsilon(1e-15));

  std::vector<double> one(10, 0.0);
  one[0] = 1.0;
  const double e = std::exp(1.0);
  CHECK(softmax(one)[0] == doctest::Approx(e / (e + 9.0)).epsilon(1e-15));

  Rng rng(13);
  for (int t = 0; t < 200; ++t) {
    const auto logits = random_vector(rng, 10, 50.0);
    const auto p = softmax(logits);
    double s = 0.0;
    for (double v : p) {
      CHECK((v > 0.0 && v <= 1.0));
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
  const std::vector<double> huge{1000.0, 999.0, 0, 0, 0, 0, 0, 0, 0, 0};
  CHECK(std::isfinite(softmax(huge)[0]));
  std::vector<double> bad(10, 0.0);
  bad[4] = INFINITY;
  CHECK_THROWS_AS(softmax(bad), DataError);
}

TEST_CASE("argmax, argmin and predict") {
  const std::vector<double> zeros(10, 0.0);
  CHECK(argmax(zeros) == 0);
  const std::vector<double> v{0.1, 0.9, 0.9, -2.0, -2.0, 0, 0, 0, 0, 0};
  CHECK(argmax(v) == 1);
  CHECK_FALSE(argmin_unique(v).second);
  const std::vector<double> w{0.1, 0.9, 0.9, -2.0, -1.0, 0, 0, 0, 0, 0};
  CHECK(argmin_unique(w) == std::pair{3, true});

  Rng rng(14);
  for (int t = 0; t < 200; ++t) {
    const Mlp m = Mlp::random(kDims, false, 500 + t);
    const auto x = random_vector(rng, 64);
    const auto logits = forward(m, x).logits;
    const auto [lo, unique] = argmin_unique(logits);
    if (unique) CHECK(predict(m, negated(x)) == lo);
    CHECK(predict(m, x) == argmax(logits));
  }
}

TEST_CASE("cross entropy") {
  std::vector<double> p(10, 0.0);
  p[3] = 1.0;
  CHECK(cross_entropy_loss(p, 3) == 0.0);
  const std::vector<double> uniform(10, 0.1);
  CHECK(cross_entropy_loss(uniform, 7) == doctest::Approx(std::log(10.0)).epsilon(1e-15));
  std::vector<double> q(10, 0.75 / 9.0);
  q[2] = 0.25;
  CHECK(cross_entropy_loss(q, 2) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  // clamped, not infinite
  CHECK(cross_entropy_loss(p, 0) == doctest::Approx(-std::log(1e-15)));
  CHECK_THROWS_AS(cross_entropy_loss(uniform, 10), PreconditionError);
  CHECK_THROWS_AS(cross_entropy_loss(uniform, -1), PreconditionError);
}

TEST_CASE("backward") {
  SUBCASE("zero input leaves the first layer gradient at zero") {
    const Mlp m = Mlp::random(kDims, false, 0);
    const std::vector<double> zero(64, 0.0);
    const Gradient g = backward(m, zero, 4);
    for (double v : g.weights[0]) CHECK(v == 0.0);
  }
  SUBCASE("last layer gradient with uniform probabilities") {
    // zero last-layer weights make the logits zero, hence uniform probabilities
    Mlp m = Mlp::random(kDims, false, 1);
    auto& last = m.mutable_layers().back();
    std::fill(last.weights.begin(), last.weights.end(), 0.0);
    Rng rng(15);
    const auto x = random_vector(rng, 64);
    const int y = 6;
    const auto z = forward(m, x).activations.back();
    const Gradient g = backward(m, x, y);
    for (std::size_t a = 0; a < 10; ++a) {
      for (std::size_t i = 0; i < 5; ++i) {
        const double expected = (0.1 - (a == static_cast<std::size_t>(y) ? 1.0 : 0.0)) * z[i];
        CHECK(g.weights.back()[a * 5 + i] == doctest::Approx(expected).epsilon(1e-14));
      }
    }
  }
  SUBCASE("flat indexing matches parameter order") {
    Mlp m = Mlp::random(kDims, true, 2);
    Gradient g = Gradient::zeros_like(m);
    CHECK(g.size() == m.parameter_count());
    g[g.size() - 1] = 7.0;
    CHECK(g.bias.back().back() == 7.0);
    m.parameter(0) = 0.125;
    CHECK(m.layers()[0].weights[0] == 0.125);
  }
}

TEST_CASE("grad_check over 100 random cases") {
  Rng rng(16);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t in = 2 + rng.below(12);
    std::vector<std::size_t> dims{in};
    const std::size_t hidden = rng.below(3);
    for (std::size_t h = 0; h < hidden; ++h) dims.push_back(2 + rng.below(8));
    dims.push_back(10);
    const bool bias = t % 2 == 1;
    Mlp m = Mlp::random(dims, bias, 1000 + t);
    if (bias) {
      for (auto& L : m.mutable_layers()) {
        for (double& b : *L.bias) b = rng.uniform(-0.5, 0.5);
      }
    }
    const auto x = random_vector(rng, in);
    const int y = static_cast<int>(rng.below(10));
    worst = std::max(worst, grad_check(m, x, y, 1e-5));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("grad_check detects a corrupted gradient") {
  const Mlp m = Mlp::random(kDims, true, 0);
  Rng rng(17);
  const auto x = random_vector(rng, 64);
  Gradient g = backward(m, x, 2);
  CHECK(grad_check(m, x, 2, 1e-5, g) < 1e-5);
  // pick an entry that is clearly nonzero
  std::size_t k = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (std::abs(g[i]) > std::abs(g[k])) k = i;
  }
  g[k] *= 2.0;
  CHECK(grad_check(m, x, 2, 1e-5, g) > 1e-2);

  CHECK_THROWS_AS(grad_check(m, x, 2, 1e-2), PreconditionError);
  CHECK_THROWS_AS(grad_check(m, x, 2, 1e-9), PreconditionError);
}

TEST_CASE("train") {
  Rng rng(18);
  const FeatureDataset ds = random_dataset(rng, 120, 16);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;

  SUBCASE("deterministic") {
    const auto a = train(cfg, ds);
    const auto b = train(cfg, ds);
    CHECK(a.model == b.model);
    CHECK(a.epoch_loss == b.epoch_loss);
    CHECK(a.epoch_loss.size() == 3);
  }
  SUBCASE("lr = 0 leaves the initialization untouched") {
    cfg.epochs = 1;
    cfg.learning_rate = 0.0;
    const std::vector<std::size_t> dims{16, 10, 5, 10};
    CHECK(train(cfg, ds).model == Mlp::random(dims, false, cfg.seed));
  }
  SUBCASE("loss decreases on a learnable task") {
    cfg.epochs = 30;
    const auto r = train(cfg, ds);
    CHECK(r.epoch_loss.back() < r.epoch_loss.front());
  }
  SUBCASE("bias mode is preserved") {
    CHECK_FALSE(train(cfg, ds).model.has_bias());
    cfg.use_bias = true;
    CHECK(train(cfg, ds).model.has_bias());
  }
  SUBCASE("config validation") {
    cfg.epochs = 0;
    CHECK_THROWS_AS(train(cfg, ds), PreconditionError);
    cfg.epochs = 1;
    cfg.batch_size = 121;
    CHECK_THROWS_AS(train(cfg, ds), PreconditionError);
    cfg.batch_size = 0;
    CHECK_THROWS_AS(train(cfg, ds), PreconditionError);
    cfg.batch_size = 8;
    cfg.learning_rate = -0.1;
    CHECK_THROWS_AS(train(cfg, ds), PreconditionError);
  }
  SUBCASE("divergence names the epoch") {
    cfg.learning_rate = 1e308;
    cfg.batch_size = 1;
    try {
      train(cfg, ds);
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.epoch() == 1);
      CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
    }
  }
  SUBCASE("non-finite loss is reported as divergence") {
    FeatureDataset poisoned = ds;
    poisoned.values[5 * poisoned.dim] = std::nan("");
    CHECK_THROWS_AS(train(cfg, poisoned), DivergenceError);
  }
}
