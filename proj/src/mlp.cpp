#include "symml/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "symml/errors.hpp"
#include "symml/random.hpp"

namespace symml {

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { validate(); }

Mlp Mlp::random(std::span<const std::size_t> dims, bool use_bias, std::uint64_t seed) {
  if (dims.size() < 2) throw ShapeError("an Mlp needs at least input and output sizes");
  Rng rng(seed, streams::kInit);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    layer.fan_in = dims[l];
    layer.fan_out = dims[l + 1];
    if (layer.fan_in == 0 || layer.fan_out == 0) throw ShapeError("layer sizes must be positive");
    const double a = 1.0 / std::sqrt(static_cast<double>(layer.fan_in));
    layer.weights.resize(layer.fan_in * layer.fan_out);
    for (double& w : layer.weights) w = rng.uniform(-a, a);
    if (use_bias) layer.bias = std::vector<double>(layer.fan_out, 0.0);
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

std::vector<std::size_t> Mlp::dims() const {
  std::vector<std::size_t> out;
  if (layers_.empty()) return out;
  out.push_back(layers_.front().fan_in);
  for (const auto& l : layers_) out.push_back(l.fan_out);
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + (l.bias ? l.bias->size() : 0);
  return n;
}

double& Mlp::parameter(std::size_t index) {
  for (auto& l : layers_) {
    if (index < l.weights.size()) return l.weights[index];
    index -= l.weights.size();
    if (l.bias) {
      if (index < l.bias->size()) return (*l.bias)[index];
      index -= l.bias->size();
    }
  }
  throw std::out_of_range("parameter index out of range");
}

double Mlp::parameter(std::size_t index) const { return const_cast<Mlp&>(*this).parameter(index); }

void Mlp::validate() const {
  if (layers_.empty()) throw ShapeError("an Mlp needs at least one layer");
  const bool bias_mode = layers_.front().bias.has_value();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.fan_in == 0 || layer.fan_out == 0) throw ShapeError("layer sizes must be positive");
    if (layer.weights.size() != layer.fan_in * layer.fan_out) {
      throw ShapeError("layer " + std::to_string(l) + " weight count does not match its shape");
    }
    if (l > 0 && layer.fan_in != layers_[l - 1].fan_out) {
      throw ShapeError("layer " + std::to_string(l) + " fan_in does not chain");
    }
    if (layer.bias.has_value() != bias_mode) throw ShapeError("mixed bias modes across layers");
    if (layer.bias && layer.bias->size() != layer.fan_out) {
      throw ShapeError("layer " + std::to_string(l) + " bias size mismatch");
    }
    const auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(layer.weights.begin(), layer.weights.end(), finite) ||
        (layer.bias && !std::all_of(layer.bias->begin(), layer.bias->end(), finite))) {
      throw DataError("non-finite parameter in layer " + std::to_string(l));
    }
  }
}

// ---------------------------------------------------------------------------

Gradient Gradient::zeros_like(const Mlp& mlp) {
  Gradient g;
  for (const auto& l : mlp.layers()) {
    g.weights.emplace_back(l.weights.size(), 0.0);
    g.bias.emplace_back(l.bias ? l.bias->size() : 0, 0.0);
  }
  return g;
}

std::size_t Gradient::size() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + bias[l].size();
  return n;
}

double& Gradient::operator[](std::size_t index) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (index < weights[l].size()) return weights[l][index];
    index -= weights[l].size();
    if (index < bias[l].size()) return bias[l][index];
    index -= bias[l].size();
  }
  throw std::out_of_range("gradient index out of range");
}

double Gradient::operator[](std::size_t index) const { return const_cast<Gradient&>(*this)[index]; }

// ---------------------------------------------------------------------------

ForwardPass forward(const Mlp& mlp, std::span<const double> features) {
  if (mlp.layers().empty()) throw ShapeError("empty Mlp");
  if (features.size() != mlp.input_dim()) {
    throw ShapeError("input has " + std::to_string(features.size()) + " features, network expects " +
                     std::to_string(mlp.input_dim()));
  }
  ForwardPass pass;
  pass.activations.emplace_back(features.begin(), features.end());
  const auto& layers = mlp.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const auto& in = pass.activations.back();
    std::vector<double> out(layer.fan_out);
    for (std::size_t o = 0; o < layer.fan_out; ++o) {
      double s = layer.bias ? (*layer.bias)[o] : 0.0;
      const double* w = layer.weights.data() + o * layer.fan_in;
      for (std::size_t i = 0; i < layer.fan_in; ++i) s += w[i] * in[i];
      out[o] = s;
    }
    if (l + 1 < layers.size()) {
      for (double& v : out) v = std::tanh(v);
      pass.activations.push_back(std::move(out));
    } else {
      pass.logits = std::move(out);
    }
  }
  return pass;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax of an empty vector");
  for (double v : logits) {
    if (!std::isfinite(v)) throw DataError("softmax requires finite logits");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = static_cast<int>(i);
  }
  return best;
}

std::pair<int, bool> argmin_unique(std::span<const double> values) {
  int best = 0;
  bool unique = true;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[best]) {
      best = static_cast<int>(i);
      unique = true;
    } else if (values[i] == values[best]) {
      unique = false;
    }
  }
  return {best, unique};
}

int predict(const Mlp& mlp, std::span<const double> features) {
  return argmax(forward(mlp, features).logits);
}

double cross_entropy_loss(std::span<const double> probabilities, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probabilities.size()) {
    throw PreconditionError("label " + std::to_string(label) + " out of range");
  }
  return -std::log(std::max(probabilities[label], 1e-15));
}

double sample_loss(const Mlp& mlp, std::span<const double> features, int label) {
  return cross_entropy_loss(softmax(forward(mlp, features).logits), label);
}

double accumulate_gradient(const Mlp& mlp, std::span<const double> features, int label,
                           Gradient& acc) {
  const ForwardPass pass = forward(mlp, features);
  const auto probs = softmax(pass.logits);
  const double loss = cross_entropy_loss(probs, label);

  // Below the clamp the loss is constant, so the gradient vanishes.
  if (probs[label] < 1e-15) return loss;
  // dL/dlogits = p - onehot(label)
  std::vector<double> delta = probs;
  delta[label] -= 1.0;

  const auto& layers = mlp.layers();
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    const auto& in = pass.activations[l];
    auto& gw = acc.weights[l];
    for (std::size_t o = 0; o < layer.fan_out; ++o) {
      const double d = delta[o];
      double* row = gw.data() + o * layer.fan_in;
      for (std::size_t i = 0; i < layer.fan_in; ++i) row[i] += d * in[i];
    }
    if (layer.bias) {
      for (std::size_t o = 0; o < layer.fan_out; ++o) acc.bias[l][o] += delta[o];
    }
    if (l == 0) break;
    // Propagate to the previous hidden layer: W^T delta, times tanh' = 1 - z^2.
    std::vector<double> prev(layer.fan_in, 0.0);
    for (std::size_t o = 0; o < layer.fan_out; ++o) {
      const double d = delta[o];
      const double* w = layer.weights.data() + o * layer.fan_in;
      for (std::size_t i = 0; i < layer.fan_in; ++i) prev[i] += w[i] * d;
    }
    for (std::size_t i = 0; i < layer.fan_in; ++i) prev[i] *= 1.0 - in[i] * in[i];
    delta = std::move(prev);
  }
  return loss;
}

Gradient backward(const Mlp& mlp, std::span<const double> features, int label) {
  Gradient g = Gradient::zeros_like(mlp);
  accumulate_gradient(mlp, features, label, g);
  return g;
}

double grad_check(const Mlp& mlp, std::span<const double> features, int label, double step) {
  return grad_check(mlp, features, label, step, backward(mlp, features, label));
}

double grad_check(const Mlp& mlp, std::span<const double> features, int label, double step,
                  const Gradient& analytic) {
  if (!(step >= 1e-7 && step <= 1e-3)) throw PreconditionError("grad_check step must be in [1e-7, 1e-3]");
  if (analytic.size() != mlp.parameter_count()) throw ShapeError("gradient shape does not match model");
  Mlp probe = mlp;
  double worst = 0.0;
  for (std::size_t k = 0; k < probe.parameter_count(); ++k) {
    double& p = probe.parameter(k);
    const double saved = p;
    p = saved + step;
    const double up = sample_loss(probe, features, label);
    p = saved - step;
    const double down = sample_loss(probe, features, label);
    p = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic[k];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

// ---------------------------------------------------------------------------

void FeatureDataset::push_back(std::span<const double> features, int label) {
  if (dim == 0 && labels.empty()) dim = features.size();
  if (features.size() != dim) throw ShapeError("feature dimension changed within a dataset");
  values.insert(values.end(), features.begin(), features.end());
  labels.push_back(label);
}

void TrainConfig::validate(std::size_t dataset_size) const {
  if (epochs < 1) throw PreconditionError("epochs must be at least 1");
  if (batch_size < 1 || static_cast<std::size_t>(batch_size) > dataset_size) {
    throw PreconditionError("batch_size must be in [1, dataset size]");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw PreconditionError("learning_rate must be a finite non-negative number");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw PreconditionError("momentum must be in [0, 1)");
}

TrainResult train(const TrainConfig& config, const FeatureDataset& train_set) {
  if (train_set.size() == 0) throw PreconditionError("cannot train on an empty dataset");
  config.validate(train_set.size());

  std::vector<std::size_t> dims{train_set.dim};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(static_cast<std::size_t>(kClassCount));

  TrainResult result{Mlp::random(dims, config.use_bias, config.seed), {}};
  Mlp& model = result.model;
  const std::size_t n_params = model.parameter_count();
  std::vector<double> velocity(n_params, 0.0);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffler(config.seed, streams::kShuffle);
  Gradient grad = Gradient::zeros_like(model);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffler.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (auto& w : grad.weights) std::fill(w.begin(), w.end(), 0.0);
      for (auto& b : grad.bias) std::fill(b.begin(), b.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        try {
          epoch_loss += accumulate_gradient(model, train_set.row(i), train_set.labels[i], grad);
        } catch (const DataError& e) {
          throw DivergenceError(epoch, "training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
        }
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      bool finite = true;
      std::size_t k = 0;
      for (std::size_t l = 0; l < model.layers().size(); ++l) {
        auto& layer = model.mutable_layers()[l];
        for (std::size_t j = 0; j < layer.weights.size(); ++j, ++k) {
          velocity[k] = config.momentum * velocity[k] - config.learning_rate * scale * grad.weights[l][j];
          layer.weights[j] += velocity[k];
          finite = finite && std::isfinite(layer.weights[j]);
        }
        if (layer.bias) {
          for (std::size_t j = 0; j < layer.bias->size(); ++j, ++k) {
            velocity[k] = config.momentum * velocity[k] - config.learning_rate * scale * grad.bias[l][j];
            (*layer.bias)[j] += velocity[k];
            finite = finite && std::isfinite((*layer.bias)[j]);
          }
        }
      }
      if (!finite) {
        throw DivergenceError(epoch, "training diverged: non-finite parameter at epoch " + std::to_string(epoch));
      }
      if (model.has_bias() != config.use_bias) throw std::logic_error("bias mode changed during training");
    }
    const double mean_loss = epoch_loss / static_cast<double>(train_set.size());
    if (!std::isfinite(mean_loss)) {
      throw DivergenceError(epoch, "training diverged: non-finite loss at epoch " + std::to_string(epoch));
    }
    result.epoch_loss.push_back(mean_loss);
  }
  return result;
}

}  // namespace symml
