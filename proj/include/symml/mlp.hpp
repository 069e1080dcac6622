#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "symml/features.hpp"

namespace symml {

// Fully connected layer. Weights are row-major fan_out x fan_in.
struct DenseLayer {
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  std::vector<double> weights;
  std::optional<std::vector<double>> bias;

  double weight(std::size_t out, std::size_t in) const { return weights[out * fan_in + in]; }
  bool operator==(const DenseLayer&) const = default;
};

// Feed-forward network: tanh on every hidden layer, linear logits on the last.
// Either every layer has a bias or none does.
class Mlp {
public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  // Fan-in scaled uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; biases start at 0.
  // `dims` includes the input and output sizes, e.g. {64, 10, 5, 10}.
  static Mlp random(std::span<const std::size_t> dims, bool use_bias, std::uint64_t seed);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }

  std::vector<std::size_t> dims() const;
  std::size_t input_dim() const { return layers_.front().fan_in; }
  std::size_t output_dim() const { return layers_.back().fan_out; }
  bool has_bias() const { return !layers_.empty() && layers_.front().bias.has_value(); }

  // Flat parameter view: per layer, weights (row-major) then bias.
  std::size_t parameter_count() const;
  double& parameter(std::size_t index);
  double parameter(std::size_t index) const;

  // Throws ShapeError on broken chaining/mixed bias modes, DataError on non-finite values.
  void validate() const;

  bool operator==(const Mlp&) const = default;

private:
  std::vector<DenseLayer> layers_;
};

struct ForwardPass {
  std::vector<double> logits;
  // activations[0] is the input; activations[k] the output of hidden layer k.
  std::vector<std::vector<double>> activations;
};

// Same shape as the parameters of the Mlp it was computed for.
struct Gradient {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;  // empty vectors in no-bias mode

  static Gradient zeros_like(const Mlp& mlp);
  std::size_t size() const;
  double& operator[](std::size_t index);
  double operator[](std::size_t index) const;
};

ForwardPass forward(const Mlp& mlp, std::span<const double> features);

// Max-subtracted softmax. Throws DataError on non-finite logits.
std::vector<double> softmax(std::span<const double> logits);

// Index of the largest entry; ties go to the lowest index.
int argmax(std::span<const double> values);
// Index of the smallest entry and whether it is unique.
std::pair<int, bool> argmin_unique(std::span<const double> values);

int predict(const Mlp& mlp, std::span<const double> features);

// -log p[label] with p[label] clamped at 1e-15.
double cross_entropy_loss(std::span<const double> probabilities, int label);

// Loss of one sample end to end.
double sample_loss(const Mlp& mlp, std::span<const double> features, int label);

// Analytic gradient of sample_loss by backpropagation.
Gradient backward(const Mlp& mlp, std::span<const double> features, int label);

// Adds the gradient of one sample into `acc` and returns its loss.
double accumulate_gradient(const Mlp& mlp, std::span<const double> features, int label,
                           Gradient& acc);

// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-12),
// numeric by central differences with the given step (1e-7..1e-3).
double grad_check(const Mlp& mlp, std::span<const double> features, int label, double step);
// Same, against a caller-supplied analytic gradient (used to self-test the checker).
double grad_check(const Mlp& mlp, std::span<const double> features, int label, double step,
                  const Gradient& analytic);

// Row-major feature matrix with labels, the network's training input.
struct FeatureDataset {
  std::size_t dim = 0;
  std::vector<double> values;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  void push_back(std::span<const double> features, int label);
};

struct TrainConfig {
  std::uint64_t seed = 0;
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  bool use_bias = false;
  FeatureMap feature_map;
  std::vector<std::size_t> hidden = {10, 5};

  // Throws PreconditionError on epochs < 1, lr <= 0, or batch outside [1, n].
  void validate(std::size_t dataset_size) const;
};

struct TrainResult {
  Mlp model;
  std::vector<double> epoch_loss;  // mean per-sample loss of each epoch
};

// Mini-batch SGD with momentum, reshuffling each epoch from a stream of config.seed.
// Throws DivergenceError naming the epoch if the loss goes non-finite.
TrainResult train(const TrainConfig& config, const FeatureDataset& train_set);

}  // namespace symml
