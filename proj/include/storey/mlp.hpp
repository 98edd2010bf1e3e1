#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace storey {

enum class Mode { Train, Infer };

// Fully connected layer, weights stored row-major as [out][in].
struct DenseLayer {
  int inputs = 0;
  int outputs = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  double& w(int o, int i) { return weights[static_cast<std::size_t>(o) * inputs + i]; }
  double w(int o, int i) const { return weights[static_cast<std::size_t>(o) * inputs + i]; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Feedforward classifier: ReLU hidden layers, optional inverted dropout on
// the output of the first hidden layer, linear head, softmax.
class Mlp {
 public:
  Mlp() = default;
  // Zero-initialized. Throws Error(InvalidArgument) on bad dimensions.
  Mlp(int input_dim, std::vector<int> hidden_dims, int output_dim, double dropout = 0.0);
  // Reassembles a network from stored layers; validates the chain.
  Mlp(std::vector<DenseLayer> layers, double dropout);

  // Four hidden layers of 100 units, dropout 0.25 after the first.
  static Mlp floor_classifier(int input_dim, int floors);

  // He-uniform weights, zero biases.
  void init_he_uniform(std::uint64_t seed);

  int input_dim() const noexcept { return layers_.empty() ? 0 : layers_.front().inputs; }
  int output_dim() const noexcept { return layers_.empty() ? 0 : layers_.back().outputs; }
  double dropout() const noexcept { return dropout_; }
  std::vector<int> hidden_dims() const;
  std::size_t parameter_count() const;

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  // Returns the softmax distribution. `rng` is required in Train mode.
  std::vector<double> forward(std::span<const double> x, Mode mode = Mode::Infer,
                              std::mt19937_64* rng = nullptr) const;

  bool all_finite() const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<DenseLayer> layers_;
  double dropout_ = 0.0;
};

// Parameter-shaped gradient buffers.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  explicit Gradients(const Mlp& model);
  void zero();
};

// Categorical cross entropy of one sample, p clamped at 1e-12.
double cross_entropy(std::span<const double> probs, int label);

// Backprop for one sample. Accumulates into `grads` and returns the loss.
// Dropout is applied (with `rng`) only in Train mode.
double accumulate_gradient(const Mlp& model, std::span<const double> x, int label, Gradients& grads,
                           Mode mode = Mode::Infer, std::mt19937_64* rng = nullptr);

struct Dataset {
  std::vector<std::vector<double>> inputs;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 10;
  int epochs = 100;
  int patience = 10;                 // early stop after this many epochs without val improvement
  double validation_fraction = 0.1;  // 0 disables the split and early stopping
  std::uint64_t seed = 1;

  void validate() const;
};

// Adam with bias-corrected moments; one instance per training run.
class Adam {
 public:
  Adam(const Mlp& model, const TrainConfig& config);
  void step(Mlp& model, const Gradients& grads);

 private:
  TrainConfig config_;
  long step_ = 0;
  std::vector<std::vector<double>> m_w_, v_w_, m_b_, v_b_;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainResult {
  Mlp model;
  std::vector<EpochStats> curve;
  int best_epoch = 0;
};

// Adam on mini-batches. Deterministic for a fixed seed. Throws
// Error(Numerical) when the loss becomes NaN.
TrainResult train(Mlp model, const Dataset& data, const TrainConfig& config);

double accuracy(const Mlp& model, const Dataset& data);

struct GradCheckResult {
  double max_relative_error = 0.0;
  int checked = 0;
  int skipped = 0;  // perturbation crossed a ReLU kink
};

// Central finite differences (step 1e-5) against backprop on a random
// subset of `samples` parameters, dropout disabled.
GradCheckResult grad_check(const Mlp& model, std::span<const double> x, int label, int samples,
                           std::uint64_t seed);

}  // namespace storey
