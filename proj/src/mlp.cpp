#include "storey/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "storey/error.hpp"

namespace storey {

namespace {

constexpr double kProbFloor = 1e-12;

void softmax_in_place(std::vector<double>& v) {
  const double peak = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - peak);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

void dense(const DenseLayer& layer, std::span<const double> in, std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(layer.outputs));
  const double* w = layer.weights.data();
  for (int o = 0; o < layer.outputs; ++o) {
    double acc = layer.bias[static_cast<std::size_t>(o)];
    const double* row = w + static_cast<std::size_t>(o) * layer.inputs;
    for (int i = 0; i < layer.inputs; ++i) acc += row[i] * in[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(o)] = acc;
  }
}

// Per-sample forward state kept for backprop.
struct Trace {
  std::vector<std::vector<double>> inputs;  // input to each layer
  std::vector<std::vector<double>> pre;     // pre-activation of each layer
  std::vector<double> dropout_scale;        // per-unit multiplier on hidden layer 0 output
  std::vector<double> probs;
};

void run_forward(const Mlp& model, std::span<const double> x, Mode mode, std::mt19937_64* rng, Trace& trace) {
  if (static_cast<int>(x.size()) != model.input_dim()) {
    std::ostringstream os;
    os << "input has " << x.size() << " values, model expects " << model.input_dim();
    throw Error(ErrorKind::InvalidArgument, os.str());
  }
  const auto& layers = model.layers();
  const std::size_t n = layers.size();
  trace.inputs.resize(n);
  trace.pre.resize(n);
  trace.inputs[0].assign(x.begin(), x.end());
  trace.dropout_scale.clear();
  for (std::size_t l = 0; l < n; ++l) {
    dense(layers[l], trace.inputs[l], trace.pre[l]);
    if (l + 1 == n) break;
    std::vector<double>& next = trace.inputs[l + 1];
    next = trace.pre[l];
    for (double& v : next) v = std::max(v, 0.0);
    if (l == 0 && mode == Mode::Train && model.dropout() > 0.0) {
      if (rng == nullptr) throw Error(ErrorKind::InvalidArgument, "train-mode forward needs an rng");
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const double keep_scale = 1.0 / (1.0 - model.dropout());
      trace.dropout_scale.resize(next.size());
      for (std::size_t i = 0; i < next.size(); ++i) {
        trace.dropout_scale[i] = unit(*rng) < model.dropout() ? 0.0 : keep_scale;
        next[i] *= trace.dropout_scale[i];
      }
    }
  }
  trace.probs = trace.pre.back();
  softmax_in_place(trace.probs);
}

double backward(const Mlp& model, const Trace& trace, int label, Gradients& grads) {
  const auto& layers = model.layers();
  std::vector<double> delta = trace.probs;
  delta[static_cast<std::size_t>(label)] -= 1.0;
  std::vector<double> prev;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const DenseLayer& layer = layers[l];
    const std::vector<double>& in = trace.inputs[l];
    double* gw = grads.weights[l].data();
    for (int o = 0; o < layer.outputs; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      grads.bias[l][static_cast<std::size_t>(o)] += d;
      if (d == 0.0) continue;
      double* row = gw + static_cast<std::size_t>(o) * layer.inputs;
      for (int i = 0; i < layer.inputs; ++i) row[i] += d * in[static_cast<std::size_t>(i)];
    }
    if (l == 0) break;
    prev.assign(static_cast<std::size_t>(layer.inputs), 0.0);
    for (int o = 0; o < layer.outputs; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      if (d == 0.0) continue;
      const double* row = layer.weights.data() + static_cast<std::size_t>(o) * layer.inputs;
      for (int i = 0; i < layer.inputs; ++i) prev[static_cast<std::size_t>(i)] += row[i] * d;
    }
    const std::vector<double>& pre = trace.pre[l - 1];
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (pre[i] <= 0.0) prev[i] = 0.0;
      if (l - 1 == 0 && !trace.dropout_scale.empty()) prev[i] *= trace.dropout_scale[i];
    }
    delta.swap(prev);
  }
  return cross_entropy(trace.probs, label);
}

void check_label(const Mlp& model, int label) {
  if (label < 0 || label >= model.output_dim()) {
    throw Error(ErrorKind::InvalidArgument, "label " + std::to_string(label) + " outside model output range");
  }
}

}  // namespace

Mlp::Mlp(int input_dim, std::vector<int> hidden_dims, int output_dim, double dropout) : dropout_(dropout) {
  if (input_dim <= 0 || output_dim <= 0) throw Error(ErrorKind::InvalidArgument, "MLP dims must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorKind::InvalidArgument, "dropout must be in [0, 1)");
  int fan_in = input_dim;
  hidden_dims.push_back(output_dim);
  for (int units : hidden_dims) {
    if (units <= 0) throw Error(ErrorKind::InvalidArgument, "MLP dims must be positive");
    DenseLayer layer;
    layer.inputs = fan_in;
    layer.outputs = units;
    layer.weights.assign(static_cast<std::size_t>(fan_in) * units, 0.0);
    layer.bias.assign(static_cast<std::size_t>(units), 0.0);
    layers_.push_back(std::move(layer));
    fan_in = units;
  }
}

Mlp::Mlp(std::vector<DenseLayer> layers, double dropout) : layers_(std::move(layers)), dropout_(dropout) {
  if (layers_.empty()) throw Error(ErrorKind::Schema, "MLP has no layers");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorKind::Schema, "dropout must be in [0, 1)");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    const bool shapes_ok = layer.inputs > 0 && layer.outputs > 0 &&
                           layer.weights.size() == static_cast<std::size_t>(layer.inputs) * layer.outputs &&
                           layer.bias.size() == static_cast<std::size_t>(layer.outputs);
    if (!shapes_ok || (l > 0 && layers_[l - 1].outputs != layer.inputs)) {
      throw Error(ErrorKind::Schema, "MLP layer " + std::to_string(l) + " has inconsistent dimensions");
    }
  }
  if (!all_finite()) throw Error(ErrorKind::Schema, "MLP parameters must be finite");
}

Mlp Mlp::floor_classifier(int input_dim, int floors) { return Mlp(input_dim, {100, 100, 100, 100}, floors, 0.25); }

void Mlp::init_he_uniform(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (DenseLayer& layer : layers_) {
    const double limit = std::sqrt(6.0 / layer.inputs);
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : layer.weights) w = dist(rng);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
}

std::vector<int> Mlp::hidden_dims() const {
  std::vector<int> dims;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) dims.push_back(layers_[l].outputs);
  return dims;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& layer : layers_) n += layer.weights.size() + layer.bias.size();
  return n;
}

std::vector<double> Mlp::forward(std::span<const double> x, Mode mode, std::mt19937_64* rng) const {
  Trace trace;
  run_forward(*this, x, mode, rng, trace);
  return std::move(trace.probs);
}

bool Mlp::all_finite() const {
  for (const DenseLayer& layer : layers_) {
    for (double v : layer.weights) if (!std::isfinite(v)) return false;
    for (double v : layer.bias) if (!std::isfinite(v)) return false;
  }
  return true;
}

Gradients::Gradients(const Mlp& model) {
  for (const DenseLayer& layer : model.layers()) {
    weights.emplace_back(layer.weights.size(), 0.0);
    bias.emplace_back(layer.bias.size(), 0.0);
  }
}

void Gradients::zero() {
  for (auto& g : weights) std::fill(g.begin(), g.end(), 0.0);
  for (auto& g : bias) std::fill(g.begin(), g.end(), 0.0);
}

double cross_entropy(std::span<const double> probs, int label) {
  return -std::log(std::max(probs[static_cast<std::size_t>(label)], kProbFloor));
}

double accumulate_gradient(const Mlp& model, std::span<const double> x, int label, Gradients& grads, Mode mode,
                           std::mt19937_64* rng) {
  check_label(model, label);
  Trace trace;
  run_forward(model, x, mode, rng, trace);
  return backward(model, trace, label, grads);
}

void TrainConfig::validate() const {
  const bool ok = learning_rate >= 0.0 && beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0 &&
                  epsilon > 0.0 && batch_size > 0 && epochs > 0 && patience > 0 && validation_fraction >= 0.0 &&
                  validation_fraction < 1.0;
  if (!ok) throw Error(ErrorKind::InvalidArgument, "invalid training configuration");
}

Adam::Adam(const Mlp& model, const TrainConfig& config) : config_(config) {
  for (const DenseLayer& layer : model.layers()) {
    m_w_.emplace_back(layer.weights.size(), 0.0);
    v_w_.emplace_back(layer.weights.size(), 0.0);
    m_b_.emplace_back(layer.bias.size(), 0.0);
    v_b_.emplace_back(layer.bias.size(), 0.0);
  }
}

void Adam::step(Mlp& model, const Gradients& grads) {
  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      p[i] -= config_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
    }
  };
  auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weights, grads.weights[l], m_w_[l], v_w_[l]);
    update(layers[l].bias, grads.bias[l], m_b_[l], v_b_[l]);
  }
}

namespace {

double mean_loss(const Mlp& model, const Dataset& data, std::span<const std::size_t> indices) {
  double total = 0.0;
  for (std::size_t i : indices) total += cross_entropy(model.forward(data.inputs[i]), data.labels[i]);
  return indices.empty() ? 0.0 : total / static_cast<double>(indices.size());
}

}  // namespace

TrainResult train(Mlp model, const Dataset& data, const TrainConfig& config) {
  config.validate();
  if (data.size() == 0 || data.inputs.size() != data.labels.size()) {
    throw Error(ErrorKind::InvalidArgument, "training set is empty or inconsistent");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (static_cast<int>(data.inputs[i].size()) != model.input_dim()) {
      throw Error(ErrorKind::InvalidArgument, "training sample " + std::to_string(i) + " has wrong dimension");
    }
    check_label(model, data.labels[i]);
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(data.size())));
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> fit(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  if (fit.empty()) throw Error(ErrorKind::InvalidArgument, "validation split leaves no training samples");

  TrainResult result;
  Adam adam(model, config);
  Gradients grads(model);
  Mlp best = model;
  double best_loss = std::numeric_limits<double>::infinity();
  int stale = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(fit.begin(), fit.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < fit.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(fit.size(), start + static_cast<std::size_t>(config.batch_size));
      grads.zero();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = fit[k];
        epoch_loss += accumulate_gradient(model, data.inputs[i], data.labels[i], grads, Mode::Train, &rng);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (auto& g : grads.weights) for (double& v : g) v *= scale;
      for (auto& g : grads.bias) for (double& v : g) v *= scale;
      adam.step(model, grads);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(fit.size());
    stats.validation_loss = val.empty() ? stats.train_loss : mean_loss(model, data, val);
    if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.validation_loss) || !model.all_finite()) {
      std::ostringstream os;
      os << "training diverged at epoch " << epoch << " (train loss " << stats.train_loss << ", validation loss "
         << stats.validation_loss << ")";
      throw Error(ErrorKind::Numerical, os.str());
    }
    result.curve.push_back(stats);

    if (val.empty()) {
      best = model;
      result.best_epoch = epoch;
      continue;
    }
    if (stats.validation_loss < best_loss) {
      best_loss = stats.validation_loss;
      best = model;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  result.model = std::move(best);
  return result;
}

double accuracy(const Mlp& model, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto probs = model.forward(data.inputs[i]);
    const auto best = std::max_element(probs.begin(), probs.end()) - probs.begin();
    if (best == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

namespace {

std::vector<std::vector<bool>> relu_pattern(const Mlp& model, std::span<const double> x) {
  Trace trace;
  run_forward(model, x, Mode::Infer, nullptr, trace);
  std::vector<std::vector<bool>> pattern;
  for (std::size_t l = 0; l + 1 < trace.pre.size(); ++l) {
    std::vector<bool> active(trace.pre[l].size());
    for (std::size_t i = 0; i < active.size(); ++i) active[i] = trace.pre[l][i] > 0.0;
    pattern.push_back(std::move(active));
  }
  return pattern;
}

}  // namespace

GradCheckResult grad_check(const Mlp& model, std::span<const double> x, int label, int samples, std::uint64_t seed) {
  constexpr double kStep = 1e-5;
  constexpr double kFloor = 1e-6;
  check_label(model, label);

  Gradients analytic(model);
  accumulate_gradient(model, x, label, analytic);
  const auto base_pattern = relu_pattern(model, x);

  // Flat index over (layer, is_bias, offset).
  struct Slot {
    std::size_t layer;
    bool bias;
    std::size_t offset;
  };
  std::vector<Slot> slots;
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    for (std::size_t i = 0; i < model.layers()[l].weights.size(); ++i) slots.push_back({l, false, i});
    for (std::size_t i = 0; i < model.layers()[l].bias.size(); ++i) slots.push_back({l, true, i});
  }
  std::mt19937_64 rng(seed);
  std::shuffle(slots.begin(), slots.end(), rng);
  slots.resize(std::min(slots.size(), static_cast<std::size_t>(std::max(samples, 0))));

  GradCheckResult result;
  Mlp probe = model;
  for (const Slot& s : slots) {
    DenseLayer& layer = probe.layers()[s.layer];
    double& param = s.bias ? layer.bias[s.offset] : layer.weights[s.offset];
    const double original = param;
    param = original + kStep;
    const double up = cross_entropy(probe.forward(x), label);
    const bool up_same = relu_pattern(probe, x) == base_pattern;
    param = original - kStep;
    const double down = cross_entropy(probe.forward(x), label);
    const bool down_same = relu_pattern(probe, x) == base_pattern;
    param = original;
    if (!up_same || !down_same) {
      ++result.skipped;
      continue;
    }
    const double numeric = (up - down) / (2.0 * kStep);
    const double exact = s.bias ? analytic.bias[s.layer][s.offset] : analytic.weights[s.layer][s.offset];
    const double denom = std::max({std::abs(numeric), std::abs(exact), kFloor});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(numeric - exact) / denom);
    ++result.checked;
  }
  return result;
}

}  // namespace storey
