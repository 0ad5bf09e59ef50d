#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wdro/core.hpp"
#include "wdro/errors.hpp"
#include "wdro/rng.hpp"

namespace wdro {

enum class ModelKind { kLinear, kMlp };
enum class Activation { kRelu, kTanh };

struct ArchSpec {
  ModelKind kind = ModelKind::kLinear;
  std::vector<int> hidden;  // one or two layer widths for kMlp, empty for kLinear
  Activation activation = Activation::kRelu;

  void validate() const {
    if (kind == ModelKind::kLinear) {
      if (!hidden.empty()) throw InvalidConfig("linear model takes no hidden sizes");
      return;
    }
    if (hidden.empty() || hidden.size() > 2)
      throw InvalidConfig("mlp takes one or two hidden sizes");
    for (int h : hidden)
      if (h < 1) throw InvalidConfig("hidden sizes must be >= 1");
  }

  // Layer widths from input to the single logit output.
  std::vector<int> layer_dims(int input_dim) const {
    std::vector<int> dims{input_dim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(1);
    return dims;
  }

  int param_count(int input_dim) const {
    int total = 0;
    const std::vector<int> dims = layer_dims(input_dim);
    for (std::size_t l = 1; l < dims.size(); ++l) total += dims[l] * dims[l - 1] + dims[l];
    return total;
  }
};

// Flat parameter vector; per layer the weight matrix (row-major, out rows)
// is followed by its bias vector.
struct ModelParams {
  ArchSpec arch;
  int input_dim = 0;
  std::vector<double> weights;

  void validate() const {
    arch.validate();
    if (input_dim < 1) throw InvalidConfig("input_dim must be >= 1");
    if (static_cast<int>(weights.size()) != arch.param_count(input_dim))
      throw ShapeMismatch("weight vector length does not match architecture");
    if (!all_finite(weights)) throw InvalidConfig("weights must be finite");
  }
};

struct LossBatch {
  std::vector<double> per_sample;
  double mean = 0.0;
};

inline ModelParams init_params(const ArchSpec& arch, int input_dim, Rng& rng) {
  arch.validate();
  ModelParams params;
  params.arch = arch;
  params.input_dim = input_dim;
  params.weights.assign(static_cast<std::size_t>(arch.param_count(input_dim)), 0.0);
  const std::vector<int> dims = arch.layer_dims(input_dim);
  std::size_t offset = 0;
  for (std::size_t l = 1; l < dims.size(); ++l) {
    const int fan_in = dims[l - 1];
    const int fan_out = dims[l];
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    // Biases draw from the same range; a zero bias would park dead-input
    // rectifier units exactly on the kink.
    for (int k = 0; k < fan_out * (fan_in + 1); ++k) params.weights[offset++] = u(rng);
  }
  return params;
}

namespace detail {

inline double activate(double z, Activation act) {
  return act == Activation::kRelu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

inline double activate_grad(double z, Activation act) {
  if (act == Activation::kRelu) return z > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Forward pass for one sample; fills pre-activations z and activations a per
// layer (a[0] is the input) and returns the final logit.
inline double forward_sample(const ModelParams& params, std::span<const double> x,
                             const std::vector<int>& dims, std::vector<std::vector<double>>& z,
                             std::vector<std::vector<double>>& a) {
  a[0].assign(x.begin(), x.end());
  std::size_t offset = 0;
  for (std::size_t l = 1; l < dims.size(); ++l) {
    const int in = dims[l - 1];
    const int out = dims[l];
    z[l].assign(static_cast<std::size_t>(out), 0.0);
    a[l].assign(static_cast<std::size_t>(out), 0.0);
    const double* w = params.weights.data() + offset;
    const double* b = w + static_cast<std::size_t>(out) * in;
    for (int r = 0; r < out; ++r) {
      double acc = b[r];
      const double* row = w + static_cast<std::size_t>(r) * in;
      for (int c = 0; c < in; ++c) acc += row[c] * a[l - 1][c];
      z[l][r] = acc;
      const bool last = (l + 1 == dims.size());
      a[l][r] = last ? acc : activate(acc, params.arch.activation);
    }
    offset += static_cast<std::size_t>(out) * in + out;
  }
  return z.back()[0];
}

inline void check_batch_shapes(const ModelParams& params, const Matrix& features,
                               std::span<const int> labels) {
  params.validate();
  if (features.cols != params.input_dim)
    throw ShapeMismatch("feature width does not match input_dim");
  if (static_cast<int>(labels.size()) != features.rows)
    throw ShapeMismatch("label count does not match feature rows");
  for (int y : labels)
    if (y != 0 && y != 1) throw InvalidConfig("labels must be 0 or 1");
}

}  // namespace detail

inline std::vector<double> forward_logits(const ModelParams& params, const Matrix& features) {
  params.validate();
  if (features.cols != params.input_dim)
    throw ShapeMismatch("feature width does not match input_dim");
  const std::vector<int> dims = params.arch.layer_dims(params.input_dim);
  std::vector<std::vector<double>> z(dims.size()), a(dims.size());
  std::vector<double> logits(static_cast<std::size_t>(features.rows));
  for (int i = 0; i < features.rows; ++i)
    logits[i] = detail::forward_sample(params, features.row(i), dims, z, a);
  return logits;
}

// Binary cross-entropy on the logit, in the softplus form that never
// evaluates log of a rounded-to-zero probability:
//   l = max(z, 0) - z*y + log(1 + exp(-|z|)).
inline LossBatch forward_loss(const ModelParams& params, const Matrix& features,
                              std::span<const int> labels) {
  detail::check_batch_shapes(params, features, labels);
  const std::vector<double> logits = forward_logits(params, features);
  LossBatch batch;
  batch.per_sample.resize(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double l = std::max(z, 0.0) - z * labels[i] + std::log1p(std::exp(-std::abs(z)));
    batch.per_sample[i] = l;
    total += l;
  }
  batch.mean = logits.empty() ? 0.0 : total / static_cast<double>(logits.size());
  return batch;
}

// Gradient of sum_i sample_weights_i * l_i + (weight_decay/2) * ||w||^2 by
// reverse accumulation, one sample at a time. dl/dz = sigmoid(z) - y.
inline std::vector<double> weighted_grad(const ModelParams& params, const Matrix& features,
                                         std::span<const int> labels,
                                         std::span<const double> sample_weights,
                                         double weight_decay) {
  detail::check_batch_shapes(params, features, labels);
  if (static_cast<int>(sample_weights.size()) != features.rows)
    throw ShapeMismatch("sample weight count does not match feature rows");
  if (weight_decay < 0.0) throw InvalidConfig("weight_decay must be >= 0");

  const std::vector<int> dims = params.arch.layer_dims(params.input_dim);
  const std::size_t num_layers = dims.size();
  std::vector<std::size_t> offsets(num_layers, 0);
  for (std::size_t l = 1; l + 1 < num_layers; ++l)
    offsets[l + 1] = offsets[l] + static_cast<std::size_t>(dims[l]) * dims[l - 1] + dims[l];

  std::vector<double> grad(params.weights.size(), 0.0);
  std::vector<std::vector<double>> z(num_layers), a(num_layers), delta(num_layers);
  for (int i = 0; i < features.rows; ++i) {
    const double s = sample_weights[i];
    if (s == 0.0) continue;
    const double logit = detail::forward_sample(params, features.row(i), dims, z, a);
    delta[num_layers - 1].assign(1, s * (detail::sigmoid(logit) - labels[i]));
    for (std::size_t l = num_layers - 1; l >= 1; --l) {
      const int in = dims[l - 1];
      const int out = dims[l];
      double* gw = grad.data() + offsets[l];
      double* gb = gw + static_cast<std::size_t>(out) * in;
      const double* w = params.weights.data() + offsets[l];
      for (int r = 0; r < out; ++r) {
        const double d = delta[l][r];
        double* grow = gw + static_cast<std::size_t>(r) * in;
        for (int c = 0; c < in; ++c) grow[c] += d * a[l - 1][c];
        gb[r] += d;
      }
      if (l == 1) break;
      delta[l - 1].assign(static_cast<std::size_t>(in), 0.0);
      for (int c = 0; c < in; ++c) {
        double acc = 0.0;
        for (int r = 0; r < out; ++r) acc += w[static_cast<std::size_t>(r) * in + c] * delta[l][r];
        delta[l - 1][c] = acc * detail::activate_grad(z[l - 1][c], params.arch.activation);
      }
    }
  }
  if (weight_decay > 0.0)
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += weight_decay * params.weights[k];
  return grad;
}

// Central-difference oracle for the same objective as weighted_grad.
inline std::vector<double> finite_diff_grad(const ModelParams& params, const Matrix& features,
                                            std::span<const int> labels,
                                            std::span<const double> sample_weights,
                                            double weight_decay, double step) {
  if (step <= 0.0) throw InvalidConfig("finite difference step must be > 0");
  auto objective = [&](const ModelParams& p) {
    const LossBatch batch = forward_loss(p, features, labels);
    double obj = 0.0;
    for (std::size_t i = 0; i < batch.per_sample.size(); ++i)
      obj += sample_weights[i] * batch.per_sample[i];
    double ridge = 0.0;
    for (double w : p.weights) ridge += w * w;
    return obj + 0.5 * weight_decay * ridge;
  };
  std::vector<double> grad(params.weights.size());
  ModelParams probe = params;
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    probe.weights[k] = params.weights[k] + step;
    const double up = objective(probe);
    probe.weights[k] = params.weights[k] - step;
    const double down = objective(probe);
    probe.weights[k] = params.weights[k];
    grad[k] = (up - down) / (2.0 * step);
  }
  return grad;
}

inline ModelParams sgd_step(const ModelParams& params, std::span<const double> gradient,
                            double eta_w) {
  if (gradient.size() != params.weights.size())
    throw ShapeMismatch("gradient length does not match weights");
  ModelParams next = params;
  for (std::size_t k = 0; k < next.weights.size(); ++k)
    next.weights[k] -= eta_w * gradient[k];
  return next;
}

// Threshold at logit zero; the tie at exactly zero predicts 1.
inline std::vector<int> predict(const ModelParams& params, const Matrix& features) {
  const std::vector<double> logits = forward_logits(params, features);
  std::vector<int> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] >= 0.0 ? 1 : 0;
  return out;
}

inline void save_params(const std::filesystem::path& path, const ModelParams& params) {
  params.validate();
  nlohmann::ordered_json doc;
  doc["kind"] = params.arch.kind == ModelKind::kLinear ? "linear" : "mlp";
  doc["hidden"] = params.arch.hidden;
  doc["activation"] = params.arch.activation == Activation::kRelu ? "relu" : "tanh";
  doc["input_dim"] = params.input_dim;
  doc["weights"] = params.weights;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

inline ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  ModelParams params;
  try {
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "linear")
      params.arch.kind = ModelKind::kLinear;
    else if (kind == "mlp")
      params.arch.kind = ModelKind::kMlp;
    else
      throw IoError("unknown model kind " + kind);
    params.arch.hidden = doc.at("hidden").get<std::vector<int>>();
    const std::string act = doc.at("activation").get<std::string>();
    if (act == "relu")
      params.arch.activation = Activation::kRelu;
    else if (act == "tanh")
      params.arch.activation = Activation::kTanh;
    else
      throw IoError("unknown activation " + act);
    params.input_dim = doc.at("input_dim").get<int>();
    params.weights = doc.at("weights").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  params.validate();
  return params;
}

}  // namespace wdro
