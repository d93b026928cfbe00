#pragma once

// Minimal dense network core: fully connected layers with optional ReLU and
// inverted dropout, reverse-mode gradients, Adam, L2 penalty and the
// pairwise hinge loss. Everything is 64-bit floating point.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vitor/common.hpp"

namespace vitor::nn {

enum class Activation : std::uint8_t { identity = 0, relu = 1 };
enum class Mode { train, eval };

struct DenseLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> weights;  // out_dim x in_dim, row-major
  std::vector<double> biases;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out) : in_dim(in), out_dim(out), weights(in * out, 0.0), biases(out, 0.0) {
    if (in == 0 || out == 0) throw Error("dense layer dimensions must be positive");
  }

  std::size_t parameter_count() const { return in_dim * out_dim + out_dim; }

  // Glorot uniform in +-sqrt(6/(in+out)); biases zero.
  void glorot_init(Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
    for (auto& w : weights) w = rng.uniform(-limit, limit);
    std::fill(biases.begin(), biases.end(), 0.0);
  }

  bool operator==(const DenseLayer&) const = default;
};

// dense -> activation -> dropout
struct Layer {
  DenseLayer dense;
  Activation activation = Activation::identity;
  double dropout = 0.0;

  bool operator==(const Layer&) const = default;
};

struct LayerGradient {
  std::vector<double> weights;
  std::vector<double> biases;
};

using Gradients = std::vector<LayerGradient>;

// Per-layer values recorded by a forward pass; enough for the backward pass.
struct Tape {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre_activations;
  std::vector<std::vector<double>> dropout_scale;  // empty when no dropout was applied
};

class Network {
 public:
  Network() = default;

  void add(DenseLayer dense, Activation act, double dropout = 0.0) {
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("dropout rate must be in [0,1)");
    if (!layers_.empty() && layers_.back().dense.out_dim != dense.in_dim)
      throw Error("dimension mismatch: layer expects " + std::to_string(dense.in_dim) + " inputs, previous layer emits " +
                  std::to_string(layers_.back().dense.out_dim));
    layers_.push_back({std::move(dense), act, dropout});
  }

  bool empty() const { return layers_.empty(); }
  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().dense.in_dim; }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().dense.out_dim; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.dense.parameter_count();
    return n;
  }

  void glorot_init(Rng& rng) {
    for (auto& l : layers_) l.dense.glorot_init(rng);
  }

  // Train mode draws one Bernoulli per unit of every layer with nonzero
  // dropout; survivors are scaled by 1/(1-p). Eval mode never touches rng.
  std::vector<double> forward(std::span<const double> input, Mode mode, Rng* rng = nullptr, Tape* tape = nullptr) const {
    if (input.size() != input_dim())
      throw Error("dimension mismatch: network expects " + std::to_string(input_dim()) + " inputs, got " +
                  std::to_string(input.size()));
    if (tape) {
      tape->inputs.clear();
      tape->pre_activations.clear();
      tape->dropout_scale.clear();
    }
    std::vector<double> x(input.begin(), input.end());
    for (const auto& layer : layers_) {
      const auto& d = layer.dense;
      std::vector<double> z(d.out_dim);
      for (std::size_t o = 0; o < d.out_dim; ++o) {
        const double* w = &d.weights[o * d.in_dim];
        double acc = d.biases[o];
        for (std::size_t i = 0; i < d.in_dim; ++i) acc += w[i] * x[i];
        z[o] = acc;
      }
      std::vector<double> y = z;
      if (layer.activation == Activation::relu)
        for (auto& v : y) v = v > 0.0 ? v : 0.0;
      std::vector<double> scale;
      if (mode == Mode::train && layer.dropout > 0.0) {
        if (!rng) throw Error("train-mode dropout requires a random generator");
        const double keep_scale = 1.0 / (1.0 - layer.dropout);
        scale.resize(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
          scale[i] = rng->uniform() < layer.dropout ? 0.0 : keep_scale;
          y[i] *= scale[i];
        }
      }
      if (tape) {
        tape->inputs.push_back(std::move(x));
        tape->pre_activations.push_back(std::move(z));
        tape->dropout_scale.push_back(std::move(scale));
      }
      x = std::move(y);
    }
    return x;
  }

  Gradients zero_gradients() const {
    Gradients g(layers_.size());
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      g[k].weights.assign(layers_[k].dense.weights.size(), 0.0);
      g[k].biases.assign(layers_[k].dense.biases.size(), 0.0);
    }
    return g;
  }

  // Accumulates dL/dparams into `grads` given dL/doutput. ReLU's derivative
  // at exactly zero is taken as 0. Optionally returns dL/dinput.
  void backward(const Tape& tape, std::span<const double> grad_output, Gradients& grads,
                std::vector<double>* grad_input = nullptr) const {
    if (tape.inputs.size() != layers_.size()) throw Error("tape does not belong to this network");
    if (grad_output.size() != output_dim()) throw Error("dimension mismatch in output gradient");
    std::vector<double> g(grad_output.begin(), grad_output.end());
    for (std::size_t k = layers_.size(); k-- > 0;) {
      const auto& layer = layers_[k];
      const auto& d = layer.dense;
      const auto& scale = tape.dropout_scale[k];
      const auto& z = tape.pre_activations[k];
      const auto& x = tape.inputs[k];
      if (!scale.empty())
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= scale[i];
      if (layer.activation == Activation::relu)
        for (std::size_t i = 0; i < g.size(); ++i)
          if (!(z[i] > 0.0)) g[i] = 0.0;
      auto& lg = grads[k];
      std::vector<double> gx(d.in_dim, 0.0);
      for (std::size_t o = 0; o < d.out_dim; ++o) {
        const double go = g[o];
        if (go == 0.0) continue;
        lg.biases[o] += go;
        double* gw = &lg.weights[o * d.in_dim];
        const double* w = &d.weights[o * d.in_dim];
        for (std::size_t i = 0; i < d.in_dim; ++i) {
          gw[i] += go * x[i];
          gx[i] += go * w[i];
        }
      }
      g = std::move(gx);
    }
    if (grad_input) *grad_input = std::move(g);
  }

  bool operator==(const Network&) const = default;

 private:
  std::vector<Layer> layers_;
};

// ---- flat parameter views ----------------------------------------------------

// Parameters in declaration order: for each layer, weights then biases.
inline void append_parameter_views(Network& net, std::vector<std::span<double>>& out) {
  for (auto& l : net.layers()) {
    out.emplace_back(l.dense.weights);
    out.emplace_back(l.dense.biases);
  }
}

inline void append_gradient_views(const Gradients& grads, std::vector<std::span<const double>>& out) {
  for (const auto& g : grads) {
    out.emplace_back(g.weights);
    out.emplace_back(g.biases);
  }
}

// ---- loss pieces ------------------------------------------------------------

inline double pairwise_hinge_loss(double s_pos, double s_neg, double margin = 1.0) {
  return std::max(0.0, margin - (s_pos - s_neg));
}

// d loss / d s_pos; d loss / d s_neg is its negation. Zero at the kink.
inline double pairwise_hinge_grad(double s_pos, double s_neg, double margin = 1.0) {
  return margin - (s_pos - s_neg) > 0.0 ? -1.0 : 0.0;
}

// Sum of squared weights (biases excluded).
inline double l2_penalty(const Network& net) {
  double s = 0.0;
  for (const auto& l : net.layers())
    for (double w : l.dense.weights) s += w * w;
  return s;
}

// Adds d(lambda * sum w^2)/dw = 2 lambda w.
inline void add_l2_gradient(const Network& net, Gradients& grads, double lambda) {
  const auto& layers = net.layers();
  for (std::size_t k = 0; k < layers.size(); ++k)
    for (std::size_t i = 0; i < layers[k].dense.weights.size(); ++i)
      grads[k].weights[i] += 2.0 * lambda * layers[k].dense.weights[i];
}

// ---- Adam ----------------------------------------------------------------------

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

inline void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
                      AdamState& state) {
  if (params.size() != grads.size()) throw Error("adam: parameter/gradient count mismatch");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
      state.m[k].assign(params[k].size(), 0.0);
      state.v[k].assign(params[k].size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw Error("adam: state shape mismatch");
  ++state.t;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k];
    auto g = grads[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (p.size() != g.size() || m.size() != p.size()) throw Error("adam: shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

// ---- parameter accounting -------------------------------------------------------

enum class LayerKind { conv, batchnorm, dense };

// One row of a parameter table. conv: kernel x kernel x in -> out, with an
// optional per-output bias. batchnorm: a learned scale and shift per channel
// (in == out). dense: in -> out with bias.
struct ParamRow {
  LayerKind kind = LayerKind::dense;
  std::size_t kernel = 1;
  std::size_t in = 0;
  std::size_t out = 0;
  bool bias = true;
};

inline std::size_t count_parameters(const ParamRow& row) {
  switch (row.kind) {
    case LayerKind::conv:
      return row.kernel * row.kernel * row.in * row.out + (row.bias ? row.out : 0);
    case LayerKind::batchnorm:
      return 2 * row.out;
    case LayerKind::dense:
      return row.in * row.out + row.out;
  }
  return 0;
}

inline std::size_t count_parameters(std::span<const ParamRow> rows) {
  std::size_t n = 0;
  for (const auto& r : rows) n += count_parameters(r);
  return n;
}

}  // namespace vitor::nn
