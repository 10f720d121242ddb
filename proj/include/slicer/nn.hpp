#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "slicer/rng.hpp"

namespace slicer {

/// Dense feed-forward topology: ReLU on hidden layers, linear output.
struct MlpArchitecture {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden{128, 64};
  std::size_t output_dim = 1;

  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w;
    w.reserve(hidden.size() + 2);
    w.push_back(input_dim);
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(output_dim);
    return w;
  }

  std::size_t num_layers() const { return hidden.size() + 1; }

  std::size_t param_count() const {
    const auto w = widths();
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) n += (w[l] + 1) * w[l + 1];
    return n;
  }

  void validate() const {
    if (input_dim < 1 || output_dim < 1)
      throw std::invalid_argument("MlpArchitecture: dimensions must be >= 1");
    for (auto h : hidden)
      if (h < 1) throw std::invalid_argument("MlpArchitecture: hidden widths must be >= 1");
  }

  bool operator==(const MlpArchitecture&) const = default;
};

/// An MLP as one flat parameter vector. Layer-major order: for each layer
/// the weight matrix (row per output unit) followed by its bias vector.
class Mlp {
 public:
  /// Activations of every layer from one forward pass, input first.
  struct Tape {
    std::vector<std::vector<double>> activations;
  };

  Mlp() = default;

  explicit Mlp(MlpArchitecture arch) : arch_(std::move(arch)) {
    arch_.validate();
    params_.assign(arch_.param_count(), 0.0);
  }

  /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  static Mlp initialized(MlpArchitecture arch, Rng& rng) {
    Mlp m(std::move(arch));
    const auto w = m.arch_.widths();
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(w[l]));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (std::size_t i = 0; i < w[l] * w[l + 1]; ++i) m.params_[off + i] = u(rng);
      off += (w[l] + 1) * w[l + 1];
    }
    return m;
  }

  const MlpArchitecture& arch() const { return arch_; }
  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }

  std::vector<double> export_params() const { return params_; }

  void import_params(std::span<const double> flat) {
    if (flat.size() != params_.size())
      throw std::invalid_argument("import_params: expected " + std::to_string(params_.size()) +
                                  " values, got " + std::to_string(flat.size()));
    params_.assign(flat.begin(), flat.end());
  }

  std::vector<double> forward(std::span<const double> input) const {
    Tape tape;
    return forward(input, tape);
  }

  std::vector<double> forward(std::span<const double> input, Tape& tape) const {
    if (input.size() != arch_.input_dim)
      throw std::invalid_argument("Mlp::forward: input has " + std::to_string(input.size()) +
                                  " values, expected " + std::to_string(arch_.input_dim));
    const auto w = arch_.widths();
    tape.activations.resize(w.size());
    tape.activations[0].assign(input.begin(), input.end());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
      const std::size_t in = w[l], out = w[l + 1];
      const double* W = params_.data() + off;
      const double* b = W + in * out;
      const auto& x = tape.activations[l];
      auto& y = tape.activations[l + 1];
      y.resize(out);
      const bool hidden = l + 2 < w.size();
      for (std::size_t o = 0; o < out; ++o) {
        const double* row = W + o * in;
        double acc = b[o];
        for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
        y[o] = hidden ? std::max(0.0, acc) : acc;
      }
      off += (in + 1) * out;
    }
    return tape.activations.back();
  }

  /// Adds d(output . upstream)/d(params) for the pass recorded in `tape` to `grad`.
  void accumulate_gradient(const Tape& tape, std::span<const double> upstream,
                           std::span<double> grad) const {
    if (upstream.size() != arch_.output_dim)
      throw std::invalid_argument("Mlp::backward: upstream gradient has wrong length");
    if (grad.size() != params_.size())
      throw std::invalid_argument("Mlp::backward: gradient buffer has wrong length");
    const auto w = arch_.widths();
    if (tape.activations.size() != w.size())
      throw std::invalid_argument("Mlp::backward: tape does not match architecture");
    std::vector<std::size_t> offsets(w.size() - 1);
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
      offsets[l] = off;
      off += (w[l] + 1) * w[l + 1];
    }
    std::vector<double> delta(upstream.begin(), upstream.end());
    std::vector<double> prev;
    for (std::size_t l = w.size() - 1; l-- > 0;) {
      const std::size_t in = w[l], out = w[l + 1];
      const double* W = params_.data() + offsets[l];
      double* gW = grad.data() + offsets[l];
      double* gb = gW + in * out;
      const auto& x = tape.activations[l];
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        double* grow = gW + o * in;
        for (std::size_t i = 0; i < in; ++i) grow[i] += d * x[i];
        gb[o] += d;
      }
      if (l == 0) break;
      prev.assign(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* row = W + o * in;
        for (std::size_t i = 0; i < in; ++i) prev[i] += d * row[i];
      }
      // ReLU derivative of the layer that produced x.
      for (std::size_t i = 0; i < in; ++i)
        if (x[i] <= 0.0) prev[i] = 0.0;
      delta.swap(prev);
    }
  }

  std::vector<double> backward(std::span<const double> input,
                               std::span<const double> upstream) const {
    Tape tape;
    forward(input, tape);
    std::vector<double> grad(params_.size(), 0.0);
    accumulate_gradient(tape, upstream, grad);
    return grad;
  }

 private:
  MlpArchitecture arch_;
  std::vector<double> params_;
};

using PolicyModel = Mlp;

struct AdamState {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_stab = 1e-8;
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n, double learning_rate = 3e-4)
      : lr(learning_rate), m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam descent step on `params` along `grads`.
inline void adam_step(AdamState& s, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: params and grads differ in length");
  if (s.m.empty() && s.v.empty()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  if (s.m.size() != params.size() || s.v.size() != params.size())
    throw std::invalid_argument("adam_step: moment vectors differ in length from params");
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    params[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps_stab);
  }
}

inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += (p[i] = std::exp(logits[i] - mx));
  for (auto& x : p) x /= z;
  return p;
}

inline std::vector<double> log_softmax(std::span<const double> logits) {
  std::vector<double> lp(logits.size());
  if (logits.empty()) return lp;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double lz = mx + std::log(z);
  for (std::size_t i = 0; i < logits.size(); ++i) lp[i] = logits[i] - lz;
  return lp;
}

inline std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

struct SampledAction {
  std::size_t index = 0;
  double log_prob = 0.0;
};

inline SampledAction softmax_sample(std::span<const double> logits, Rng& rng) {
  const auto lp = log_softmax(logits);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  double acc = 0.0;
  std::size_t pick = lp.size() - 1;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    acc += std::exp(lp[i]);
    if (r < acc) {
      pick = i;
      break;
    }
  }
  return {pick, lp[pick]};
}

}  // namespace slicer
