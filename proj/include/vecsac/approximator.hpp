#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "vecsac/common.hpp"
#include "vecsac/rng.hpp"

namespace vecsac {

enum class Activation { kSiLU, kElu, kRelu, kTanh, kIdentity };

inline std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kSiLU: return "silu";
    case Activation::kElu: return "elu";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "silu") return Activation::kSiLU;
  if (s == "elu") return Activation::kElu;
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  if (s == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation: " + s);
}

template <class Scalar>
Scalar activate(Activation act, Scalar z) {
  switch (act) {
    case Activation::kSiLU: return z / (Scalar(1) + std::exp(-z));
    case Activation::kElu: return z > Scalar(0) ? z : std::expm1(z);
    case Activation::kRelu: return z > Scalar(0) ? z : Scalar(0);
    case Activation::kTanh: return std::tanh(z);
    case Activation::kIdentity: return z;
  }
  return z;
}

template <class Scalar>
Scalar activate_grad(Activation act, Scalar z) {
  switch (act) {
    case Activation::kSiLU: {
      const Scalar s = Scalar(1) / (Scalar(1) + std::exp(-z));
      return s * (Scalar(1) + z * (Scalar(1) - s));
    }
    case Activation::kElu: return z > Scalar(0) ? Scalar(1) : std::exp(z);
    case Activation::kRelu: return z > Scalar(0) ? Scalar(1) : Scalar(0);
    case Activation::kTanh: {
      const Scalar t = std::tanh(z);
      return Scalar(1) - t * t;
    }
    case Activation::kIdentity: return Scalar(1);
  }
  return Scalar(1);
}

// Dense network: weights [out x in], activation on every hidden layer,
// linear output layer.
template <class Scalar>
struct MlpParams {
  std::vector<Matrix<Scalar>> weights;
  std::vector<Vector<Scalar>> biases;
  Activation activation = Activation::kSiLU;

  Eigen::Index input_dim() const { return weights.front().cols(); }
  Eigen::Index output_dim() const { return weights.back().rows(); }
  std::size_t layer_count() const { return weights.size(); }

  bool finite() const {
    for (const auto& w : weights)
      if (!w.allFinite()) return false;
    for (const auto& b : biases)
      if (!b.allFinite()) return false;
    return true;
  }
};

// Per-parameter gradients (or Adam moments), shape-matching an MlpParams.
template <class Scalar>
struct GradBundle {
  std::vector<Matrix<Scalar>> weights;
  std::vector<Vector<Scalar>> biases;

  static GradBundle zeros_like(const MlpParams<Scalar>& p) {
    GradBundle g;
    g.weights.reserve(p.weights.size());
    g.biases.reserve(p.biases.size());
    for (const auto& w : p.weights) g.weights.push_back(Matrix<Scalar>::Zero(w.rows(), w.cols()));
    for (const auto& b : p.biases) g.biases.push_back(Vector<Scalar>::Zero(b.size()));
    return g;
  }

  bool finite() const {
    for (const auto& w : weights)
      if (!w.allFinite()) return false;
    for (const auto& b : biases)
      if (!b.allFinite()) return false;
    return true;
  }

  Scalar squared_norm() const {
    Scalar s = Scalar(0);
    for (const auto& w : weights) s += w.squaredNorm();
    for (const auto& b : biases) s += b.squaredNorm();
    return s;
  }

  void scale(Scalar k) {
    for (auto& w : weights) w *= k;
    for (auto& b : biases) b *= k;
  }
};

// Fan-in-scaled uniform weights in [-sqrt(6/fan_in), sqrt(6/fan_in)], zero
// biases. Deterministic for a given seed.
template <class Scalar>
MlpParams<Scalar> mlp_init(const std::vector<int>& layer_dims, Activation activation,
                           std::uint64_t seed) {
  check_config(layer_dims.size() >= 2, "mlp_init: need at least input and output dims");
  for (int d : layer_dims) check_config(d > 0, "mlp_init: layer dims must be positive");

  Rng rng(seed);
  MlpParams<Scalar> p;
  p.activation = activation;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int in = layer_dims[l];
    const int out = layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / double(in));
    Matrix<Scalar> w(out, in);
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) w(i, j) = Scalar(rng.uniform(-limit, limit));
    p.weights.push_back(std::move(w));
    p.biases.push_back(Vector<Scalar>::Zero(out));
  }
  return p;
}

// Forward pass over a [B x in] batch; returns [B x out].
template <class Scalar>
Matrix<Scalar> mlp_forward(const MlpParams<Scalar>& p, const Matrix<Scalar>& inputs) {
  check_shape(inputs.cols() == p.input_dim(), "mlp_forward: input width mismatch");
  Matrix<Scalar> x = inputs;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    Matrix<Scalar> z = (x * p.weights[l].transpose()).rowwise() + p.biases[l].transpose();
    if (l + 1 < p.weights.size()) {
      x = z.unaryExpr([&](Scalar v) { return activate(p.activation, v); });
    } else {
      x = std::move(z);
    }
  }
  return x;
}

// Reverse-mode gradients of sum(upstream .* output) w.r.t. parameters and
// inputs. Recomputes the forward pass to build the caches.
template <class Scalar>
std::pair<GradBundle<Scalar>, Matrix<Scalar>> mlp_backward(const MlpParams<Scalar>& p,
                                                           const Matrix<Scalar>& inputs,
                                                           const Matrix<Scalar>& upstream) {
  check_shape(inputs.cols() == p.input_dim(), "mlp_backward: input width mismatch");
  check_shape(upstream.cols() == p.output_dim() && upstream.rows() == inputs.rows(),
              "mlp_backward: upstream shape mismatch");

  const std::size_t layers = p.weights.size();
  std::vector<Matrix<Scalar>> layer_inputs(layers);  // post-activation input to layer l
  std::vector<Matrix<Scalar>> pre_acts(layers);      // z_l before activation

  Matrix<Scalar> x = inputs;
  for (std::size_t l = 0; l < layers; ++l) {
    layer_inputs[l] = x;
    pre_acts[l] = (x * p.weights[l].transpose()).rowwise() + p.biases[l].transpose();
    if (l + 1 < layers) {
      x = pre_acts[l].unaryExpr([&](Scalar v) { return activate(p.activation, v); });
    }
  }

  GradBundle<Scalar> grads = GradBundle<Scalar>::zeros_like(p);
  Matrix<Scalar> g = upstream;  // gradient w.r.t. layer output (post-activation)
  for (std::size_t l = layers; l-- > 0;) {
    Matrix<Scalar> gz;  // gradient w.r.t. pre-activation z_l
    if (l + 1 < layers) {
      gz = g.cwiseProduct(
          pre_acts[l].unaryExpr([&](Scalar v) { return activate_grad(p.activation, v); }));
    } else {
      gz = std::move(g);
    }
    grads.weights[l] = gz.transpose() * layer_inputs[l];
    grads.biases[l] = gz.colwise().sum().transpose();
    g = gz * p.weights[l];
  }
  return {std::move(grads), std::move(g)};
}

// Adam accumulators plus hyperparameters for one network.
template <class Scalar>
struct AdamState {
  GradBundle<Scalar> m;
  GradBundle<Scalar> v;
  std::int64_t t = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
  Scalar lr = Scalar(1e-3);

  static AdamState make(const MlpParams<Scalar>& p, Scalar lr) {
    AdamState s;
    s.m = GradBundle<Scalar>::zeros_like(p);
    s.v = GradBundle<Scalar>::zeros_like(p);
    s.lr = lr;
    return s;
  }
};

// Scale so the joint norm across every parameter of the network does not
// exceed max_norm; returns the factor applied (1 when under the cap).
template <class Scalar>
Scalar clip_global_norm(GradBundle<Scalar>& grads, Scalar max_norm) {
  const Scalar norm = std::sqrt(grads.squared_norm());
  if (norm <= max_norm || norm == Scalar(0)) return Scalar(1);
  const Scalar k = max_norm / norm;
  grads.scale(k);
  return k;
}

namespace detail {

template <class Scalar, class M>
void adam_apply(M& param, const M& grad, M& m, M& v, Scalar lr_t, Scalar beta1, Scalar beta2,
                Scalar eps) {
  m = beta1 * m + (Scalar(1) - beta1) * grad;
  v = (beta2 * v).eval();
  v.array() += (Scalar(1) - beta2) * grad.array().square();
  param.array() -= lr_t * m.array() / (v.array().sqrt() + eps);
}

}  // namespace detail

// Global-norm clip followed by one bias-corrected Adam step.
template <class Scalar>
void adam_step(MlpParams<Scalar>& params, GradBundle<Scalar> grads, AdamState<Scalar>& state,
               Scalar max_grad_norm) {
  check_config(max_grad_norm > Scalar(0), "adam_step: max_grad_norm must be positive");
  if (!grads.finite()) throw DivergenceError("adam_step: non-finite gradients");

  clip_global_norm(grads, max_grad_norm);
  state.t += 1;
  // Fold both bias corrections into the step size.
  const Scalar bc1 = Scalar(1) - std::pow(state.beta1, Scalar(state.t));
  const Scalar bc2 = Scalar(1) - std::pow(state.beta2, Scalar(state.t));
  const Scalar lr_t = state.lr * std::sqrt(bc2) / bc1;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    detail::adam_apply(params.weights[l], grads.weights[l], state.m.weights[l],
                       state.v.weights[l], lr_t, state.beta1, state.beta2, state.eps);
    detail::adam_apply(params.biases[l], grads.biases[l], state.m.biases[l], state.v.biases[l],
                       lr_t, state.beta1, state.beta2, state.eps);
  }
  if (!params.finite()) throw DivergenceError("adam_step: parameters diverged");
}

// Scalar Adam, used for the temperature variable.
template <class Scalar>
struct ScalarAdam {
  Scalar m = Scalar(0);
  Scalar v = Scalar(0);
  std::int64_t t = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
  Scalar lr = Scalar(1e-3);

  void step(Scalar& param, Scalar grad, Scalar max_grad_norm) {
    if (!std::isfinite(grad)) throw DivergenceError("scalar adam: non-finite gradient");
    if (std::abs(grad) > max_grad_norm) grad = grad > 0 ? max_grad_norm : -max_grad_norm;
    t += 1;
    m = beta1 * m + (Scalar(1) - beta1) * grad;
    v = beta2 * v + (Scalar(1) - beta2) * grad * grad;
    const Scalar mh = m / (Scalar(1) - std::pow(beta1, Scalar(t)));
    const Scalar vh = v / (Scalar(1) - std::pow(beta2, Scalar(t)));
    param -= lr * mh / (std::sqrt(vh) + eps);
  }
};

// ---- finite-difference checking ------------------------------------------

// Flatten parameters into one vector (row-major per weight matrix, weights
// then bias per layer). Order is the contract the FD checker relies on.
template <class Scalar>
std::vector<Scalar> flatten_params(const MlpParams<Scalar>& p) {
  std::vector<Scalar> out;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const auto& w = p.weights[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) out.push_back(w(i, j));
    for (Eigen::Index i = 0; i < p.biases[l].size(); ++i) out.push_back(p.biases[l](i));
  }
  return out;
}

template <class Scalar>
void unflatten_params(MlpParams<Scalar>& p, const std::vector<Scalar>& flat) {
  std::size_t k = 0;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    auto& w = p.weights[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = flat[k++];
    for (Eigen::Index i = 0; i < p.biases[l].size(); ++i) p.biases[l](i) = flat[k++];
  }
}

template <class Scalar>
std::vector<Scalar> flatten_grads(const GradBundle<Scalar>& g) {
  std::vector<Scalar> out;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    const auto& w = g.weights[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) out.push_back(w(i, j));
    for (Eigen::Index i = 0; i < g.biases[l].size(); ++i) out.push_back(g.biases[l](i));
  }
  return out;
}

// Central finite differences of an arbitrary scalar function of a flat
// parameter vector.
template <class Scalar>
std::vector<Scalar> numeric_gradient(const std::function<Scalar(const std::vector<Scalar>&)>& f,
                                     std::vector<Scalar> x, Scalar h) {
  std::vector<Scalar> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Scalar orig = x[i];
    x[i] = orig + h;
    const Scalar fp = f(x);
    x[i] = orig - h;
    const Scalar fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (Scalar(2) * h);
  }
  return g;
}

// Max relative error between two gradient vectors; the denominator is
// floored so near-zero entries compare absolutely.
template <class Scalar>
Scalar max_rel_error(const std::vector<Scalar>& a, const std::vector<Scalar>& b,
                     Scalar floor = Scalar(1e-6)) {
  check_shape(a.size() == b.size(), "max_rel_error: size mismatch");
  Scalar worst = Scalar(0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Scalar denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace vecsac
