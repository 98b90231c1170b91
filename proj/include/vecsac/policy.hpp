#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "vecsac/approximator.hpp"
#include "vecsac/bounds.hpp"
#include "vecsac/common.hpp"
#include "vecsac/rng.hpp"

namespace vecsac {

// Actor network. One dense net maps observations through the trunk to a 2d
// head output z = [z_mu | z_logsigma]; sigma = exp(clip(z_logsigma)). The
// head blocks live in the final layer and are exposed as views.
template <class Scalar>
struct PolicyNet {
  MlpParams<Scalar> net;  // dims [obs, hidden..., 2d]
  Eigen::Index action_dim = 0;
  Scalar log_std_min = Scalar(-5);
  Scalar log_std_max = Scalar(2);

  auto mean_weights() { return net.weights.back().topRows(action_dim); }
  auto mean_weights() const { return net.weights.back().topRows(action_dim); }
  auto mean_bias() { return net.biases.back().head(action_dim); }
  auto mean_bias() const { return net.biases.back().head(action_dim); }
  auto log_std_weights() { return net.weights.back().bottomRows(action_dim); }
  auto log_std_weights() const { return net.weights.back().bottomRows(action_dim); }
  auto log_std_bias() { return net.biases.back().tail(action_dim); }
  auto log_std_bias() const { return net.biases.back().tail(action_dim); }
};

// Head outputs for one observation batch, cached for backprop.
template <class Scalar>
struct PolicyHeads {
  Matrix<Scalar> mu;           // [B x d]
  Matrix<Scalar> log_std_raw;  // [B x d], before clamping
  Matrix<Scalar> sigma;        // [B x d], exp(clamped)
};

template <class Scalar>
PolicyHeads<Scalar> policy_heads(const PolicyNet<Scalar>& p, const Matrix<Scalar>& obs) {
  const Matrix<Scalar> z = mlp_forward(p.net, obs);
  PolicyHeads<Scalar> h;
  h.mu = z.leftCols(p.action_dim);
  h.log_std_raw = z.rightCols(p.action_dim);
  h.sigma = h.log_std_raw.unaryExpr([&](Scalar v) {
    return std::exp(std::clamp(v, p.log_std_min, p.log_std_max));
  });
  return h;
}

// Trunk from fan-in defaults; mean head N(0, mean_init_std^2) weights with
// zero bias; log-std head zero weights with constant bias log(sigma0), so the
// initial exploration scale is state-independent and exactly sigma0.
template <class Scalar>
PolicyNet<Scalar> actor_init(const std::vector<int>& trunk_dims, int action_dim, Scalar sigma0,
                             Scalar mean_init_std, std::uint64_t seed,
                             Activation activation = Activation::kSiLU,
                             Scalar log_std_min = Scalar(-5), Scalar log_std_max = Scalar(2)) {
  check_config(trunk_dims.size() >= 1, "actor_init: need at least the input dim");
  check_config(action_dim > 0, "actor_init: action_dim must be positive");
  check_config(mean_init_std > Scalar(0), "actor_init: mean_init_std must be positive");
  check_config(sigma0 > std::exp(log_std_min) && sigma0 < std::exp(log_std_max),
               "actor_init: sigma0 outside the representable clamp range");

  std::vector<int> dims = trunk_dims;
  dims.push_back(2 * action_dim);

  PolicyNet<Scalar> p;
  p.net = mlp_init<Scalar>(dims, activation, seed);
  p.action_dim = action_dim;
  p.log_std_min = log_std_min;
  p.log_std_max = log_std_max;

  Rng rng(seed ^ 0xA5A5A5A5A5A5A5A5ULL);
  auto w_mu = p.mean_weights();
  for (Eigen::Index i = 0; i < w_mu.rows(); ++i)
    for (Eigen::Index j = 0; j < w_mu.cols(); ++j)
      w_mu(i, j) = Scalar(rng.normal()) * mean_init_std;
  p.mean_bias().setZero();
  p.log_std_weights().setZero();
  p.log_std_bias().setConstant(std::log(sigma0));
  return p;
}

// One batch of squashed samples: pre-tanh latents, env-unit actions strictly
// inside the bounds, per-sample log-probabilities, and the noise that
// produced them. log_prob is empty in deterministic mode.
template <class Scalar>
struct SquashedSampleBatch {
  Matrix<Scalar> pre_tanh;
  Matrix<Scalar> action;
  Matrix<Scalar> noise;
  Vector<Scalar> log_prob;
};

namespace detail {

// log pi from the change-of-variables formula:
//   sum_j log N(x_j; mu_j, sigma_j^2) - sum_j log(1 - tanh^2 x_j) - sum_j log c_j
// with log(1 - tanh^2 x) = 2 (log 2 - x - softplus(-2x)).
template <class Scalar>
Vector<Scalar> squashed_log_prob(const Matrix<Scalar>& mu, const Matrix<Scalar>& sigma,
                                 const Matrix<Scalar>& x, const Vector<Scalar>& c) {
  constexpr Scalar kHalfLog2Pi = Scalar(0.91893853320467274178L);
  constexpr Scalar kLog2 = Scalar(0.69314718055994530942L);
  Vector<Scalar> lp = Vector<Scalar>::Zero(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Scalar acc = Scalar(0);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const Scalar z = (x(i, j) - mu(i, j)) / sigma(i, j);
      acc += -Scalar(0.5) * z * z - std::log(sigma(i, j)) - kHalfLog2Pi;
      acc -= Scalar(2) * (kLog2 - x(i, j) - softplus(Scalar(-2) * x(i, j)));
      acc -= std::log(c(j));
    }
    lp(i) = acc;
  }
  return lp;
}

}  // namespace detail

// Squash a fixed noise matrix through the policy. Exposed so tests and the
// actor update can freeze the reparameterization noise.
template <class Scalar>
SquashedSampleBatch<Scalar> squash_with_noise(const PolicyNet<Scalar>& p,
                                              const Matrix<Scalar>& obs,
                                              const ActionBounds<Scalar>& bounds,
                                              const Matrix<Scalar>& noise) {
  check_shape(noise.rows() == obs.rows() && noise.cols() == p.action_dim,
              "squash_with_noise: noise shape mismatch");
  const PolicyHeads<Scalar> h = policy_heads(p, obs);
  SquashedSampleBatch<Scalar> s;
  s.noise = noise;
  s.pre_tanh = h.mu + h.sigma.cwiseProduct(noise);
  s.action.resize(s.pre_tanh.rows(), s.pre_tanh.cols());
  for (Eigen::Index i = 0; i < s.pre_tanh.rows(); ++i)
    for (Eigen::Index j = 0; j < s.pre_tanh.cols(); ++j)
      s.action(i, j) = bounds.b(j) + bounds.c(j) * std::tanh(s.pre_tanh(i, j));
  s.log_prob = detail::squashed_log_prob(h.mu, h.sigma, s.pre_tanh, bounds.c);
  if (!s.action.allFinite() || !s.log_prob.allFinite())
    throw DivergenceError("sample_action: non-finite policy outputs");
  return s;
}

// Draw actions. Stochastic mode reparameterizes x = mu + sigma .* eps with
// eps ~ N(0, I); deterministic mode squashes the mean and carries no
// log-probability.
template <class Scalar>
SquashedSampleBatch<Scalar> sample_action(const PolicyNet<Scalar>& p, const Matrix<Scalar>& obs,
                                          const ActionBounds<Scalar>& bounds, Rng& rng,
                                          bool deterministic = false) {
  check_shape(obs.cols() == p.net.input_dim(), "sample_action: obs width mismatch");
  if (deterministic) {
    const PolicyHeads<Scalar> h = policy_heads(p, obs);
    SquashedSampleBatch<Scalar> s;
    s.noise = Matrix<Scalar>::Zero(obs.rows(), p.action_dim);
    s.pre_tanh = h.mu;
    s.action.resize(h.mu.rows(), h.mu.cols());
    for (Eigen::Index i = 0; i < h.mu.rows(); ++i)
      for (Eigen::Index j = 0; j < h.mu.cols(); ++j)
        s.action(i, j) = bounds.b(j) + bounds.c(j) * std::tanh(h.mu(i, j));
    if (!s.action.allFinite()) throw DivergenceError("sample_action: non-finite policy outputs");
    return s;
  }
  const Matrix<Scalar> noise = normal_matrix<Scalar>(rng, obs.rows(), p.action_dim);
  return squash_with_noise(p, obs, bounds, noise);
}

// Log-probability of given pre-tanh latents under the current policy.
template <class Scalar>
Vector<Scalar> log_prob(const PolicyNet<Scalar>& p, const Matrix<Scalar>& obs,
                        const Matrix<Scalar>& pre_tanh, const ActionBounds<Scalar>& bounds) {
  check_shape(pre_tanh.rows() == obs.rows() && pre_tanh.cols() == p.action_dim,
              "log_prob: pre_tanh shape mismatch");
  const PolicyHeads<Scalar> h = policy_heads(p, obs);
  return detail::squashed_log_prob(h.mu, h.sigma, pre_tanh, bounds.c);
}

// Monte Carlo entropy estimate, -mean(log pi).
template <class Scalar>
Scalar entropy_estimate(const Vector<Scalar>& log_probs) {
  check_config(log_probs.size() > 0, "entropy_estimate: empty batch");
  return -log_probs.mean();
}

}  // namespace vecsac
