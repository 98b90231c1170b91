#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "vecsac/approximator.hpp"
#include "vecsac/bounds.hpp"
#include "vecsac/common.hpp"
#include "vecsac/policy.hpp"
#include "vecsac/replay.hpp"
#include "vecsac/rng.hpp"

namespace vecsac {

template <class Scalar>
struct SacConfig {
  Scalar gamma = Scalar(0.97);
  Scalar tau = Scalar(0.003);
  int nstep = 5;
  int policy_update_period = 1;
  Scalar actor_lr = Scalar(2e-4);
  Scalar critic_lr = Scalar(2e-4);
  Scalar temperature_lr = Scalar(2e-5);
  int batch_size = 8192;
  int updates_per_iteration = 200;
  Scalar target_entropy_scale = Scalar(0.167);
  Scalar sigma0 = Scalar(0.15);
  Scalar mean_init_std = Scalar(0.01);
  Scalar max_grad_norm = Scalar(1);
  Scalar initial_temperature = Scalar(0.001);
  bool auto_temperature = true;
  bool timeout_bootstrap = true;
  Scalar loss_ceiling = Scalar(1e6);

  void validate() const {
    check_config(gamma > Scalar(0) && gamma < Scalar(1), "SacConfig: gamma must be in (0,1)");
    check_config(tau > Scalar(0) && tau <= Scalar(1), "SacConfig: tau must be in (0,1]");
    check_config(nstep >= 1, "SacConfig: n must be >= 1");
    check_config(policy_update_period >= 1, "SacConfig: policy update period must be >= 1");
    check_config(batch_size > 0 && updates_per_iteration >= 0, "SacConfig: bad batch settings");
    check_config(max_grad_norm > Scalar(0), "SacConfig: max_grad_norm must be > 0");
    check_config(initial_temperature > Scalar(0), "SacConfig: initial temperature must be > 0");
  }
};

// Two online Q-networks with exponential-moving-average target copies.
template <class Scalar>
struct CriticEnsemble {
  std::vector<MlpParams<Scalar>> online;
  std::vector<MlpParams<Scalar>> target;
  Scalar tau = Scalar(0.003);

  int size() const { return int(online.size()); }
};

inline constexpr int kNumCritics = 2;

template <class Scalar>
CriticEnsemble<Scalar> make_critics(int obs_dim, int act_dim, const std::vector<int>& hidden,
                                    Activation activation, Scalar tau, std::uint64_t seed) {
  std::vector<int> dims;
  dims.push_back(obs_dim + act_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  CriticEnsemble<Scalar> c;
  c.tau = tau;
  for (int i = 0; i < kNumCritics; ++i) {
    c.online.push_back(mlp_init<Scalar>(dims, activation, seed + std::uint64_t(i) * 7919));
    c.target.push_back(c.online.back());
  }
  return c;
}

// Trainable temperature: alpha = exp(log_alpha) stays positive by
// construction.
template <class Scalar>
struct Temperature {
  Scalar log_alpha = Scalar(0);
  Scalar target_entropy = Scalar(0);
  ScalarAdam<Scalar> adam;

  Scalar alpha() const { return std::exp(log_alpha); }
};

template <class Scalar>
Temperature<Scalar> make_temperature(Scalar initial_alpha, Scalar target_entropy, Scalar lr) {
  check_config(initial_alpha > Scalar(0), "make_temperature: initial alpha must be > 0");
  Temperature<Scalar> t;
  t.log_alpha = std::log(initial_alpha);
  t.target_entropy = target_entropy;
  t.adam.lr = lr;
  return t;
}

// m = b + 1 - d: running episodes and timeouts bootstrap, failures do not.
template <class Scalar>
Vector<Scalar> bootstrap_mask(const FlagVector& done, const FlagVector& timeout) {
  check_shape(done.size() == timeout.size(), "bootstrap_mask: size mismatch");
  Vector<Scalar> m(done.size());
  for (Eigen::Index i = 0; i < done.size(); ++i) {
    check_config(!(timeout(i) && !done(i)), "bootstrap_mask: timeout without done");
    m(i) = Scalar(timeout(i)) + Scalar(1) - Scalar(done(i));
  }
  return m;
}

template <class Scalar>
Matrix<Scalar> concat_obs_action(const Matrix<Scalar>& obs, const Matrix<Scalar>& action) {
  check_shape(obs.rows() == action.rows(), "concat_obs_action: batch mismatch");
  Matrix<Scalar> x(obs.rows(), obs.cols() + action.cols());
  x.leftCols(obs.cols()) = obs;
  x.rightCols(action.cols()) = action;
  return x;
}

// min_i Q_i over the given networks at (s, a).
template <class Scalar>
Vector<Scalar> min_q(const std::vector<MlpParams<Scalar>>& critics, const Matrix<Scalar>& obs,
                     const Matrix<Scalar>& action) {
  const Matrix<Scalar> x = concat_obs_action(obs, action);
  Vector<Scalar> q = mlp_forward(critics[0], x).col(0);
  for (std::size_t i = 1; i < critics.size(); ++i)
    q = q.cwiseMin(mlp_forward(critics[i], x).col(0));
  return q;
}

// Entropy-regularized state value under the target critics: one fresh action
// sample from the current policy per state, min over the ensemble, minus
// alpha log pi. Recomputed at call time, never cached in the buffer.
template <class Scalar>
Vector<Scalar> soft_value(const PolicyNet<Scalar>& policy, const CriticEnsemble<Scalar>& critics,
                          const Matrix<Scalar>& obs, const ActionBounds<Scalar>& bounds,
                          Scalar alpha, Rng& rng) {
  const SquashedSampleBatch<Scalar> s = sample_action(policy, obs, bounds, rng, false);
  Vector<Scalar> v = min_q(critics.target, obs, s.action) - alpha * s.log_prob;
  if (!v.allFinite()) throw DivergenceError("soft_value: non-finite values");
  return v;
}

// Masked n-step combination given precomputed per-step values V(i, k) for
// the corrected next observation after step t+k. Vectorized over the batch;
// must agree with oracle_nstep_target to machine precision.
template <class Scalar>
Vector<Scalar> nstep_combine(const Matrix<Scalar>& rewards, const FlagMatrix& done,
                             const FlagMatrix& timeout, const Matrix<Scalar>& values,
                             Scalar gamma) {
  const Eigen::Index batch = rewards.rows();
  const Eigen::Index n = rewards.cols();
  check_shape(done.rows() == batch && done.cols() == n && timeout.rows() == batch &&
                  timeout.cols() == n && values.rows() == batch && values.cols() == n,
              "nstep_combine: shape mismatch");

  Vector<Scalar> target = Vector<Scalar>::Zero(batch);
  Vector<Scalar> survival = Vector<Scalar>::Ones(batch);
  Scalar discount = Scalar(1);
  for (Eigen::Index k = 0; k < n; ++k) {
    target.array() += discount * survival.array() * rewards.col(k).array();
    target.array() += discount * gamma * survival.array() *
                      timeout.col(k).cast<Scalar>().array() * values.col(k).array();
    survival.array() *= Scalar(1) - done.col(k).cast<Scalar>().array();
    discount *= gamma;
  }
  target.array() += discount * survival.array() * values.col(n - 1).array();
  return target;
}

// Batched timeout-aware n-step targets for a sampled window batch whose
// observations have already been normalized. For n = 1 this reduces to
// r + gamma * m * V(s'). Values for the whole [B x n] grid come from one
// soft_value call over the flattened next-observation matrix, so the RNG
// draw order is a fixed contract.
template <class Scalar>
Vector<Scalar> nstep_targets(const PolicyNet<Scalar>& policy,
                             const CriticEnsemble<Scalar>& critics,
                             const ActionBounds<Scalar>& bounds, Scalar alpha, Scalar gamma,
                             const Matrix<Scalar>& rewards, const FlagMatrix& done,
                             const FlagMatrix& timeout, const Matrix<Scalar>& next_obs_flat,
                             Rng& rng) {
  const Eigen::Index batch = rewards.rows();
  const Eigen::Index n = rewards.cols();
  check_shape(next_obs_flat.rows() == batch * n, "nstep_targets: flattened grid mismatch");

  const Vector<Scalar> flat_values = soft_value(policy, critics, next_obs_flat, bounds, alpha, rng);
  Matrix<Scalar> values(batch, n);
  for (Eigen::Index i = 0; i < batch; ++i)
    for (Eigen::Index k = 0; k < n; ++k) values(i, k) = flat_values(i * n + k);
  return nstep_combine(rewards, done, timeout, values, gamma);
}

// One Adam step per critic on the soft Bellman residual against fixed
// targets. Returns the pre-step loss (1/N) sum_i mean((Q_i - y)^2).
template <class Scalar>
Scalar critic_update(CriticEnsemble<Scalar>& critics, std::vector<AdamState<Scalar>>& adam,
                     const Matrix<Scalar>& obs, const Matrix<Scalar>& action,
                     const Vector<Scalar>& targets, Scalar max_grad_norm,
                     Scalar loss_ceiling = Scalar(1e6)) {
  check_shape(int(adam.size()) == critics.size(), "critic_update: adam state count mismatch");
  const Matrix<Scalar> x = concat_obs_action(obs, action);
  const Eigen::Index batch = x.rows();

  std::vector<Vector<Scalar>> diffs;
  Scalar loss = Scalar(0);
  for (int i = 0; i < critics.size(); ++i) {
    const Vector<Scalar> q = mlp_forward(critics.online[std::size_t(i)], x).col(0);
    Vector<Scalar> diff = q - targets;
    loss += diff.squaredNorm() / Scalar(batch);
    diffs.push_back(std::move(diff));
  }
  loss /= Scalar(critics.size());
  if (!std::isfinite(double(loss)) || loss > loss_ceiling)
    throw DivergenceError("critic_update: loss above divergence ceiling");

  for (int i = 0; i < critics.size(); ++i) {
    Matrix<Scalar> upstream = (Scalar(2) / Scalar(batch)) * diffs[std::size_t(i)];
    auto [grads, ignored] = mlp_backward(critics.online[std::size_t(i)], x, upstream);
    (void)ignored;
    adam_step(critics.online[std::size_t(i)], std::move(grads), adam[std::size_t(i)],
              max_grad_norm);
  }
  return loss;
}

// Loss and parameter gradients of J_pi = mean(alpha log pi - min_i Q_i(s, a))
// for a fixed noise matrix. Gradients flow through the reparameterized action
// into the selected critic and through the log-probability terms; critic
// parameters are read only.
template <class Scalar>
std::pair<Scalar, GradBundle<Scalar>> actor_loss_grads(const PolicyNet<Scalar>& policy,
                                                       const CriticEnsemble<Scalar>& critics,
                                                       const ActionBounds<Scalar>& bounds,
                                                       const Matrix<Scalar>& obs, Scalar alpha,
                                                       const Matrix<Scalar>& noise) {
  const Eigen::Index batch = obs.rows();
  const Eigen::Index d = policy.action_dim;
  check_shape(noise.rows() == batch && noise.cols() == d, "actor_loss_grads: noise shape");

  const Matrix<Scalar> z = mlp_forward(policy.net, obs);
  const Matrix<Scalar> mu = z.leftCols(d);
  const Matrix<Scalar> log_std_raw = z.rightCols(d);
  Matrix<Scalar> sigma(batch, d);
  Matrix<Scalar> clamp_active(batch, d);
  for (Eigen::Index i = 0; i < batch; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      const Scalar raw = log_std_raw(i, j);
      const bool inside = raw > policy.log_std_min && raw < policy.log_std_max;
      clamp_active(i, j) = inside ? Scalar(1) : Scalar(0);
      sigma(i, j) = std::exp(std::clamp(raw, policy.log_std_min, policy.log_std_max));
    }

  const Matrix<Scalar> x = mu + sigma.cwiseProduct(noise);
  const Matrix<Scalar> tanh_x = x.array().tanh().matrix();
  Matrix<Scalar> action(batch, d);
  for (Eigen::Index i = 0; i < batch; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      action(i, j) = bounds.b(j) + bounds.c(j) * tanh_x(i, j);

  const Vector<Scalar> log_probs = detail::squashed_log_prob(mu, sigma, x, bounds.c);

  const Matrix<Scalar> xq = concat_obs_action(obs, action);
  Matrix<Scalar> q(batch, critics.size());
  for (int i = 0; i < critics.size(); ++i)
    q.col(i) = mlp_forward(critics.online[std::size_t(i)], xq).col(0);

  Vector<Scalar> q_min(batch);
  std::vector<int> chosen(std::size_t(batch));
  for (Eigen::Index i = 0; i < batch; ++i) {
    int best = 0;
    for (int c = 1; c < critics.size(); ++c)
      if (q(i, c) < q(i, best)) best = c;
    chosen[std::size_t(i)] = best;
    q_min(i) = q(i, best);
  }

  const Scalar loss = (alpha * log_probs - q_min).mean();
  if (!std::isfinite(double(loss))) throw DivergenceError("actor_update: non-finite loss");

  // dL/da through the selected critic of each sample.
  Matrix<Scalar> grad_action = Matrix<Scalar>::Zero(batch, d);
  const Eigen::Index obs_dim = obs.cols();
  for (int c = 0; c < critics.size(); ++c) {
    Matrix<Scalar> upstream = Matrix<Scalar>::Zero(batch, 1);
    bool any = false;
    for (Eigen::Index i = 0; i < batch; ++i)
      if (chosen[std::size_t(i)] == c) {
        upstream(i, 0) = Scalar(-1) / Scalar(batch);
        any = true;
      }
    if (!any) continue;
    auto [unused, input_grads] = mlp_backward(critics.online[std::size_t(c)], xq, upstream);
    (void)unused;
    grad_action += input_grads.rightCols(d);
  }

  // Chain through a = b + c tanh(x) and the log-prob terms. With frozen
  // noise: dlogpi/dx = 2 tanh(x), dlogpi/dsigma (direct) = -1/sigma, and
  // x = mu + sigma eps carries dX into both heads.
  Matrix<Scalar> grad_x(batch, d);
  Matrix<Scalar> grad_sigma(batch, d);
  const Scalar inv_batch = Scalar(1) / Scalar(batch);
  for (Eigen::Index i = 0; i < batch; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      const Scalar t = tanh_x(i, j);
      const Scalar da_dx = bounds.c(j) * (Scalar(1) - t * t);
      grad_x(i, j) = alpha * inv_batch * Scalar(2) * t + grad_action(i, j) * da_dx;
      grad_sigma(i, j) =
          grad_x(i, j) * noise(i, j) - alpha * inv_batch / sigma(i, j);
    }

  Matrix<Scalar> upstream_z(batch, 2 * d);
  upstream_z.leftCols(d) = grad_x;
  upstream_z.rightCols(d) = grad_sigma.cwiseProduct(sigma).cwiseProduct(clamp_active);

  auto [grads, unused2] = mlp_backward(policy.net, obs, upstream_z);
  (void)unused2;
  return {loss, std::move(grads)};
}

// One Adam step on the actor loss with fresh reparameterization noise.
// Returns the pre-step loss.
template <class Scalar>
Scalar actor_update(PolicyNet<Scalar>& policy, AdamState<Scalar>& adam,
                    const CriticEnsemble<Scalar>& critics, const ActionBounds<Scalar>& bounds,
                    const Matrix<Scalar>& obs, Scalar alpha, Rng& rng, Scalar max_grad_norm) {
  const Matrix<Scalar> noise = normal_matrix<Scalar>(rng, obs.rows(), policy.action_dim);
  auto [loss, grads] = actor_loss_grads(policy, critics, bounds, obs, alpha, noise);
  adam_step(policy.net, std::move(grads), adam, max_grad_norm);
  return loss;
}

// One Adam step on J(log alpha) = -(log alpha) * mean(log pi + target
// entropy); the gradient is -mean(log pi + target entropy).
template <class Scalar>
Scalar temperature_update(Temperature<Scalar>& temp, const Vector<Scalar>& log_probs,
                          Scalar max_grad_norm) {
  check_config(log_probs.size() > 0, "temperature_update: empty batch");
  const Scalar excess = (log_probs.array() + temp.target_entropy).mean();
  const Scalar loss = -temp.log_alpha * excess;
  temp.adam.step(temp.log_alpha, -excess, max_grad_norm);
  return loss;
}

// Exponential-moving-average target update.
template <class Scalar>
void soft_update(CriticEnsemble<Scalar>& critics, Scalar tau) {
  check_config(tau > Scalar(0) && tau <= Scalar(1), "soft_update: tau must be in (0,1]");
  for (int i = 0; i < critics.size(); ++i) {
    auto& online = critics.online[std::size_t(i)];
    auto& target = critics.target[std::size_t(i)];
    for (std::size_t l = 0; l < online.weights.size(); ++l) {
      target.weights[l] = tau * online.weights[l] + (Scalar(1) - tau) * target.weights[l];
      target.biases[l] = tau * online.biases[l] + (Scalar(1) - tau) * target.biases[l];
    }
  }
}

}  // namespace vecsac
