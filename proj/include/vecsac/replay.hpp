#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "vecsac/common.hpp"
#include "vecsac/rng.hpp"

namespace vecsac {

// One stored step: (s, a, r, corrected next obs, termination flag, timeout
// flag). Timeout implies termination.
template <class Scalar>
struct Transition {
  Vector<Scalar> obs;
  Vector<Scalar> action;
  Scalar reward = Scalar(0);
  Vector<Scalar> next_obs;
  bool done = false;
  bool timeout = false;
};

// Corrected next observation: the pre-reset state when the step timed out,
// the ordinary successor otherwise.
template <class Scalar>
Vector<Scalar> build_corrected_next(const Vector<Scalar>& s_post, const Vector<Scalar>& s_pre,
                                    bool timeout) {
  check_shape(s_post.size() == s_pre.size(), "build_corrected_next: width mismatch");
  return timeout ? s_pre : s_post;
}

template <class Scalar>
Matrix<Scalar> build_corrected_next_batch(const Matrix<Scalar>& s_post,
                                          const Matrix<Scalar>& s_pre,
                                          const FlagVector& timeout) {
  check_shape(s_post.rows() == s_pre.rows() && s_post.cols() == s_pre.cols() &&
                  timeout.size() == s_post.rows(),
              "build_corrected_next_batch: shape mismatch");
  Matrix<Scalar> out(s_post.rows(), s_post.cols());
  for (Eigen::Index i = 0; i < s_post.rows(); ++i)
    out.row(i) = timeout(i) ? s_pre.row(i) : s_post.row(i);
  return out;
}

// A window of n consecutive transitions from one environment, rooted at
// (s_t, a_t). Row k of next_obs is the corrected observation after step t+k.
template <class Scalar>
struct NStepWindow {
  Vector<Scalar> obs;
  Vector<Scalar> action;
  std::vector<Scalar> rewards;
  std::vector<std::uint8_t> done;
  std::vector<std::uint8_t> timeout;
  Matrix<Scalar> next_obs;  // [n x obs_dim]
  int n = 0;
};

// Reference implementation of the masked n-step target by literal unrolled
// summation: sum_k gamma^k S_k r_{t+k} + gamma^n S_n V(s_{t+n}) +
// sum_k gamma^{k+1} S_k b_{t+k} V(s_{t+k+1}), with the survival indicator
// S_k = prod_{j<k} (1 - d_{t+j}). Deliberately loop-based; it is the oracle
// the batched target computation is tested against.
template <class Scalar>
Scalar oracle_nstep_target(const NStepWindow<Scalar>& w,
                           const std::function<Scalar(const Vector<Scalar>&)>& value_fn,
                           Scalar gamma, int n) {
  check_shape(n == w.n && int(w.rewards.size()) == n, "oracle_nstep_target: window length");
  Scalar target = Scalar(0);
  Scalar survival = Scalar(1);  // S_k
  Scalar discount = Scalar(1);  // gamma^k
  for (int k = 0; k < n; ++k) {
    target += discount * survival * w.rewards[std::size_t(k)];
    if (w.timeout[std::size_t(k)])
      target += discount * gamma * survival * value_fn(w.next_obs.row(k).transpose());
    survival *= Scalar(1) - Scalar(w.done[std::size_t(k)]);
    discount *= gamma;
  }
  target += discount * survival * value_fn(w.next_obs.row(n - 1).transpose());
  return target;
}

// Mini-batch of windows in matrix form. next_obs is flattened [(B*n) x obs]
// with row i*n + k holding window i's k-th next observation, so one batched
// value evaluation covers the whole grid in a fixed order.
template <class Scalar>
struct NStepBatch {
  Matrix<Scalar> obs;      // [B x obs_dim]
  Matrix<Scalar> action;   // [B x act_dim]
  Matrix<Scalar> rewards;  // [B x n]
  FlagMatrix done;         // [B x n]
  FlagMatrix timeout;      // [B x n]
  Matrix<Scalar> next_obs; // [(B*n) x obs_dim]
  int n = 0;
  std::vector<int> env_ids;        // provenance, for instrumented tests
  std::vector<int> start_offsets;  // time offset from each env's oldest entry

  Eigen::Index size() const { return obs.rows(); }

  NStepWindow<Scalar> window(Eigen::Index i) const {
    NStepWindow<Scalar> w;
    w.obs = obs.row(i).transpose();
    w.action = action.row(i).transpose();
    w.n = n;
    w.rewards.resize(std::size_t(n));
    w.done.resize(std::size_t(n));
    w.timeout.resize(std::size_t(n));
    w.next_obs.resize(n, next_obs.cols());
    for (int k = 0; k < n; ++k) {
      w.rewards[std::size_t(k)] = rewards(i, k);
      w.done[std::size_t(k)] = done(i, k);
      w.timeout[std::size_t(k)] = timeout(i, k);
      w.next_obs.row(k) = next_obs.row(i * n + k);
    }
    return w;
  }
};

// Per-environment ring buffers. Entries within one ring are consecutive env
// steps (possibly spanning episode boundaries; the target masking neutralizes
// post-termination content), so n-step windows are rebuilt by index
// arithmetic alone.
template <class Scalar>
class ReplayBuffer {
 public:
  ReplayBuffer(int num_envs, int capacity_per_env, int obs_dim, int act_dim)
      : num_envs_(num_envs), capacity_(capacity_per_env), obs_dim_(obs_dim), act_dim_(act_dim) {
    check_config(num_envs > 0 && capacity_per_env > 1 && obs_dim > 0 && act_dim > 0,
                 "ReplayBuffer: bad dimensions");
    rings_.resize(std::size_t(num_envs));
    for (auto& r : rings_) {
      r.obs.resize(capacity_, obs_dim_);
      r.action.resize(capacity_, act_dim_);
      r.next_obs.resize(capacity_, obs_dim_);
      r.reward.resize(capacity_);
      r.done.resize(capacity_);
      r.timeout.resize(capacity_);
    }
  }

  int num_envs() const { return num_envs_; }
  int capacity_per_env() const { return capacity_; }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }

  int size(int env_id) const { return rings_[std::size_t(env_id)].fill; }

  std::int64_t total_size() const {
    std::int64_t s = 0;
    for (const auto& r : rings_) s += r.fill;
    return s;
  }

  std::int64_t total_pushed() const { return total_pushed_; }

  void push(int env_id, const Transition<Scalar>& t) {
    check_config(env_id >= 0 && env_id < num_envs_, "push: env_id out of range");
    check_shape(t.obs.size() == obs_dim_ && t.next_obs.size() == obs_dim_ &&
                    t.action.size() == act_dim_,
                "push: transition width mismatch");
    check_config(!(t.timeout && !t.done), "push: timeout set without done (b must imply d)");
    if (!t.obs.allFinite() || !t.action.allFinite() || !t.next_obs.allFinite() ||
        !std::isfinite(double(t.reward)))
      throw DivergenceError("push: non-finite transition");

    Ring& r = rings_[std::size_t(env_id)];
    r.obs.row(r.head) = t.obs.transpose();
    r.action.row(r.head) = t.action.transpose();
    r.next_obs.row(r.head) = t.next_obs.transpose();
    r.reward(r.head) = t.reward;
    r.done(r.head) = t.done ? 1 : 0;
    r.timeout(r.head) = t.timeout ? 1 : 0;
    r.head = (r.head + 1) % capacity_;
    r.fill = std::min(r.fill + 1, capacity_);
    ++total_pushed_;
  }

  // All envs hold at least n transitions.
  bool warmed_up(int n) const {
    for (const auto& r : rings_)
      if (r.fill < n) return false;
    return true;
  }

  // Uniform over all valid (env, start) windows: starts at time offsets
  // 0..fill-n from the oldest entry, so a window never runs past the newest
  // transition. Returns nothing while the buffer is still warming up.
  std::optional<NStepBatch<Scalar>> sample_nstep(int batch_size, int n, Rng& rng) const {
    check_config(batch_size > 0 && n >= 1, "sample_nstep: bad batch_size or n");
    check_config(n <= capacity_, "sample_nstep: n exceeds per-env capacity");
    if (!warmed_up(n)) return std::nullopt;

    std::vector<std::int64_t> cum(std::size_t(num_envs_) + 1, 0);
    for (int e = 0; e < num_envs_; ++e)
      cum[std::size_t(e) + 1] = cum[std::size_t(e)] + (rings_[std::size_t(e)].fill - n + 1);
    const std::int64_t total = cum.back();

    NStepBatch<Scalar> batch;
    batch.n = n;
    batch.obs.resize(batch_size, obs_dim_);
    batch.action.resize(batch_size, act_dim_);
    batch.rewards.resize(batch_size, n);
    batch.done.resize(batch_size, n);
    batch.timeout.resize(batch_size, n);
    batch.next_obs.resize(std::int64_t(batch_size) * n, obs_dim_);
    batch.env_ids.resize(std::size_t(batch_size));
    batch.start_offsets.resize(std::size_t(batch_size));

    for (int i = 0; i < batch_size; ++i) {
      const std::int64_t u = std::int64_t(rng.next_below(std::uint64_t(total)));
      int env = int(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin()) - 1;
      const int offset = int(u - cum[std::size_t(env)]);
      const Ring& r = rings_[std::size_t(env)];
      const int oldest = (r.head - r.fill + capacity_) % capacity_;

      batch.env_ids[std::size_t(i)] = env;
      batch.start_offsets[std::size_t(i)] = offset;
      const int first = (oldest + offset) % capacity_;
      batch.obs.row(i) = r.obs.row(first);
      batch.action.row(i) = r.action.row(first);
      for (int k = 0; k < n; ++k) {
        const int idx = (oldest + offset + k) % capacity_;
        batch.rewards(i, k) = r.reward(idx);
        batch.done(i, k) = r.done(idx);
        batch.timeout(i, k) = r.timeout(idx);
        batch.next_obs.row(std::int64_t(i) * n + k) = r.next_obs.row(idx);
      }
    }
    return batch;
  }

  // Single window by (env, time offset), for tests and instrumentation.
  NStepWindow<Scalar> window_at(int env_id, int offset, int n) const {
    const Ring& r = rings_[std::size_t(env_id)];
    check_config(offset >= 0 && offset + n <= r.fill, "window_at: window outside valid region");
    const int oldest = (r.head - r.fill + capacity_) % capacity_;
    NStepWindow<Scalar> w;
    w.n = n;
    const int first = (oldest + offset) % capacity_;
    w.obs = r.obs.row(first).transpose();
    w.action = r.action.row(first).transpose();
    w.rewards.resize(std::size_t(n));
    w.done.resize(std::size_t(n));
    w.timeout.resize(std::size_t(n));
    w.next_obs.resize(n, obs_dim_);
    for (int k = 0; k < n; ++k) {
      const int idx = (oldest + offset + k) % capacity_;
      w.rewards[std::size_t(k)] = r.reward(idx);
      w.done[std::size_t(k)] = r.done(idx);
      w.timeout[std::size_t(k)] = r.timeout(idx);
      w.next_obs.row(k) = r.next_obs.row(idx);
    }
    return w;
  }

  struct Ring {
    Matrix<Scalar> obs;
    Matrix<Scalar> action;
    Matrix<Scalar> next_obs;
    Vector<Scalar> reward;
    FlagVector done;
    FlagVector timeout;
    int head = 0;
    int fill = 0;
  };

  // Checkpoint serialization walks the rings directly.
  const std::vector<Ring>& rings() const { return rings_; }
  std::vector<Ring>& rings() { return rings_; }
  void set_total_pushed(std::int64_t v) { total_pushed_ = v; }

 private:
  int num_envs_;
  int capacity_;
  int obs_dim_;
  int act_dim_;
  std::vector<Ring> rings_;
  std::int64_t total_pushed_ = 0;
};

}  // namespace vecsac
