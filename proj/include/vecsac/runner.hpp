#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "vecsac/checkpoint.hpp"
#include "vecsac/config.hpp"
#include "vecsac/envs.hpp"
#include "vecsac/metrics.hpp"
#include "vecsac/normalizer.hpp"
#include "vecsac/policy.hpp"
#include "vecsac/replay.hpp"
#include "vecsac/sac.hpp"

namespace vecsac {

// Training loop: alternate collection of N_s steps over N_e environments
// with G gradient updates per iteration (critic, temperature, actor every
// p-th step, soft target update). Fully deterministic for a given
// (config, seed); every stochastic draw comes from explicit streams that the
// checkpoint serializes.
template <class Scalar>
class Trainer {
 public:
  explicit Trainer(const RunConfig& config)
      : config_(config),
        sac_(config.sac<Scalar>()),
        start_time_(std::chrono::steady_clock::now()) {
    config_.validate();
    sac_.validate();

    EnvConfig<Scalar> env_cfg = env_config_cast<Scalar>(config_.env);
    env_cfg.num_envs = config_.environments;
    env_ = make_env<Scalar>(env_cfg);
    bounds_ = env_->bounds();
    const int obs_dim = env_->spec().obs_dim;
    const int act_dim = env_->spec().action_dim;

    const Activation act = activation_from_name(config_.activation);
    std::vector<int> actor_dims;
    actor_dims.push_back(obs_dim);
    for (int h : config_.actor_hidden_dimensions) actor_dims.push_back(h);
    policy_ = actor_init<Scalar>(actor_dims, act_dim, sac_.sigma0, sac_.mean_init_std,
                                 derive_seed(1), act, Scalar(config_.log_std_min),
                                 Scalar(config_.log_std_max));
    critics_ = make_critics<Scalar>(obs_dim, act_dim, config_.critic_hidden_dimensions, act,
                                    sac_.tau, derive_seed(2));
    policy_adam_ = AdamState<Scalar>::make(policy_.net, sac_.actor_lr);
    for (int i = 0; i < critics_.size(); ++i)
      critic_adam_.push_back(AdamState<Scalar>::make(critics_.online[std::size_t(i)],
                                                     sac_.critic_lr));

    const Scalar target_entropy = -sac_.target_entropy_scale * Scalar(act_dim);
    temperature_.log_alpha = std::log(sac_.initial_temperature);
    temperature_.target_entropy = target_entropy;
    temperature_.adam.lr = sac_.temperature_lr;

    const int per_env_capacity = int(std::max<std::int64_t>(
        config_.replay_buffer_size / config_.environments, sac_.nstep + 1));
    buffer_ = std::make_unique<ReplayBuffer<Scalar>>(config_.environments, per_env_capacity,
                                                     obs_dim, act_dim);
    normalizer_ = ObsNormalizer<Scalar>(obs_dim, Scalar(config_.normalizer_clip));
    normalize_enabled_ = config_.actor_observation_normalization;

    rng_ = Rng::stream(config_.seed, 0xF00D);
    obs_ = env_->reset(config_.seed);
    episode_return_.assign(std::size_t(config_.environments), 0.0);
    episode_length_.assign(std::size_t(config_.environments), 0);
  }

  const RunConfig& config() const { return config_; }
  const PolicyNet<Scalar>& policy() const { return policy_; }
  const CriticEnsemble<Scalar>& critics() const { return critics_; }
  const Temperature<Scalar>& temperature() const { return temperature_; }
  const ActionBounds<Scalar>& bounds() const { return bounds_; }
  const ReplayBuffer<Scalar>& buffer() const { return *buffer_; }
  ObsNormalizer<Scalar>& normalizer() { return normalizer_; }
  std::int64_t iteration() const { return iteration_; }
  std::int64_t env_steps() const { return env_steps_; }

  Matrix<Scalar> normalize(const Matrix<Scalar>& obs, bool update) {
    if (!normalize_enabled_) return obs;
    return normalizer_.normalize(obs, update);
  }

  // min_i Q_i(s, pi(s)) at one raw observation under the online critics.
  Scalar q_value_at(const Vector<Scalar>& raw_obs) {
    Matrix<Scalar> obs(1, raw_obs.size());
    obs.row(0) = raw_obs.transpose();
    const Matrix<Scalar> norm = normalize(obs, false);
    const auto sample = sample_action(policy_, norm, bounds_, rng_, /*deterministic=*/true);
    return min_q(critics_.online, norm, sample.action)(0);
  }

  // One collection + update cycle; returns the iteration's metrics record.
  MetricsRecord run_iteration() {
    ++iteration_;
    double entropy_sum = 0.0;
    int entropy_batches = 0;

    for (int step = 0; step < config_.rollout_steps_per_environment; ++step) {
      const Matrix<Scalar> norm_obs = normalize(obs_, /*update=*/true);
      const auto sample = sample_action(policy_, norm_obs, bounds_, rng_, false);
      entropy_sum += double(entropy_estimate(sample.log_prob));
      ++entropy_batches;

      const StepResult<Scalar>& res = env_->step(sample.action);
      const Matrix<Scalar> corrected =
          build_corrected_next_batch(res.obs_post, res.obs_pre, res.timeout);

      Transition<Scalar> t;
      for (int e = 0; e < config_.environments; ++e) {
        t.obs = obs_.row(e).transpose();
        t.action = sample.action.row(e).transpose();
        t.reward = res.reward(e);
        t.next_obs = corrected.row(e).transpose();
        t.done = res.done(e) != 0;
        t.timeout = res.timeout(e) != 0;
        buffer_->push(e, t);

        episode_return_[std::size_t(e)] += double(res.reward(e));
        episode_length_[std::size_t(e)] += 1;
        if (t.done) {
          push_episode(episode_return_[std::size_t(e)], episode_length_[std::size_t(e)]);
          episode_return_[std::size_t(e)] = 0.0;
          episode_length_[std::size_t(e)] = 0;
        }
      }
      obs_ = res.obs_post;
      env_steps_ += config_.environments;
    }

    double critic_loss_sum = 0.0, actor_loss_sum = 0.0;
    int critic_updates = 0, actor_updates = 0;
    if (iteration_ >= config_.training_start_iteration) {
      for (int g = 0; g < sac_.updates_per_iteration; ++g) {
        auto maybe = buffer_->sample_nstep(sac_.batch_size, sac_.nstep, rng_);
        if (!maybe) break;  // still warming up
        const NStepBatch<Scalar>& batch = *maybe;

        const Matrix<Scalar> obs_norm = normalize(batch.obs, false);
        const Matrix<Scalar> next_norm = normalize(batch.next_obs, false);
        const FlagMatrix timeout_eff = sac_.timeout_bootstrap
                                           ? batch.timeout
                                           : FlagMatrix(FlagMatrix::Zero(batch.timeout.rows(),
                                                                         batch.timeout.cols()));
        const Scalar alpha = temperature_.alpha();
        const Vector<Scalar> targets =
            nstep_targets(policy_, critics_, bounds_, alpha, sac_.gamma, batch.rewards,
                          batch.done, timeout_eff, next_norm, rng_);
        critic_loss_sum += double(critic_update(critics_, critic_adam_, obs_norm, batch.action,
                                                targets, sac_.max_grad_norm, sac_.loss_ceiling));
        ++critic_updates;

        if (sac_.auto_temperature) {
          const auto fresh = sample_action(policy_, obs_norm, bounds_, rng_, false);
          temperature_update(temperature_, fresh.log_prob, sac_.max_grad_norm);
        }

        if (g % sac_.policy_update_period == 0) {
          actor_loss_sum += double(actor_update(policy_, policy_adam_, critics_, bounds_,
                                                obs_norm, temperature_.alpha(), rng_,
                                                sac_.max_grad_norm));
          ++actor_updates;
        }

        soft_update(critics_, sac_.tau);
      }
    }

    MetricsRecord rec;
    rec.iteration = iteration_;
    rec.env_steps = env_steps_;
    rec.mean_episode_return = window_mean_return();
    rec.mean_episode_length = window_mean_length();
    rec.critic_loss = critic_updates ? critic_loss_sum / critic_updates : 0.0;
    rec.actor_loss = actor_updates ? actor_loss_sum / actor_updates : 0.0;
    rec.alpha = double(temperature_.alpha());
    rec.entropy = entropy_batches ? entropy_sum / entropy_batches : 0.0;
    rec.wall_seconds = wall_seconds();
    return rec;
  }

  // Full run from the current state to max_iterations. Writes the metrics
  // stream and checkpoints at the configured cadence; on divergence the last
  // written checkpoint stays on disk.
  std::vector<MetricsRecord> train() {
    MetricsWriter writer(config_.metrics_path);
    std::vector<MetricsRecord> records;
    while (iteration_ < config_.max_iterations) {
      MetricsRecord rec = run_iteration();
      writer.write(rec);
      records.push_back(rec);
      const bool last = iteration_ >= config_.max_iterations;
      const bool cadence =
          config_.checkpoint_interval > 0 && iteration_ % config_.checkpoint_interval == 0;
      if (!config_.checkpoint_path.empty() && (last || cadence))
        save_checkpoint(config_.checkpoint_path);
    }
    return records;
  }

  struct EvalResult {
    double mean_return = 0.0;
    double mean_length = 0.0;
    int episodes = 0;
  };

  using EvalObserver = std::function<void(const Matrix<Scalar>& obs,
                                          const Matrix<Scalar>& actions,
                                          const StepResult<Scalar>& result)>;

  // Deterministic-policy rollouts on a fresh environment instance; training
  // state is untouched. Runs until `episodes` episodes complete.
  EvalResult evaluate(int episodes, std::uint64_t seed, const EvalObserver& observer = {}) {
    check_config(episodes > 0, "evaluate: episodes must be > 0");
    EnvConfig<Scalar> env_cfg = env_config_cast<Scalar>(config_.env);
    env_cfg.num_envs = config_.environments;
    auto env = make_env<Scalar>(env_cfg);
    Matrix<Scalar> obs = env->reset(seed);

    std::vector<double> ep_ret(std::size_t(config_.environments), 0.0);
    std::vector<int> ep_len(std::size_t(config_.environments), 0);
    EvalResult out;
    Rng unused(0);
    const std::int64_t step_cap =
        std::int64_t(env->spec().horizon) * (episodes / config_.environments + 2);
    for (std::int64_t step = 0; step < step_cap && out.episodes < episodes; ++step) {
      const Matrix<Scalar> norm_obs = normalize(obs, false);
      const auto sample = sample_action(policy_, norm_obs, bounds_, unused, true);
      const StepResult<Scalar>& res = env->step(sample.action);
      if (observer) observer(obs, sample.action, res);
      for (int e = 0; e < config_.environments && out.episodes < episodes; ++e) {
        ep_ret[std::size_t(e)] += double(res.reward(e));
        ep_len[std::size_t(e)] += 1;
        if (res.done(e)) {
          out.mean_return += ep_ret[std::size_t(e)];
          out.mean_length += ep_len[std::size_t(e)];
          ++out.episodes;
          ep_ret[std::size_t(e)] = 0.0;
          ep_len[std::size_t(e)] = 0;
        }
      }
      obs = res.obs_post;
    }
    if (out.episodes > 0) {
      out.mean_return /= out.episodes;
      out.mean_length /= out.episodes;
    }
    return out;
  }

  // ---- checkpointing -------------------------------------------------------

  void save_checkpoint(const std::string& path) const {
    BinWriter w;
    w.str(run_config_to_json(config_).dump());
    w.pod(iteration_);
    w.pod(env_steps_);
    w.pod(wall_seconds());
    w.rng_state(rng_.state());
    write_mlp(w, policy_.net);
    w.pod(std::int64_t(policy_.action_dim));
    w.pod(policy_.log_std_min);
    w.pod(policy_.log_std_max);
    for (int i = 0; i < critics_.size(); ++i) write_mlp(w, critics_.online[std::size_t(i)]);
    for (int i = 0; i < critics_.size(); ++i) write_mlp(w, critics_.target[std::size_t(i)]);
    w.pod(critics_.tau);
    write_adam(w, policy_adam_);
    for (const auto& a : critic_adam_) write_adam(w, a);
    write_temperature(w, temperature_);
    normalizer_.save(w);
    w.eigen(obs_);
    env_->save_state(w);

    w.pod(std::int64_t(buffer_->num_envs()));
    w.pod(std::int64_t(buffer_->capacity_per_env()));
    for (const auto& ring : buffer_->rings()) {
      w.pod(std::int64_t(ring.fill));
      const int oldest = (ring.head - ring.fill + buffer_->capacity_per_env()) %
                         buffer_->capacity_per_env();
      for (int k = 0; k < ring.fill; ++k) {
        const int idx = (oldest + k) % buffer_->capacity_per_env();
        w.eigen(Matrix<Scalar>(ring.obs.row(idx)));
        w.eigen(Matrix<Scalar>(ring.action.row(idx)));
        w.eigen(Matrix<Scalar>(ring.next_obs.row(idx)));
        w.pod(ring.reward(idx));
        w.pod(ring.done(idx));
        w.pod(ring.timeout(idx));
      }
    }

    for (double r : episode_return_) w.pod(r);
    for (int l : episode_length_) w.pod(std::int64_t(l));
    w.pod(std::int64_t(episode_window_.size()));
    for (const auto& [ret, len] : episode_window_) {
      w.pod(ret);
      w.pod(len);
    }

    write_checkpoint_file(path, sizeof(Scalar), w.bytes());
  }

  static Trainer from_checkpoint(const std::string& path) {
    const std::string payload = read_checkpoint_file(path, sizeof(Scalar));
    BinReader r(payload);
    const RunConfig config = parse_run_config(json::parse(r.str()));
    Trainer t(config);
    t.restore(r);
    return t;
  }

 private:
  std::uint64_t derive_seed(std::uint64_t salt) const {
    return config_.seed * 0x9E3779B97F4A7C15ULL + salt;
  }

  void restore(BinReader& r) {
    iteration_ = r.pod<std::int64_t>();
    env_steps_ = r.pod<std::int64_t>();
    wall_offset_ = r.pod<double>();
    start_time_ = std::chrono::steady_clock::now();
    rng_.set_state(r.rng_state());
    policy_.net = read_mlp<Scalar>(r);
    policy_.action_dim = Eigen::Index(r.pod<std::int64_t>());
    policy_.log_std_min = r.pod<Scalar>();
    policy_.log_std_max = r.pod<Scalar>();
    for (int i = 0; i < critics_.size(); ++i) critics_.online[std::size_t(i)] = read_mlp<Scalar>(r);
    for (int i = 0; i < critics_.size(); ++i) critics_.target[std::size_t(i)] = read_mlp<Scalar>(r);
    critics_.tau = r.pod<Scalar>();
    policy_adam_ = read_adam<Scalar>(r);
    for (auto& a : critic_adam_) a = read_adam<Scalar>(r);
    temperature_ = read_temperature<Scalar>(r);
    normalizer_.load(r);
    obs_ = r.eigen<Matrix<Scalar>>();
    env_->load_state(r);

    const auto num_envs = r.pod<std::int64_t>();
    const auto cap = r.pod<std::int64_t>();
    check_config(num_envs == buffer_->num_envs() && cap == buffer_->capacity_per_env(),
                 "checkpoint: replay geometry mismatch");
    for (auto& ring : buffer_->rings()) {
      const auto fill = r.pod<std::int64_t>();
      ring.fill = int(fill);
      ring.head = int(fill % cap);
      std::int64_t pushed = 0;
      for (int k = 0; k < ring.fill; ++k) {
        ring.obs.row(k) = r.eigen<Matrix<Scalar>>();
        ring.action.row(k) = r.eigen<Matrix<Scalar>>();
        ring.next_obs.row(k) = r.eigen<Matrix<Scalar>>();
        ring.reward(k) = r.pod<Scalar>();
        ring.done(k) = r.pod<std::uint8_t>();
        ring.timeout(k) = r.pod<std::uint8_t>();
        ++pushed;
      }
      buffer_->set_total_pushed(buffer_->total_pushed() + pushed);
    }

    for (auto& v : episode_return_) v = r.pod<double>();
    for (auto& v : episode_length_) v = int(r.pod<std::int64_t>());
    episode_window_.clear();
    const auto window = r.pod<std::int64_t>();
    for (std::int64_t i = 0; i < window; ++i) {
      const double ret = r.pod<double>();
      const double len = r.pod<double>();
      episode_window_.emplace_back(ret, len);
    }
    check_config(r.exhausted(), "checkpoint: trailing bytes");
  }

  void push_episode(double ret, int len) {
    episode_window_.emplace_back(ret, double(len));
    while (episode_window_.size() > kEpisodeWindow) episode_window_.pop_front();
  }

  double window_mean_return() const {
    if (episode_window_.empty()) return 0.0;
    double s = 0.0;
    for (const auto& [ret, len] : episode_window_) s += ret;
    return s / double(episode_window_.size());
  }

  double window_mean_length() const {
    if (episode_window_.empty()) return 0.0;
    double s = 0.0;
    for (const auto& [ret, len] : episode_window_) s += len;
    return s / double(episode_window_.size());
  }

  double wall_seconds() const {
    const auto now = std::chrono::steady_clock::now();
    return wall_offset_ + std::chrono::duration<double>(now - start_time_).count();
  }

  static constexpr std::size_t kEpisodeWindow = 100;

  RunConfig config_;
  SacConfig<Scalar> sac_;
  std::unique_ptr<VectorEnv<Scalar>> env_;
  ActionBounds<Scalar> bounds_;
  PolicyNet<Scalar> policy_;
  CriticEnsemble<Scalar> critics_;
  AdamState<Scalar> policy_adam_;
  std::vector<AdamState<Scalar>> critic_adam_;
  Temperature<Scalar> temperature_;
  std::unique_ptr<ReplayBuffer<Scalar>> buffer_;
  ObsNormalizer<Scalar> normalizer_;
  bool normalize_enabled_ = true;
  Rng rng_;
  Matrix<Scalar> obs_;
  std::int64_t iteration_ = 0;
  std::int64_t env_steps_ = 0;
  std::vector<double> episode_return_;
  std::vector<int> episode_length_;
  std::deque<std::pair<double, double>> episode_window_;
  double wall_offset_ = 0.0;
  std::chrono::steady_clock::time_point start_time_;
};

// Run a full training job at the configured precision.
inline std::vector<MetricsRecord> run_training(const RunConfig& config) {
  if (config.precision == "float32") return Trainer<float>(config).train();
  return Trainer<double>(config).train();
}

}  // namespace vecsac
