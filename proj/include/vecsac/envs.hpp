#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vecsac/bounds.hpp"
#include "vecsac/common.hpp"
#include "vecsac/rewards.hpp"
#include "vecsac/rng.hpp"
#include "vecsac/serial.hpp"

namespace vecsac {

template <class Scalar>
struct EnvSpec {
  std::string name;
  int obs_dim = 0;
  int action_dim = 0;
  std::vector<JointSpec<Scalar>> joints;
  int horizon = 1;
  Scalar dt = Scalar(0.02);

  void validate() const {
    check_config(horizon >= 1, "EnvSpec: horizon must be >= 1");
    check_config(dt > Scalar(0), "EnvSpec: dt must be > 0");
  }
};

// Environment description as loaded from an environment file.
template <class Scalar>
struct EnvConfig {
  std::string name;
  int num_envs = 1;
  int horizon = 1;
  Scalar dt = Scalar(0.02);
  std::vector<JointSpec<Scalar>> joints;
  std::vector<RewardTermConfig> reward_terms;
  std::map<std::string, double> params;

  double param(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
};

// One synchronous step over all environments. obs_pre is the observation
// before any auto-reset (valid wherever done is set; elsewhere it equals
// obs_post), so timeout bootstrapping can use the true successor state.
template <class Scalar>
struct StepResult {
  Matrix<Scalar> obs_post;
  Matrix<Scalar> obs_pre;
  Vector<Scalar> reward;
  FlagVector done;
  FlagVector timeout;

  void resize(int num_envs, int obs_dim) {
    obs_post.resize(num_envs, obs_dim);
    obs_pre.resize(num_envs, obs_dim);
    reward.resize(num_envs);
    done.resize(num_envs);
    timeout.resize(num_envs);
  }
};

// Vectorized environment: batch reset, batch step with auto-reset, and both
// pre- and post-reset observations. Per-env RNG streams derive from
// (seed, env_id), so results match sequential env-order execution.
template <class Scalar>
class VectorEnv {
 public:
  virtual ~VectorEnv() = default;

  virtual const EnvSpec<Scalar>& spec() const = 0;
  virtual int num_envs() const = 0;
  virtual Matrix<Scalar> reset(std::uint64_t seed) = 0;
  virtual const StepResult<Scalar>& step(const Matrix<Scalar>& actions) = 0;

  virtual void save_state(BinWriter& w) const = 0;
  virtual void load_state(BinReader& r) = 0;

  const ActionBounds<Scalar>& bounds() const { return bounds_; }

 protected:
  void derive_env_bounds() { bounds_ = derive_bounds(spec().joints); }
  ActionBounds<Scalar> bounds_;
};

// Deterministic cyclic counter with constant reward and no failures; the
// analytic oracle environment for timeout-bias experiments. The chain
// position advances modulo the horizon, so the pre-reset successor of the
// final step coincides with the reset state and the infinite-horizon value
// of every state is exactly r/(1-gamma).
template <class Scalar>
class ChainEnv : public VectorEnv<Scalar> {
 public:
  ChainEnv(const EnvConfig<Scalar>& cfg) : num_envs_(cfg.num_envs) {
    spec_.name = "chain";
    spec_.obs_dim = 1;
    spec_.action_dim = 1;
    spec_.horizon = cfg.horizon;
    spec_.dt = cfg.dt;
    spec_.joints = cfg.joints;
    if (spec_.joints.empty())
      spec_.joints.push_back({"chain_action", Scalar(0), Scalar(-1), Scalar(1), Scalar(-1.5),
                              Scalar(1.5), Scalar(1)});
    check_config(int(spec_.joints.size()) == 1, "chain: expects exactly one joint");
    spec_.validate();
    this->derive_env_bounds();
    const RewardTermConfig* t = find_term(cfg.reward_terms, "constant");
    step_reward_ = Scalar(t ? t->weight : 1.0);
    pos_.assign(std::size_t(num_envs_), 0);
    result_.resize(num_envs_, spec_.obs_dim);
  }

  const EnvSpec<Scalar>& spec() const override { return spec_; }
  int num_envs() const override { return num_envs_; }

  Matrix<Scalar> reset(std::uint64_t) override {
    Matrix<Scalar> obs(num_envs_, 1);
    for (int e = 0; e < num_envs_; ++e) {
      pos_[std::size_t(e)] = 0;
      obs(e, 0) = Scalar(0);
    }
    return obs;
  }

  const StepResult<Scalar>& step(const Matrix<Scalar>& actions) override {
    check_shape(actions.rows() == num_envs_ && actions.cols() == 1, "chain: action shape");
    const int h = spec_.horizon;
    for (int e = 0; e < num_envs_; ++e) {
      int& pos = pos_[std::size_t(e)];
      pos += 1;
      result_.reward(e) = step_reward_;
      const bool timeout = pos >= h;
      result_.done(e) = timeout ? 1 : 0;
      result_.timeout(e) = timeout ? 1 : 0;
      const int wrapped = pos % h;
      result_.obs_pre(e, 0) = Scalar(wrapped) / Scalar(h);
      if (timeout) pos = 0;
      result_.obs_post(e, 0) = Scalar(pos) / Scalar(h);
    }
    return result_;
  }

  void save_state(BinWriter& w) const override {
    w.pod(std::int64_t(pos_.size()));
    for (int p : pos_) w.pod(std::int32_t(p));
  }

  void load_state(BinReader& r) override {
    const auto n = r.pod<std::int64_t>();
    check_config(n == std::int64_t(pos_.size()), "chain: state size mismatch");
    for (auto& p : pos_) p = r.pod<std::int32_t>();
  }

 private:
  EnvSpec<Scalar> spec_;
  int num_envs_;
  Scalar step_reward_;
  std::vector<int> pos_;
  StepResult<Scalar> result_;
};

// Planar double integrator tracking a commanded velocity. Actions are
// accelerations produced through the joint-bounds transform; leaving the
// arena is a genuine failure, reaching the horizon a timeout, so both
// bootstrap-mask branches occur during training.
//
// Observation layout: [pos(2), vel(2), cmd(2), prev_action(2)].
template <class Scalar>
class PointMassTracker : public VectorEnv<Scalar> {
 public:
  static constexpr int kPosOffset = 0;
  static constexpr int kVelOffset = 2;
  static constexpr int kCmdOffset = 4;
  static constexpr int kPrevActionOffset = 6;

  PointMassTracker(const EnvConfig<Scalar>& cfg) : num_envs_(cfg.num_envs) {
    spec_.name = "point_mass_tracker";
    spec_.obs_dim = 8;
    spec_.action_dim = 2;
    spec_.horizon = cfg.horizon;
    spec_.dt = cfg.dt;
    spec_.joints = cfg.joints;
    check_config(int(spec_.joints.size()) == 2, "point_mass_tracker: expects two joints");
    spec_.validate();
    this->derive_env_bounds();

    arena_half_extent_ = Scalar(cfg.param("arena_half_extent", 5.0));
    cmd_max_ = Scalar(cfg.param("command_max", 1.0));
    const RewardTermConfig* track = find_term(cfg.reward_terms, "track_lin_vel_xy");
    check_config(track != nullptr, "point_mass_tracker: missing 'track_lin_vel_xy' term");
    w_track_ = Scalar(track->weight);
    sigma_track_ = Scalar(track->sigma);
    const RewardTermConfig* rate = find_term(cfg.reward_terms, "action_rate");
    w_action_rate_ = Scalar(rate ? rate->weight : 0.0);
    const RewardTermConfig* term = find_term(cfg.reward_terms, "termination");
    w_termination_ = Scalar(term ? term->weight : 0.0);
    for (const auto& t : cfg.reward_terms)
      check_config(t.name == "track_lin_vel_xy" || t.name == "action_rate" ||
                       t.name == "termination",
                   "point_mass_tracker: unknown reward term '" + t.name + "'");

    states_.resize(std::size_t(num_envs_));
    streams_.resize(std::size_t(num_envs_));
    result_.resize(num_envs_, spec_.obs_dim);
  }

  const EnvSpec<Scalar>& spec() const override { return spec_; }
  int num_envs() const override { return num_envs_; }

  Matrix<Scalar> reset(std::uint64_t seed) override {
    Matrix<Scalar> obs(num_envs_, spec_.obs_dim);
    for (int e = 0; e < num_envs_; ++e) {
      streams_[std::size_t(e)] = Rng::stream(seed, std::uint64_t(e));
      reset_one(e);
      write_obs(states_[std::size_t(e)], obs, e);
    }
    return obs;
  }

  const StepResult<Scalar>& step(const Matrix<Scalar>& actions) override {
    check_shape(actions.rows() == num_envs_ && actions.cols() == 2,
                "point_mass_tracker: action shape");
    const Matrix<Scalar> accel =
        env_action_transform_batch(spec_.joints, this->bounds_, actions);
    const Scalar dt = spec_.dt;
    for (int e = 0; e < num_envs_; ++e) {
      State& s = states_[std::size_t(e)];
      const Vector<Scalar> action = actions.row(e).transpose();
      const Vector<Scalar> prev_action = s.prev_action;

      s.vel += accel.row(e).transpose() * dt;
      s.pos += s.vel * dt;
      s.prev_action = action;
      s.step += 1;

      const bool fault = !s.pos.allFinite() || !s.vel.allFinite();
      const bool failure =
          fault || s.pos.template lpNorm<Eigen::Infinity>() > arena_half_extent_;
      const bool timeout = !failure && s.step >= spec_.horizon;
      const bool done = failure || timeout;

      Scalar reward = reward_track_lin_vel(s.cmd, s.vel, sigma_track_, w_track_);
      reward += penalty_quadratic<Scalar>(action - prev_action, w_action_rate_);
      reward += reward_termination(failure, w_termination_);
      if (fault) reward = w_termination_;

      result_.reward(e) = reward;
      result_.done(e) = done ? 1 : 0;
      result_.timeout(e) = timeout ? 1 : 0;
      write_obs(s, result_.obs_pre, e);
      if (done) {
        reset_one(e);
      }
      write_obs(states_[std::size_t(e)], result_.obs_post, e);
    }
    return result_;
  }

  void save_state(BinWriter& w) const override {
    w.pod(std::int64_t(num_envs_));
    for (int e = 0; e < num_envs_; ++e) {
      const State& s = states_[std::size_t(e)];
      w.eigen(s.pos);
      w.eigen(s.vel);
      w.eigen(s.cmd);
      w.eigen(s.prev_action);
      w.pod(std::int32_t(s.step));
      w.rng_state(streams_[std::size_t(e)].state());
    }
  }

  void load_state(BinReader& r) override {
    check_config(r.pod<std::int64_t>() == num_envs_, "point_mass_tracker: state size mismatch");
    for (int e = 0; e < num_envs_; ++e) {
      State& s = states_[std::size_t(e)];
      s.pos = r.eigen<Vector<Scalar>>();
      s.vel = r.eigen<Vector<Scalar>>();
      s.cmd = r.eigen<Vector<Scalar>>();
      s.prev_action = r.eigen<Vector<Scalar>>();
      s.step = r.pod<std::int32_t>();
      streams_[std::size_t(e)].set_state(r.rng_state());
    }
  }

 private:
  struct State {
    Vector<Scalar> pos = Vector<Scalar>::Zero(2);
    Vector<Scalar> vel = Vector<Scalar>::Zero(2);
    Vector<Scalar> cmd = Vector<Scalar>::Zero(2);
    Vector<Scalar> prev_action = Vector<Scalar>::Zero(2);
    int step = 0;
  };

  void reset_one(int e) {
    Rng& rng = streams_[std::size_t(e)];
    State& s = states_[std::size_t(e)];
    for (int i = 0; i < 2; ++i) s.pos(i) = Scalar(rng.uniform(-0.5, 0.5));
    for (int i = 0; i < 2; ++i) s.vel(i) = Scalar(rng.uniform(-0.1, 0.1));
    for (int i = 0; i < 2; ++i) s.cmd(i) = Scalar(rng.uniform(-double(cmd_max_), double(cmd_max_)));
    s.prev_action.setZero();
    s.step = 0;
  }

  void write_obs(const State& s, Matrix<Scalar>& obs, int row) const {
    obs(row, 0) = s.pos(0);
    obs(row, 1) = s.pos(1);
    obs(row, 2) = s.vel(0);
    obs(row, 3) = s.vel(1);
    obs(row, 4) = s.cmd(0);
    obs(row, 5) = s.cmd(1);
    obs(row, 6) = s.prev_action(0);
    obs(row, 7) = s.prev_action(1);
  }

  EnvSpec<Scalar> spec_;
  int num_envs_;
  Scalar arena_half_extent_;
  Scalar cmd_max_;
  Scalar w_track_, sigma_track_, w_action_rate_, w_termination_;
  std::vector<State> states_;
  std::vector<Rng> streams_;
  StepResult<Scalar> result_;
};

// Torque-limited pendulum swing-up with quadratic state/action costs and an
// asymmetric torque range. theta = 0 is upright; episodes end only by
// timeout. Observation layout: [cos(theta), sin(theta), theta_dot].
template <class Scalar>
class PendulumSwingup : public VectorEnv<Scalar> {
 public:
  PendulumSwingup(const EnvConfig<Scalar>& cfg) : num_envs_(cfg.num_envs) {
    spec_.name = "pendulum_swingup";
    spec_.obs_dim = 3;
    spec_.action_dim = 1;
    spec_.horizon = cfg.horizon;
    spec_.dt = cfg.dt;
    spec_.joints = cfg.joints;
    check_config(int(spec_.joints.size()) == 1, "pendulum_swingup: expects one joint");
    spec_.validate();
    this->derive_env_bounds();

    gravity_ = Scalar(cfg.param("gravity", 10.0));
    mass_ = Scalar(cfg.param("mass", 1.0));
    length_ = Scalar(cfg.param("length", 1.0));
    max_speed_ = Scalar(cfg.param("max_speed", 8.0));
    const RewardTermConfig* a = find_term(cfg.reward_terms, "angle");
    const RewardTermConfig* v = find_term(cfg.reward_terms, "angular_velocity");
    const RewardTermConfig* u = find_term(cfg.reward_terms, "torque");
    w_angle_ = Scalar(a ? a->weight : -1.0);
    w_vel_ = Scalar(v ? v->weight : -0.1);
    w_torque_ = Scalar(u ? u->weight : -0.001);
    for (const auto& t : cfg.reward_terms)
      check_config(t.name == "angle" || t.name == "angular_velocity" || t.name == "torque",
                   "pendulum_swingup: unknown reward term '" + t.name + "'");

    theta_.assign(std::size_t(num_envs_), Scalar(0));
    theta_dot_.assign(std::size_t(num_envs_), Scalar(0));
    steps_.assign(std::size_t(num_envs_), 0);
    streams_.resize(std::size_t(num_envs_));
    result_.resize(num_envs_, spec_.obs_dim);
  }

  const EnvSpec<Scalar>& spec() const override { return spec_; }
  int num_envs() const override { return num_envs_; }

  Matrix<Scalar> reset(std::uint64_t seed) override {
    Matrix<Scalar> obs(num_envs_, spec_.obs_dim);
    for (int e = 0; e < num_envs_; ++e) {
      streams_[std::size_t(e)] = Rng::stream(seed, std::uint64_t(e));
      reset_one(e);
      write_obs(e, obs, e);
    }
    return obs;
  }

  const StepResult<Scalar>& step(const Matrix<Scalar>& actions) override {
    check_shape(actions.rows() == num_envs_ && actions.cols() == 1,
                "pendulum_swingup: action shape");
    const Matrix<Scalar> torque =
        env_action_transform_batch(spec_.joints, this->bounds_, actions);
    const Scalar dt = spec_.dt;
    for (int e = 0; e < num_envs_; ++e) {
      Scalar& th = theta_[std::size_t(e)];
      Scalar& thd = theta_dot_[std::size_t(e)];
      const Scalar u = torque(e, 0);

      const Scalar accel = Scalar(3) * gravity_ / (Scalar(2) * length_) * std::sin(th) +
                           Scalar(3) * u / (mass_ * length_ * length_);
      thd = std::clamp(thd + accel * dt, -max_speed_, max_speed_);
      th += thd * dt;
      steps_[std::size_t(e)] += 1;

      const Scalar th_norm = angle_normalize(th);
      Vector<Scalar> one(1);
      one(0) = th_norm;
      Scalar reward = penalty_quadratic(one, w_angle_);
      one(0) = thd;
      reward += penalty_quadratic(one, w_vel_);
      one(0) = u;
      reward += penalty_quadratic(one, w_torque_);
      result_.reward(e) = reward;

      const bool timeout = steps_[std::size_t(e)] >= spec_.horizon;
      result_.done(e) = timeout ? 1 : 0;
      result_.timeout(e) = timeout ? 1 : 0;
      write_obs(e, result_.obs_pre, e);
      if (timeout) reset_one(e);
      write_obs(e, result_.obs_post, e);
    }
    return result_;
  }

  void save_state(BinWriter& w) const override {
    w.pod(std::int64_t(num_envs_));
    for (int e = 0; e < num_envs_; ++e) {
      w.pod(theta_[std::size_t(e)]);
      w.pod(theta_dot_[std::size_t(e)]);
      w.pod(std::int32_t(steps_[std::size_t(e)]));
      w.rng_state(streams_[std::size_t(e)].state());
    }
  }

  void load_state(BinReader& r) override {
    check_config(r.pod<std::int64_t>() == num_envs_, "pendulum_swingup: state size mismatch");
    for (int e = 0; e < num_envs_; ++e) {
      theta_[std::size_t(e)] = r.pod<Scalar>();
      theta_dot_[std::size_t(e)] = r.pod<Scalar>();
      steps_[std::size_t(e)] = r.pod<std::int32_t>();
      streams_[std::size_t(e)].set_state(r.rng_state());
    }
  }

  static Scalar angle_normalize(Scalar th) {
    constexpr Scalar kPi = Scalar(3.14159265358979323846L);
    const Scalar wrapped = std::fmod(th + kPi, Scalar(2) * kPi);
    return (wrapped < Scalar(0) ? wrapped + Scalar(2) * kPi : wrapped) - kPi;
  }

 private:
  void reset_one(int e) {
    Rng& rng = streams_[std::size_t(e)];
    theta_[std::size_t(e)] = Scalar(rng.uniform(-3.14159265358979, 3.14159265358979));
    theta_dot_[std::size_t(e)] = Scalar(rng.uniform(-1.0, 1.0));
    steps_[std::size_t(e)] = 0;
  }

  void write_obs(int e, Matrix<Scalar>& obs, int row) const {
    obs(row, 0) = std::cos(theta_[std::size_t(e)]);
    obs(row, 1) = std::sin(theta_[std::size_t(e)]);
    obs(row, 2) = theta_dot_[std::size_t(e)];
  }

  EnvSpec<Scalar> spec_;
  int num_envs_;
  Scalar gravity_, mass_, length_, max_speed_;
  Scalar w_angle_, w_vel_, w_torque_;
  std::vector<Scalar> theta_, theta_dot_;
  std::vector<int> steps_;
  std::vector<Rng> streams_;
  StepResult<Scalar> result_;
};

template <class Scalar>
std::unique_ptr<VectorEnv<Scalar>> make_env(const EnvConfig<Scalar>& cfg) {
  check_config(cfg.num_envs >= 1, "make_env: num_envs must be >= 1");
  if (cfg.name == "chain") return std::make_unique<ChainEnv<Scalar>>(cfg);
  if (cfg.name == "point_mass_tracker") return std::make_unique<PointMassTracker<Scalar>>(cfg);
  if (cfg.name == "pendulum_swingup") return std::make_unique<PendulumSwingup<Scalar>>(cfg);
  throw ConfigError("make_env: unknown environment '" + cfg.name + "'");
}

}  // namespace vecsac
