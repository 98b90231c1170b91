#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vecsac/common.hpp"

namespace vecsac {

// One weighted reward component; sigma only meaningful for tracking kernels.
struct RewardTermConfig {
  std::string name;
  double weight = 0.0;
  double sigma = 0.0;
};

inline const RewardTermConfig* find_term(const std::vector<RewardTermConfig>& terms,
                                         const std::string& name) {
  for (const auto& t : terms)
    if (t.name == name) return &t;
  return nullptr;
}

// w * exp(-||cmd - vel||^2 / sigma^2)
template <class Scalar>
Scalar reward_track_lin_vel(const Vector<Scalar>& cmd_xy, const Vector<Scalar>& vel_xy,
                            Scalar sigma, Scalar w) {
  check_config(sigma > Scalar(0), "reward_track_lin_vel: sigma must be > 0");
  check_shape(cmd_xy.size() == vel_xy.size(), "reward_track_lin_vel: size mismatch");
  return w * std::exp(-(cmd_xy - vel_xy).squaredNorm() / (sigma * sigma));
}

// Same kernel for the scalar yaw-rate channel.
template <class Scalar>
Scalar reward_track_ang_vel(Scalar cmd_z, Scalar omega_z, Scalar sigma, Scalar w) {
  check_config(sigma > Scalar(0), "reward_track_ang_vel: sigma must be > 0");
  const Scalar e = cmd_z - omega_z;
  return w * std::exp(-e * e / (sigma * sigma));
}

// w * ||x||^2; covers the velocity, torque, acceleration and action-rate
// penalties, which all share this form.
template <class Scalar>
Scalar penalty_quadratic(const Vector<Scalar>& x, Scalar w) {
  return w * x.squaredNorm();
}

// w * sum_j ([q_j - soft_max_j]_+ + [soft_min_j - q_j]_+)
template <class Scalar>
Scalar penalty_joint_limits(const Vector<Scalar>& q, const Vector<Scalar>& soft_min,
                            const Vector<Scalar>& soft_max, Scalar w) {
  check_shape(q.size() == soft_min.size() && q.size() == soft_max.size(),
              "penalty_joint_limits: size mismatch");
  Scalar overshoot = Scalar(0);
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    overshoot += std::max(q(j) - soft_max(j), Scalar(0));
    overshoot += std::max(soft_min(j) - q(j), Scalar(0));
  }
  return w * overshoot;
}

// w * ||q - q0||_1
template <class Scalar>
Scalar penalty_joint_deviation(const Vector<Scalar>& q, const Vector<Scalar>& q0, Scalar w) {
  check_shape(q.size() == q0.size(), "penalty_joint_deviation: size mismatch");
  return w * (q - q0).template lpNorm<1>();
}

// w on genuine failures only; timeouts and running steps incur nothing.
template <class Scalar>
Scalar reward_termination(bool is_failure, Scalar w) {
  return is_failure ? w : Scalar(0);
}

}  // namespace vecsac
