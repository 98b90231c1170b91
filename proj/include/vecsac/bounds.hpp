#pragma once

#include <string>
#include <vector>

#include "vecsac/common.hpp"

namespace vecsac {

// One actuated joint: default position, soft and hard range limits, and the
// action-manager scale that maps policy outputs to position offsets.
template <class Scalar>
struct JointSpec {
  std::string name;
  Scalar default_pos = Scalar(0);
  Scalar soft_min = Scalar(0);
  Scalar soft_max = Scalar(0);
  Scalar hard_min = Scalar(0);
  Scalar hard_max = Scalar(0);
  Scalar action_scale = Scalar(1);
};

template <class Scalar>
void validate_joint(const JointSpec<Scalar>& j) {
  check_config(j.action_scale > Scalar(0), "joint '" + j.name + "': action_scale must be > 0");
  check_config(j.hard_min <= j.soft_min, "joint '" + j.name + "': hard_min above soft_min");
  check_config(j.soft_min < j.soft_max, "joint '" + j.name + "': empty soft range");
  check_config(j.soft_max <= j.hard_max, "joint '" + j.name + "': soft_max above hard_max");
  check_config(j.soft_min <= j.default_pos && j.default_pos <= j.soft_max,
               "joint '" + j.name + "': default position outside soft limits");
}

// Per-dimension policy output bounds plus the affine squash parameters
// b = (a_max + a_min)/2 and c = (a_max - a_min)/2.
template <class Scalar>
struct ActionBounds {
  Vector<Scalar> a_min;
  Vector<Scalar> a_max;
  Vector<Scalar> b;
  Vector<Scalar> c;

  Eigen::Index dim() const { return a_min.size(); }
};

// Bounds from the distance between the default position and the *soft*
// limits, rescaled by the action scale: a_min = -|q_soft_min - q0| / s,
// a_max = |q_soft_max - q0| / s.
template <class Scalar>
ActionBounds<Scalar> derive_bounds(const std::vector<JointSpec<Scalar>>& joints) {
  check_config(!joints.empty(), "derive_bounds: no joints");
  const Eigen::Index d = Eigen::Index(joints.size());
  ActionBounds<Scalar> out;
  out.a_min.resize(d);
  out.a_max.resize(d);
  out.b.resize(d);
  out.c.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto& joint = joints[std::size_t(j)];
    validate_joint(joint);
    const Scalar r_minus = std::abs(joint.soft_min - joint.default_pos);
    const Scalar r_plus = std::abs(joint.soft_max - joint.default_pos);
    check_config(r_minus > Scalar(0) && r_plus > Scalar(0),
                 "joint '" + joint.name +
                     "': default position sits on a soft limit, action range is degenerate");
    out.a_min(j) = -r_minus / joint.action_scale;
    out.a_max(j) = r_plus / joint.action_scale;
    out.b(j) = (out.a_max(j) + out.a_min(j)) / Scalar(2);
    out.c(j) = (out.a_max(j) - out.a_min(j)) / Scalar(2);
  }
  return out;
}

// Joint position targets from a policy action: s (.) a + q0. Actions must
// already lie inside the derived bounds.
template <class Scalar>
Vector<Scalar> env_action_transform(const std::vector<JointSpec<Scalar>>& joints,
                                    const Vector<Scalar>& action) {
  check_shape(action.size() == Eigen::Index(joints.size()),
              "env_action_transform: action width mismatch");
  const ActionBounds<Scalar> bounds = derive_bounds(joints);
  Vector<Scalar> targets(action.size());
  for (Eigen::Index j = 0; j < action.size(); ++j) {
    check_config(action(j) >= bounds.a_min(j) && action(j) <= bounds.a_max(j),
                 "env_action_transform: action outside bounds for joint '" +
                     joints[std::size_t(j)].name + "'");
    targets(j) = joints[std::size_t(j)].action_scale * action(j) +
                 joints[std::size_t(j)].default_pos;
  }
  return targets;
}

// Batched variant over [B x d] actions; bounds derived once.
template <class Scalar>
Matrix<Scalar> env_action_transform_batch(const std::vector<JointSpec<Scalar>>& joints,
                                          const ActionBounds<Scalar>& bounds,
                                          const Matrix<Scalar>& actions) {
  check_shape(actions.cols() == Eigen::Index(joints.size()),
              "env_action_transform_batch: action width mismatch");
  Matrix<Scalar> targets(actions.rows(), actions.cols());
  for (Eigen::Index j = 0; j < actions.cols(); ++j) {
    const auto& joint = joints[std::size_t(j)];
    for (Eigen::Index i = 0; i < actions.rows(); ++i) {
      check_config(actions(i, j) >= bounds.a_min(j) && actions(i, j) <= bounds.a_max(j),
                   "env_action_transform_batch: action outside bounds for joint '" + joint.name +
                       "'");
      targets(i, j) = joint.action_scale * actions(i, j) + joint.default_pos;
    }
  }
  return targets;
}

}  // namespace vecsac
