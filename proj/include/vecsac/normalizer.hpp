#pragma once

#include <cmath>

#include "vecsac/common.hpp"
#include "vecsac/serial.hpp"

namespace vecsac {

// Running per-dimension mean/variance normalizer with clipping. Statistics
// are merged batch-wise (parallel variance combination) and only when the
// caller passes update = true, i.e. during collection; gradient updates see
// frozen statistics. Normalization always uses the statistics from before
// the current batch's merge.
template <class Scalar>
class ObsNormalizer {
 public:
  ObsNormalizer() = default;

  ObsNormalizer(int dim, Scalar clip = Scalar(10), Scalar eps = Scalar(1e-8))
      : mean_(Vector<Scalar>::Zero(dim)),
        var_(Vector<Scalar>::Ones(dim)),
        count_(0),
        clip_(clip),
        eps_(eps) {}

  Matrix<Scalar> normalize(const Matrix<Scalar>& obs, bool update) {
    check_shape(obs.cols() == mean_.size(), "normalize_obs: width mismatch");
    Matrix<Scalar> out(obs.rows(), obs.cols());
    for (Eigen::Index j = 0; j < obs.cols(); ++j) {
      const Scalar scale = Scalar(1) / std::sqrt(var_(j) + eps_);
      for (Eigen::Index i = 0; i < obs.rows(); ++i)
        out(i, j) = std::clamp((obs(i, j) - mean_(j)) * scale, -clip_, clip_);
    }
    if (update) merge(obs);
    return out;
  }

  const Vector<Scalar>& mean() const { return mean_; }
  const Vector<Scalar>& variance() const { return var_; }
  double count() const { return count_; }
  Scalar clip() const { return clip_; }

  void save(BinWriter& w) const {
    w.eigen(mean_);
    w.eigen(var_);
    w.pod(count_);
    w.pod(clip_);
    w.pod(eps_);
  }

  void load(BinReader& r) {
    mean_ = r.eigen<Vector<Scalar>>();
    var_ = r.eigen<Vector<Scalar>>();
    count_ = r.pod<double>();
    clip_ = r.pod<Scalar>();
    eps_ = r.pod<Scalar>();
  }

 private:
  void merge(const Matrix<Scalar>& obs) {
    const double nb = double(obs.rows());
    if (nb == 0) return;
    Vector<Scalar> batch_mean = obs.colwise().mean().transpose();
    Vector<Scalar> batch_var(obs.cols());
    for (Eigen::Index j = 0; j < obs.cols(); ++j) {
      Scalar acc = Scalar(0);
      for (Eigen::Index i = 0; i < obs.rows(); ++i) {
        const Scalar dlt = obs(i, j) - batch_mean(j);
        acc += dlt * dlt;
      }
      batch_var(j) = acc / Scalar(nb);
    }
    if (count_ == 0) {
      mean_ = batch_mean;
      var_ = batch_var;
      count_ = nb;
      return;
    }
    const double na = count_;
    const double n = na + nb;
    for (Eigen::Index j = 0; j < obs.cols(); ++j) {
      const Scalar delta = batch_mean(j) - mean_(j);
      const Scalar m2 = var_(j) * Scalar(na) + batch_var(j) * Scalar(nb) +
                        delta * delta * Scalar(na * nb / n);
      mean_(j) += delta * Scalar(nb / n);
      var_(j) = m2 / Scalar(n);
    }
    count_ = n;
  }

  Vector<Scalar> mean_;
  Vector<Scalar> var_;
  double count_ = 0;
  Scalar clip_ = Scalar(10);
  Scalar eps_ = Scalar(1e-8);
};

}  // namespace vecsac
