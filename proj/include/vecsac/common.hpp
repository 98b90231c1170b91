#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace vecsac {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using FlagVector = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>;
using FlagMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Bad or inconsistent user-supplied configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor dimensions do not line up.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training produced non-finite values or a loss above the ceiling.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Filesystem / serialization failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void check_config(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

inline void check_shape(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

// log(1 + e^x) without overflow for large |x|.
template <class Scalar>
Scalar softplus(Scalar x) {
  if (x > Scalar(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace vecsac
