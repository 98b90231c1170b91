#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "vecsac/common.hpp"

namespace vecsac {

// xoshiro256++ with splitmix64 seeding. The state is four words, so streams
// serialize exactly and checkpoint round-trips are bit-identical. Normal
// deviates use Box-Muller with two fresh uniforms per call: no cached spare,
// no hidden state beyond the four words.
class Rng {
 public:
  Rng() : Rng(0) {}

  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  // Independent stream for (seed, index) pairs, e.g. one per environment.
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    return Rng(seed ^ (0x9E3779B97F4A7C15ULL * (index + 1)));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal deviate; consumes exactly two uniforms.
  double normal() {
    const double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  std::uint64_t next_below(std::uint64_t bound) { return next_u64() % bound; }

  const std::array<std::uint64_t, 4>& state() const { return state_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { state_ = s; }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
};

// Matrix of i.i.d. standard normals, row-major fill order.
template <class Scalar>
Matrix<Scalar> normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix<Scalar> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = Scalar(rng.normal());
  return m;
}

}  // namespace vecsac
