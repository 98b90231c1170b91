#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <type_traits>

#include "vecsac/common.hpp"

namespace vecsac {

inline std::uint64_t fnv1a64(const char* data, std::size_t len) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= std::uint8_t(data[i]);
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Append-only little-endian byte sink.
class BinWriter {
 public:
  template <class T>
  void pod(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const char* p = reinterpret_cast<const char*>(&v);
    data_.append(p, sizeof(T));
  }

  void str(const std::string& s) {
    pod(std::uint64_t(s.size()));
    data_.append(s);
  }

  template <class Derived>
  void eigen(const Eigen::MatrixBase<Derived>& m) {
    pod(std::int64_t(m.rows()));
    pod(std::int64_t(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) pod(m(i, j));
  }

  void rng_state(const std::array<std::uint64_t, 4>& s) {
    for (auto w : s) pod(w);
  }

  const std::string& bytes() const { return data_; }

 private:
  std::string data_;
};

// Bounds-checked reader over a byte buffer.
class BinReader {
 public:
  explicit BinReader(const std::string& data) : data_(data) {}

  template <class T>
  T pod() {
    static_assert(std::is_trivially_copyable_v<T>);
    if (pos_ + sizeof(T) > data_.size()) throw IoError("checkpoint: truncated data");
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string str() {
    const auto len = pod<std::uint64_t>();
    if (pos_ + len > data_.size()) throw IoError("checkpoint: truncated string");
    std::string s(data_.data() + pos_, len);
    pos_ += len;
    return s;
  }

  template <class M>
  M eigen() {
    const auto rows = pod<std::int64_t>();
    const auto cols = pod<std::int64_t>();
    M m(rows, cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = pod<typename M::Scalar>();
    return m;
  }

  std::array<std::uint64_t, 4> rng_state() {
    std::array<std::uint64_t, 4> s{};
    for (auto& w : s) w = pod<std::uint64_t>();
    return s;
  }

  bool exhausted() const { return pos_ == data_.size(); }

 private:
  const std::string& data_;
  std::size_t pos_ = 0;
};

}  // namespace vecsac
