#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "vecsac/approximator.hpp"
#include "vecsac/common.hpp"
#include "vecsac/sac.hpp"
#include "vecsac/serial.hpp"

namespace vecsac {

// Checkpoint file framing: an 8-byte magic, a format version, the scalar
// width, the payload, and a trailing FNV-1a checksum over everything before
// it. See docs/formats.md for the payload layout.
inline constexpr char kCheckpointMagic[8] = {'V', 'S', 'A', 'C', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_checkpoint_file(const std::string& path, std::uint32_t scalar_bytes,
                                  const std::string& payload) {
  std::string framed;
  framed.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  BinWriter header;
  header.pod(kCheckpointVersion);
  header.pod(scalar_bytes);
  framed.append(header.bytes());
  framed.append(payload);
  const std::uint64_t checksum = fnv1a64(framed.data(), framed.size());
  BinWriter tail;
  tail.pod(checksum);
  framed.append(tail.bytes());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint file " + path);
  out.write(framed.data(), std::streamsize(framed.size()));
  if (!out) throw IoError("failed writing checkpoint " + path);
}

// Returns the payload; throws on bad magic, version, width or checksum.
inline std::string read_checkpoint_file(const std::string& path,
                                        std::uint32_t expected_scalar_bytes = 0,
                                        std::uint32_t* scalar_bytes_out = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint file " + path);
  std::string framed((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  constexpr std::size_t kHeader = sizeof(kCheckpointMagic) + 2 * sizeof(std::uint32_t);
  if (framed.size() < kHeader + sizeof(std::uint64_t))
    throw IoError("checkpoint too short: " + path);
  if (std::string(framed.data(), sizeof(kCheckpointMagic)) !=
      std::string(kCheckpointMagic, sizeof(kCheckpointMagic)))
    throw IoError("checkpoint magic mismatch: " + path);

  const std::size_t body = framed.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, framed.data() + body, sizeof(stored));
  if (stored != fnv1a64(framed.data(), body))
    throw IoError("checkpoint checksum mismatch (corrupt file): " + path);

  std::string header_bytes = framed.substr(sizeof(kCheckpointMagic), 2 * sizeof(std::uint32_t));
  BinReader header(header_bytes);
  const auto version = header.pod<std::uint32_t>();
  const auto scalar_bytes = header.pod<std::uint32_t>();
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version");
  if (expected_scalar_bytes && scalar_bytes != expected_scalar_bytes)
    throw IoError("checkpoint precision does not match the configuration");
  if (scalar_bytes_out) *scalar_bytes_out = scalar_bytes;
  return framed.substr(kHeader, body - kHeader);
}

// ---- component serializers -------------------------------------------------

template <class Scalar>
void write_mlp(BinWriter& w, const MlpParams<Scalar>& p) {
  w.pod(std::uint8_t(p.activation));
  w.pod(std::int64_t(p.weights.size()));
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    w.eigen(p.weights[l]);
    w.eigen(p.biases[l]);
  }
}

template <class Scalar>
MlpParams<Scalar> read_mlp(BinReader& r) {
  MlpParams<Scalar> p;
  p.activation = Activation(r.pod<std::uint8_t>());
  const auto layers = r.pod<std::int64_t>();
  for (std::int64_t l = 0; l < layers; ++l) {
    p.weights.push_back(r.eigen<Matrix<Scalar>>());
    p.biases.push_back(r.eigen<Vector<Scalar>>());
  }
  return p;
}

template <class Scalar>
void write_bundle(BinWriter& w, const GradBundle<Scalar>& g) {
  w.pod(std::int64_t(g.weights.size()));
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    w.eigen(g.weights[l]);
    w.eigen(g.biases[l]);
  }
}

template <class Scalar>
GradBundle<Scalar> read_bundle(BinReader& r) {
  GradBundle<Scalar> g;
  const auto layers = r.pod<std::int64_t>();
  for (std::int64_t l = 0; l < layers; ++l) {
    g.weights.push_back(r.eigen<Matrix<Scalar>>());
    g.biases.push_back(r.eigen<Vector<Scalar>>());
  }
  return g;
}

template <class Scalar>
void write_adam(BinWriter& w, const AdamState<Scalar>& a) {
  write_bundle(w, a.m);
  write_bundle(w, a.v);
  w.pod(a.t);
  w.pod(a.beta1);
  w.pod(a.beta2);
  w.pod(a.eps);
  w.pod(a.lr);
}

template <class Scalar>
AdamState<Scalar> read_adam(BinReader& r) {
  AdamState<Scalar> a;
  a.m = read_bundle<Scalar>(r);
  a.v = read_bundle<Scalar>(r);
  a.t = r.pod<std::int64_t>();
  a.beta1 = r.pod<Scalar>();
  a.beta2 = r.pod<Scalar>();
  a.eps = r.pod<Scalar>();
  a.lr = r.pod<Scalar>();
  return a;
}

template <class Scalar>
void write_temperature(BinWriter& w, const Temperature<Scalar>& t) {
  w.pod(t.log_alpha);
  w.pod(t.target_entropy);
  w.pod(t.adam.m);
  w.pod(t.adam.v);
  w.pod(t.adam.t);
  w.pod(t.adam.beta1);
  w.pod(t.adam.beta2);
  w.pod(t.adam.eps);
  w.pod(t.adam.lr);
}

template <class Scalar>
Temperature<Scalar> read_temperature(BinReader& r) {
  Temperature<Scalar> t;
  t.log_alpha = r.pod<Scalar>();
  t.target_entropy = r.pod<Scalar>();
  t.adam.m = r.pod<Scalar>();
  t.adam.v = r.pod<Scalar>();
  t.adam.t = r.pod<std::int64_t>();
  t.adam.beta1 = r.pod<Scalar>();
  t.adam.beta2 = r.pod<Scalar>();
  t.adam.eps = r.pod<Scalar>();
  t.adam.lr = r.pod<Scalar>();
  return t;
}

}  // namespace vecsac
