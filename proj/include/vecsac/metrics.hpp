#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vecsac/common.hpp"

namespace vecsac {

// Per-iteration training statistics, one JSON line each in the metrics
// stream.
struct MetricsRecord {
  std::int64_t iteration = 0;
  std::int64_t env_steps = 0;
  double mean_episode_return = 0.0;
  double mean_episode_length = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
  double entropy = 0.0;
  double wall_seconds = 0.0;
};

inline nlohmann::json metrics_to_json(const MetricsRecord& r) {
  return nlohmann::json{{"iteration", r.iteration},
                        {"env_steps", r.env_steps},
                        {"mean_episode_return", r.mean_episode_return},
                        {"mean_episode_length", r.mean_episode_length},
                        {"critic_loss", r.critic_loss},
                        {"actor_loss", r.actor_loss},
                        {"alpha", r.alpha},
                        {"entropy", r.entropy},
                        {"wall_seconds", r.wall_seconds}};
}

inline MetricsRecord metrics_from_json(const nlohmann::json& j) {
  MetricsRecord r;
  r.iteration = j.at("iteration").get<std::int64_t>();
  r.env_steps = j.at("env_steps").get<std::int64_t>();
  r.mean_episode_return = j.at("mean_episode_return").get<double>();
  r.mean_episode_length = j.at("mean_episode_length").get<double>();
  r.critic_loss = j.at("critic_loss").get<double>();
  r.actor_loss = j.at("actor_loss").get<double>();
  r.alpha = j.at("alpha").get<double>();
  r.entropy = j.at("entropy").get<double>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  return r;
}

// Append-only line-delimited writer.
class MetricsWriter {
 public:
  MetricsWriter() = default;

  explicit MetricsWriter(const std::string& path) {
    if (path.empty()) return;
    out_.open(path, std::ios::out | std::ios::trunc);
    if (!out_) throw IoError("cannot open metrics file " + path);
  }

  void write(const MetricsRecord& r) {
    if (!out_.is_open()) return;
    out_ << metrics_to_json(r).dump() << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
};

inline std::vector<MetricsRecord> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics file " + path);
  std::vector<MetricsRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(metrics_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

// Equality ignoring wall-clock, for determinism checks.
inline bool metrics_equal(const MetricsRecord& a, const MetricsRecord& b) {
  return a.iteration == b.iteration && a.env_steps == b.env_steps &&
         a.mean_episode_return == b.mean_episode_return &&
         a.mean_episode_length == b.mean_episode_length && a.critic_loss == b.critic_loss &&
         a.actor_loss == b.actor_loss && a.alpha == b.alpha && a.entropy == b.entropy;
}

}  // namespace vecsac
