#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vecsac/common.hpp"
#include "vecsac/envs.hpp"
#include "vecsac/sac.hpp"

namespace vecsac {

using nlohmann::json;

// Full run configuration. Training keys carry the names used in the training
// parameter tables (see docs/config.md for the schema).
struct RunConfig {
  // environment + rollout
  int environments = 8192;                 // parallel envs N_e
  double step_time_seconds = 0.02;         // control timestep
  int rollout_steps_per_environment = 24;  // N_s
  int max_iterations = 800;
  int training_start_iteration = 1;
  std::int64_t replay_buffer_size = 5000000;  // total transitions across envs

  // optimization
  int learning_epochs = 1;
  int mini_batches = 200;  // gradient updates per learning iteration
  int mini_batch_size = 8192;
  double actor_learning_rate = 2e-4;
  double critic_learning_rate = 2e-4;
  double temperature_learning_rate = 2e-5;
  double discount_factor = 0.97;
  double target_smoothing_coefficient = 0.003;
  double initial_temperature = 0.001;
  bool automatic_temperature_tuning = true;
  double target_entropy_scale = 0.167;
  double max_gradient_norm = 1.0;
  int policy_update_frequency = 1;
  int multi_step_return_horizon = 5;

  // networks
  bool actor_observation_normalization = true;
  bool critic_observation_normalization = true;
  std::vector<int> actor_hidden_dimensions = {1024, 512, 256};
  std::vector<int> critic_hidden_dimensions = {1024, 512, 256};
  std::string activation = "silu";
  bool layer_normalization = false;
  double initial_action_noise_std = 0.15;

  // additional knobs
  double mean_head_init_std = 0.01;
  double log_std_min = -5.0;
  double log_std_max = 2.0;
  bool timeout_bootstrap = true;
  double loss_ceiling = 1e6;
  double normalizer_clip = 10.0;
  std::uint64_t seed = 0;
  std::string precision = "float64";  // float32 | float64
  std::string metrics_path;
  std::string checkpoint_path;
  int checkpoint_interval = 0;  // 0: final checkpoint only

  EnvConfig<double> env;

  template <class Scalar>
  SacConfig<Scalar> sac() const {
    SacConfig<Scalar> s;
    s.gamma = Scalar(discount_factor);
    s.tau = Scalar(target_smoothing_coefficient);
    s.nstep = multi_step_return_horizon;
    s.policy_update_period = policy_update_frequency;
    s.actor_lr = Scalar(actor_learning_rate);
    s.critic_lr = Scalar(critic_learning_rate);
    s.temperature_lr = Scalar(temperature_learning_rate);
    s.batch_size = mini_batch_size;
    s.updates_per_iteration = mini_batches * learning_epochs;
    s.target_entropy_scale = Scalar(target_entropy_scale);
    s.sigma0 = Scalar(initial_action_noise_std);
    s.mean_init_std = Scalar(mean_head_init_std);
    s.max_grad_norm = Scalar(max_gradient_norm);
    s.initial_temperature = Scalar(initial_temperature);
    s.auto_temperature = automatic_temperature_tuning;
    s.timeout_bootstrap = timeout_bootstrap;
    s.loss_ceiling = Scalar(loss_ceiling);
    return s;
  }

  void validate() const {
    check_config(environments >= 1, "config: environments must be >= 1");
    check_config(rollout_steps_per_environment >= 1, "config: rollout steps must be >= 1");
    check_config(max_iterations >= 1, "config: max iterations must be >= 1");
    check_config(training_start_iteration >= 1, "config: training start must be >= 1");
    check_config(replay_buffer_size >= environments * 2,
                 "config: replay buffer too small for the env count");
    check_config(learning_epochs >= 1 && mini_batches >= 0 && mini_batch_size >= 1,
                 "config: bad batch settings");
    check_config(!layer_normalization, "config: layer normalization is not supported");
    check_config(precision == "float32" || precision == "float64",
                 "config: precision must be float32 or float64");
    check_config(initial_temperature > 0.0 ||
                     (initial_temperature == 0.0 && !automatic_temperature_tuning),
                 "config: zero initial temperature requires automatic tuning off");
    check_config(actor_observation_normalization == critic_observation_normalization,
                 "config: actor and critic share one normalizer; set both flags identically");
    check_config(!env.name.empty(), "config: no environment configured");
  }
};

// Presets. "paper" is the full-scale training table; "desk" shrinks the
// problem so a run finishes on a laptop CPU in minutes.
inline void apply_profile(RunConfig& c, const std::string& profile) {
  if (profile == "paper") return;  // struct defaults are the paper values
  if (profile == "desk") {
    c.environments = 64;
    c.rollout_steps_per_environment = 24;
    c.actor_hidden_dimensions = {256, 128};
    c.critic_hidden_dimensions = {256, 128};
    c.mini_batches = 16;
    c.replay_buffer_size = 200000;
    c.mini_batch_size = 256;
    c.actor_learning_rate = 1e-3;
    c.critic_learning_rate = 1e-3;
    c.temperature_learning_rate = 5e-3;
    c.max_iterations = 150;
    return;
  }
  throw ConfigError("unknown profile '" + profile + "' (expected desk or paper)");
}

// ---- JSON parsing ----------------------------------------------------------

namespace detail {

template <class T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline JointSpec<double> parse_joint(const json& j) {
  JointSpec<double> out;
  out.name = j.at("name").get<std::string>();
  out.default_pos = j.at("default_position").get<double>();
  out.soft_min = j.at("soft_min").get<double>();
  out.soft_max = j.at("soft_max").get<double>();
  out.hard_min = j.value("hard_min", out.soft_min);
  out.hard_max = j.value("hard_max", out.soft_max);
  out.action_scale = j.at("action_scale").get<double>();
  validate_joint(out);
  return out;
}

inline json joint_to_json(const JointSpec<double>& s) {
  return json{{"name", s.name},
              {"default_position", s.default_pos},
              {"soft_min", s.soft_min},
              {"soft_max", s.soft_max},
              {"hard_min", s.hard_min},
              {"hard_max", s.hard_max},
              {"action_scale", s.action_scale}};
}

inline EnvConfig<double> parse_env_config(const json& j) {
  EnvConfig<double> out;
  out.name = j.at("name").get<std::string>();
  detail::maybe(j, "num_envs", out.num_envs);
  out.horizon = j.at("horizon").get<int>();
  detail::maybe(j, "step_time_seconds", out.dt);
  if (j.contains("joints"))
    for (const auto& joint : j.at("joints")) out.joints.push_back(parse_joint(joint));
  if (j.contains("reward_terms"))
    for (const auto& t : j.at("reward_terms")) {
      RewardTermConfig term;
      term.name = t.at("name").get<std::string>();
      term.weight = t.at("weight").get<double>();
      term.sigma = t.value("sigma", 0.0);
      out.reward_terms.push_back(term);
    }
  if (j.contains("params"))
    for (const auto& [key, value] : j.at("params").items())
      out.params[key] = value.get<double>();
  return out;
}

inline json env_config_to_json(const EnvConfig<double>& c) {
  json j{{"name", c.name},
         {"num_envs", c.num_envs},
         {"horizon", c.horizon},
         {"step_time_seconds", c.dt}};
  j["joints"] = json::array();
  for (const auto& joint : c.joints) j["joints"].push_back(joint_to_json(joint));
  j["reward_terms"] = json::array();
  for (const auto& t : c.reward_terms) {
    json term{{"name", t.name}, {"weight", t.weight}};
    if (t.sigma != 0.0) term["sigma"] = t.sigma;
    j["reward_terms"].push_back(term);
  }
  if (!c.params.empty()) {
    j["params"] = json::object();
    for (const auto& [key, value] : c.params) j["params"][key] = value;
  }
  return j;
}

template <class Scalar>
EnvConfig<Scalar> env_config_cast(const EnvConfig<double>& c) {
  EnvConfig<Scalar> out;
  out.name = c.name;
  out.num_envs = c.num_envs;
  out.horizon = c.horizon;
  out.dt = Scalar(c.dt);
  for (const auto& j : c.joints)
    out.joints.push_back({j.name, Scalar(j.default_pos), Scalar(j.soft_min), Scalar(j.soft_max),
                          Scalar(j.hard_min), Scalar(j.hard_max), Scalar(j.action_scale)});
  out.reward_terms = c.reward_terms;
  out.params = c.params;
  return out;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return j;
}

inline RunConfig parse_run_config(const json& j, const std::string& base_dir = ".") {
  RunConfig c;
  apply_profile(c, j.value("profile", std::string("desk")));

  detail::maybe(j, "environments", c.environments);
  detail::maybe(j, "step_time_seconds", c.step_time_seconds);
  detail::maybe(j, "rollout_steps_per_environment", c.rollout_steps_per_environment);
  detail::maybe(j, "max_iterations", c.max_iterations);
  detail::maybe(j, "training_start_iteration", c.training_start_iteration);
  detail::maybe(j, "replay_buffer_size", c.replay_buffer_size);
  detail::maybe(j, "learning_epochs", c.learning_epochs);
  detail::maybe(j, "mini_batches", c.mini_batches);
  detail::maybe(j, "mini_batch_size", c.mini_batch_size);
  detail::maybe(j, "actor_learning_rate", c.actor_learning_rate);
  detail::maybe(j, "critic_learning_rate", c.critic_learning_rate);
  detail::maybe(j, "temperature_learning_rate", c.temperature_learning_rate);
  detail::maybe(j, "discount_factor", c.discount_factor);
  detail::maybe(j, "target_smoothing_coefficient", c.target_smoothing_coefficient);
  detail::maybe(j, "initial_temperature", c.initial_temperature);
  detail::maybe(j, "automatic_temperature_tuning", c.automatic_temperature_tuning);
  detail::maybe(j, "target_entropy_scale", c.target_entropy_scale);
  detail::maybe(j, "max_gradient_norm", c.max_gradient_norm);
  detail::maybe(j, "policy_update_frequency", c.policy_update_frequency);
  detail::maybe(j, "multi_step_return_horizon", c.multi_step_return_horizon);
  detail::maybe(j, "actor_observation_normalization", c.actor_observation_normalization);
  detail::maybe(j, "critic_observation_normalization", c.critic_observation_normalization);
  detail::maybe(j, "actor_hidden_dimensions", c.actor_hidden_dimensions);
  detail::maybe(j, "critic_hidden_dimensions", c.critic_hidden_dimensions);
  detail::maybe(j, "activation", c.activation);
  detail::maybe(j, "layer_normalization", c.layer_normalization);
  detail::maybe(j, "initial_action_noise_std", c.initial_action_noise_std);
  detail::maybe(j, "mean_head_init_std", c.mean_head_init_std);
  detail::maybe(j, "log_std_min", c.log_std_min);
  detail::maybe(j, "log_std_max", c.log_std_max);
  detail::maybe(j, "timeout_bootstrap", c.timeout_bootstrap);
  detail::maybe(j, "loss_ceiling", c.loss_ceiling);
  detail::maybe(j, "normalizer_clip", c.normalizer_clip);
  detail::maybe(j, "seed", c.seed);
  detail::maybe(j, "precision", c.precision);
  detail::maybe(j, "metrics_path", c.metrics_path);
  detail::maybe(j, "checkpoint_path", c.checkpoint_path);
  detail::maybe(j, "checkpoint_interval", c.checkpoint_interval);

  if (j.contains("env")) {
    c.env = parse_env_config(j.at("env"));
  } else if (j.contains("env_file")) {
    const auto path = std::filesystem::path(base_dir) / j.at("env_file").get<std::string>();
    c.env = parse_env_config(read_json_file(path.string()));
  } else {
    throw ConfigError("config: provide 'env' or 'env_file'");
  }
  // The run-level env count and timestep win over the env description.
  if (j.contains("environments")) c.env.num_envs = c.environments;
  else c.environments = c.env.num_envs;
  if (j.contains("step_time_seconds")) c.env.dt = c.step_time_seconds;
  else c.step_time_seconds = c.env.dt;

  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path, const std::string& profile_override = "",
                                 std::int64_t seed_override = -1) {
  json j = read_json_file(path);
  if (!profile_override.empty()) j["profile"] = profile_override;
  RunConfig c = parse_run_config(j, std::filesystem::path(path).parent_path().string());
  if (seed_override >= 0) c.seed = std::uint64_t(seed_override);
  return c;
}

inline json run_config_to_json(const RunConfig& c) {
  json j;
  j["environments"] = c.environments;
  j["step_time_seconds"] = c.step_time_seconds;
  j["rollout_steps_per_environment"] = c.rollout_steps_per_environment;
  j["max_iterations"] = c.max_iterations;
  j["training_start_iteration"] = c.training_start_iteration;
  j["replay_buffer_size"] = c.replay_buffer_size;
  j["learning_epochs"] = c.learning_epochs;
  j["mini_batches"] = c.mini_batches;
  j["mini_batch_size"] = c.mini_batch_size;
  j["actor_learning_rate"] = c.actor_learning_rate;
  j["critic_learning_rate"] = c.critic_learning_rate;
  j["temperature_learning_rate"] = c.temperature_learning_rate;
  j["discount_factor"] = c.discount_factor;
  j["target_smoothing_coefficient"] = c.target_smoothing_coefficient;
  j["initial_temperature"] = c.initial_temperature;
  j["automatic_temperature_tuning"] = c.automatic_temperature_tuning;
  j["target_entropy_scale"] = c.target_entropy_scale;
  j["max_gradient_norm"] = c.max_gradient_norm;
  j["policy_update_frequency"] = c.policy_update_frequency;
  j["multi_step_return_horizon"] = c.multi_step_return_horizon;
  j["actor_observation_normalization"] = c.actor_observation_normalization;
  j["critic_observation_normalization"] = c.critic_observation_normalization;
  j["actor_hidden_dimensions"] = c.actor_hidden_dimensions;
  j["critic_hidden_dimensions"] = c.critic_hidden_dimensions;
  j["activation"] = c.activation;
  j["layer_normalization"] = c.layer_normalization;
  j["initial_action_noise_std"] = c.initial_action_noise_std;
  j["mean_head_init_std"] = c.mean_head_init_std;
  j["log_std_min"] = c.log_std_min;
  j["log_std_max"] = c.log_std_max;
  j["timeout_bootstrap"] = c.timeout_bootstrap;
  j["loss_ceiling"] = c.loss_ceiling;
  j["normalizer_clip"] = c.normalizer_clip;
  j["seed"] = c.seed;
  j["precision"] = c.precision;
  j["metrics_path"] = c.metrics_path;
  j["checkpoint_path"] = c.checkpoint_path;
  j["checkpoint_interval"] = c.checkpoint_interval;
  j["env"] = env_config_to_json(c.env);
  j["profile"] = "paper";  // values above are fully resolved; do not re-apply
  return j;
}

}  // namespace vecsac
