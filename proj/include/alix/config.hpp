#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "alix/env.hpp"
#include "alix/rl.hpp"

namespace alix {

enum class RunMode { online, offline_eval, probe };

std::string to_string(RunMode m);
RunMode run_mode_from_string(const std::string& s);

struct ExperimentConfig {
  RunMode mode = RunMode::offline_eval;
  std::string name = "run";
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "runs";

  AgentConfig agent;
  DotReacherConfig env;
  std::string pretrained_encoder;  // checkpoint whose conv weights seed the encoder

  std::size_t dataset_size = 15000;
  std::size_t batch_size = 256;
  std::size_t eval_steps = 10000;
  std::size_t improve_steps = 5000;
  std::size_t online_steps = 20000;
  std::size_t seed_steps = 1000;  // random-action warmup of online runs
  double explore_start = 0.3;
  double explore_end = 0.1;
  double explore_decay = 0.5;     // fraction of online steps over which noise decays

  std::size_t metrics_every = 100;
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only
  std::size_t diag_batch = 256;      // fixed batch for Q / Monte-Carlo diagnostics
  std::size_t eval_episodes = 10;
  double nd_ema_decay = 0.99;
  std::vector<double> probe_amplitudes{0.0, 0.25, 0.5, 1.0, 2.0};
  std::size_t probe_jacobian_samples = 64;

  /// Throws UsageError naming the offending field.
  void validate() const;
};

/// Applies one `section.key=value` assignment. Throws UsageError for unknown
/// keys and malformed values.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
/// Splits "section.key=value" and applies it.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

/// Reads an INI file (flat [sections] of key = value) over the defaults, then
/// applies `overrides` in order, then validates.
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});
ExperimentConfig config_from_string(const std::string& ini, const std::vector<std::string>& overrides = {});

/// Every known key with its resolved value.
nlohmann::json to_json(const ExperimentConfig& cfg);
/// Inverse of to_json (keys absent from `j` keep their defaults).
ExperimentConfig config_from_json(const nlohmann::json& j);
/// All keys in `section.key` form, in documentation order.
std::vector<std::string> config_keys();

}  // namespace alix
