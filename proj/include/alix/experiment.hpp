#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "alix/config.hpp"
#include "alix/metrics_io.hpp"

namespace alix {

struct RunOptions {
  std::string resume_from;                // checkpoint written by an earlier run of the same config and seed
  std::optional<std::uint64_t> stop_at;   // stop (after checkpointing) once this step completes
  std::function<void(const std::string&)> log;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::string dir;
  bool ok = true;
  std::string error;
  std::vector<MetricsRow> rows;  // rows produced by this invocation
  nlohmann::json summary;
};

/// <output_dir>/<name>/seed_<seed>
std::string seed_directory(const ExperimentConfig& cfg, std::uint64_t seed);

/// Runs one seed and writes metrics.csv, config.json, checkpoints and
/// summary.json into its directory. A NumericError marks the run failed in
/// the summary instead of propagating.
SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& opts = {});
/// Every seed of the config in order; failures do not stop later seeds.
std::vector<SeedResult> run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Offline-protocol rows: augmented, non_augmented, proprioceptive,
/// frozen_random, frozen_pretrained, norm_r, nstep10, plus alix.
std::vector<std::string> preset_names();
void apply_preset(ExperimentConfig& cfg, const std::string& preset);
/// Named groups of presets: "ablations" (the seven offline rows) and
/// "regularizers" (non_augmented, augmented, alix, proprioceptive).
std::vector<std::string> sweep_rows(const std::string& sweep);
/// One config per row, named after the row and placed under
/// <output_dir>/<name>. Rows that need another row's weights are ordered
/// after it.
std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& base, const std::string& sweep);

/// Per-row, per-seed summaries gathered from a finished sweep.
nlohmann::json collect_sweep(const std::vector<ExperimentConfig>& rows);

}  // namespace alix
