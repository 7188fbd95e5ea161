#pragma once

/**
 * @file
 * @brief Experiment configs, run manifests and CSV traces.
 *
 * Configs are JSON objects in which every training scalar is required:
 *
 *     {
 *       "task": {"kind": "bandit", "reward_table": [[1, 0.5, 0]], "noise_std": 0},
 *       "mu": 0.5, "alpha": 0, "lr": 0.1, "group_size": 6, "clip_eps": 0.2,
 *       "kl_beta": 0, "iterations": 200, "inner_epochs": 1, "seed": 42,
 *       "loss_kind": "gopo",
 *       "std_normalize": false,          (optional)
 *       "compare": ["gopo", "grpo"]      (optional, used by `compare`)
 *     }
 *
 * Traces use the fixed column order of kTraceHeader with 17 significant digits.
 */

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gopo/trainer.hpp"

namespace gopo {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr std::string_view kTraceHeader =
    "step,mean_reward,loss,grad_norm,entropy,chi2_vs_anchor,tv_vs_anchor,best_arm_prob";

struct ExperimentConfig
{
  SyntheticTask task;
  TrainConfig train;
  std::vector<LossKind> compare;
};

struct RunManifest
{
  ExperimentConfig config;
  std::string version;
  std::string timestamp;
};

/// Throws ConfigError (naming the field) or ParseError.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig parse_experiment_text(std::string_view text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

nlohmann::json to_json(const ExperimentConfig& config);
nlohmann::json to_json(const RunManifest& manifest);
RunManifest parse_manifest(const nlohmann::json& j);

/// Current UTC time as YYYY-MM-DDThh:mm:ssZ.
std::string utc_timestamp();

/// %.17g; parses back to the identical double.
std::string format_double(double x);

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> read_trace_csv(std::istream& in);

/// step,gate_closed,nonzero_advantages
void write_gate_csv(std::ostream& out, const std::vector<TraceRecord>& trace);

/// Reads a whole file; throws std::runtime_error when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace gopo
