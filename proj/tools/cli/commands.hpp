#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace driveid::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Files written by the commands, relative to the output directory.
namespace files {
inline constexpr const char* kResolvedConfig = "resolved_config.json";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kEncoder = "encoder.ckpt";
inline constexpr const char* kNormalizer = "normalizer.json";
inline constexpr const char* kClassifier = "gbdt.json";
inline constexpr const char* kRunManifest = "run_manifest.json";
inline constexpr const char* kLossHistory = "loss_history.csv";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kConfusion = "confusion.csv";
inline constexpr const char* kPoints = "points.csv";
inline constexpr const char* kAblationFeatures = "ablation_features.csv";
inline constexpr const char* kAblationIntervals = "ablation_intervals.csv";
inline constexpr const char* kAblationEmbedding = "ablation_embedding.csv";
}  // namespace files

void cmd_synth(const RunConfig& cfg, const RunSpec& spec, std::ostream& log);
void cmd_train(const RunConfig& cfg, const RunSpec& spec, std::ostream& log);
void cmd_eval(const RunConfig& cfg, const RunSpec& spec, std::ostream& log);
void cmd_ablate(const RunConfig& cfg, const RunSpec& spec, std::ostream& log);
void cmd_project(const RunConfig& cfg, const RunSpec& spec, std::ostream& log);

/// Loads the configuration, echoes it into the output directory and runs the
/// command. Errors are reported as one line on `err`; returns the exit code.
int run(const RunSpec& spec, std::ostream& log, std::ostream& err);

const std::vector<std::string>& command_names();

}  // namespace driveid::cli
