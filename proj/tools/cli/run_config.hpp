#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "driveid/data/synthetic.hpp"
#include "driveid/eval/eval.hpp"

namespace driveid::cli {

/// Command line of one invocation.
struct RunSpec {
  std::string command;
  std::filesystem::path config_path;  // empty: all defaults
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "out";
  bool single_thread = false;
};

/// Synthetic drivers generated when no manifest is given.
struct SyntheticSpec {
  std::size_t drivers = 8;
  double separation = 1.0;
  std::uint64_t profile_seed = 11;
  data::SyntheticConfig generator;
};

struct AblateSpec {
  bool features = true;
  std::vector<double> intervals_s = {5.0, 10.0, 15.0};
  std::vector<std::size_t> tcn_sizes;
};

struct ProjectSpec {
  std::string split = "test";
  eval::Projection method = eval::Projection::Pca;
  eval::TsneConfig tsne;
};

/// Everything a command reads from the configuration file.
struct RunConfig {
  /// Dataset manifest; synthetic data is generated in memory when unset.
  std::optional<std::filesystem::path> manifest;
  SyntheticSpec synthetic;
  eval::PipelineConfig pipeline;
  /// Where eval / project find checkpoints; empty means the output directory.
  std::filesystem::path model_dir;
  AblateSpec ablate;
  ProjectSpec project;
};

/// Parses a configuration file (missing keys keep their defaults, unknown keys
/// are rejected). Relative paths resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});

/// Applies --seed and --single-thread, then validates.
void apply_overrides(RunConfig& cfg, const RunSpec& spec);

/// The fully resolved configuration as structured text.
std::string to_json_text(const RunConfig& cfg);

}  // namespace driveid::cli
