#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driveid/data/dataset.hpp"
#include "driveid/encoder/encoder.hpp"
#include "driveid/gbdt/gbdt.hpp"
#include "driveid/training/training.hpp"

namespace driveid::eval {

using numerics::Tensor;

struct EvalConfig {
  std::vector<std::size_t> group_sizes = {2, 3, 4, 5};
  /// Candidate sets drawn per window when n >= 4.
  std::size_t sampling_cap = 4000;
  bool nota_enabled = true;
  /// Used when no sweep is run.
  double nota_threshold = 0.5;
  std::vector<double> nota_sweep = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::uint64_t seed = 0;

  /// Throws ConfigError; sizes are checked against `drivers` when nonzero.
  void validate(std::size_t drivers = 0) const;
};

/// Class probabilities of a set of windows with their true labels.
struct ProbabilityTable {
  Tensor probabilities;  // N x K
  std::vector<int> labels;
  std::vector<data::Area> areas;

  std::size_t rows() const noexcept { return labels.size(); }
  std::size_t classes() const { return probabilities.empty() ? 0 : probabilities.dim(1); }
  std::span<const double> row(std::size_t i) const {
    return {probabilities.data() + i * classes(), classes()};
  }
  /// Rows whose area is `area`.
  ProbabilityTable subset(data::Area area) const;
};

struct ConfusionResult {
  std::vector<std::vector<std::size_t>> counts;  // [true][predicted]
  double accuracy = 0.0;
};

/// Unrestricted argmax (ties to the smallest label).
ConfusionResult confusion_matrix(const ProbabilityTable& table);

/// Binomial coefficient; saturates at SIZE_MAX.
std::size_t binomial(std::size_t n, std::size_t k);

/// Calls `visit` with each candidate set (sorted labels, truth included) used
/// for one window: all C(K-1, n-1) sets for n <= 3, otherwise sampling_cap
/// independent draws of n-1 distinct other drivers. Draws depend only on
/// (seed, n, window index).
void for_each_candidate_set(int truth, std::size_t classes, std::size_t n,
                            std::size_t window_index, const EvalConfig& cfg,
                            const std::function<void(std::span<const int>)>& visit);

/// Trial counts behind an accuracy.
struct Tally {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

/// Pooled n-way accuracy (threshold 0). Throws ConfigError when n > K.
Tally nway_accuracy(const ProbabilityTable& table, std::size_t n, const EvalConfig& cfg);

/// Candidate tuples of the none-of-the-above protocol for one window: m sets
/// that contain the truth and m that do not, with
/// m = max(1, floor(C(K-1, n-1) / 2)) for n <= 3 and sampling_cap / 2 otherwise.
struct NotaTuples {
  std::vector<std::vector<int>> with_truth;
  std::vector<std::vector<int>> without_truth;
};
NotaTuples nota_tuples(int truth, std::size_t classes, std::size_t n, std::size_t window_index,
                       const EvalConfig& cfg);

/// Pooled none-of-the-above accuracy. Throws ConfigError when n >= K.
Tally nota_accuracy(const ProbabilityTable& table, std::size_t n, double threshold,
                    const EvalConfig& cfg);

/// Threshold from cfg.nota_sweep with the best accuracy (ties to the smaller).
struct ThresholdChoice {
  double threshold = 0.0;
  std::vector<std::pair<double, double>> sweep;  // (threshold, accuracy)
};
ThresholdChoice sweep_nota_threshold(const ProbabilityTable& table, std::size_t n,
                                     const EvalConfig& cfg);

/// Pairwise accuracy per area present in the table.
std::map<data::Area, Tally> area_accuracy(const ProbabilityTable& table, const EvalConfig& cfg);

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineConfig {
  data::WindowingConfig windowing;
  encoder::EncoderConfig encoder;
  training::TrainConfig training;
  gbdt::GbdtConfig gbdt;
  EvalConfig eval;
  /// Threads for batch embedding; 1 is fully sequential.
  std::size_t threads = 1;
};

/// Everything produced by one train-then-classify run.
struct PipelineRun {
  data::Dataset dataset;  // normalized
  data::Normalizer normalizer;
  encoder::EncoderConfig encoder_config;  // with channel count / window length resolved
  training::TrainResult training;
  gbdt::GbdtModel classifier;
};

/// Builds, normalizes and windows a dataset.
struct PreparedData {
  data::Dataset dataset;
  data::Normalizer normalizer;
};
PreparedData prepare(const data::Dataset& raw);

/// Encoder config adapted to a dataset's channel count and window length.
encoder::EncoderConfig resolve_encoder(const encoder::EncoderConfig& base,
                                       const data::Dataset& dataset);

/// Normalizes `raw` (train statistics), trains the encoder, embeds the train
/// split and fits the classifier.
PipelineRun run_pipeline(const data::Dataset& raw, const PipelineConfig& cfg,
                         const training::EpochCallback& on_epoch = {});

ProbabilityTable classify(const encoder::EncoderParams& encoder, const gbdt::GbdtModel& model,
                          std::span<const data::Window> windows, std::size_t threads = 1);

// ---------------------------------------------------------------------------
// Reports and sweeps

struct EvalReport {
  std::string split;
  std::size_t windows = 0;
  std::vector<std::string> drivers;
  ConfusionResult confusion;
  std::map<std::size_t, Tally> nway;
  std::map<std::size_t, Tally> nota;
  std::map<std::size_t, ThresholdChoice> nota_thresholds;
  std::map<data::Area, Tally> per_area;
  std::uint64_t seed = 0;
};

/// Confusion, n-way and per-area protocols on `test`; NOTA thresholds are
/// swept on `validation` and applied to `test`.
EvalReport evaluate(const ProbabilityTable& test, const ProbabilityTable& validation,
                    std::span<const std::string> drivers, const EvalConfig& cfg,
                    const std::string& split = "test");

void write_report(const std::filesystem::path& path, const EvalReport& report);
/// Rows of true labels, columns of predicted labels, with a header.
void write_confusion_csv(const std::filesystem::path& path, const EvalReport& report);

struct AblationRow {
  std::string label;
  std::size_t channels = 0;
  double value = 0.0;  // parameter of the row (interval seconds, tcn size); 0 if unused
  double pairwise = 0.0;
};

/// Removal specs of the feature ablation: all channels, each single group
/// removed, and speed + acceleration only.
std::vector<data::GroupMask> default_ablation_masks();

/// Retrains once per mask with identical configs and reports evaluation-split
/// pairwise accuracy.
std::vector<AblationRow> ablate_features(const data::Dataset& raw, const PipelineConfig& cfg,
                                         std::span<const data::GroupMask> masks);
/// Rewindows with each interval length (gap kept) and retrains.
std::vector<AblationRow> interval_sweep(const data::Dataset& raw, const PipelineConfig& cfg,
                                        std::span<const double> lengths_s);
/// Varies the TCN embedding size with the wavelet branch fixed.
std::vector<AblationRow> embedding_size_sweep(const data::Dataset& raw, const PipelineConfig& cfg,
                                              std::span<const std::size_t> tcn_sizes);

void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRow> rows);

/// Evaluation-split pairwise accuracy of a finished run.
double eval_pairwise(const PipelineRun& run, const PipelineConfig& cfg);

// ---------------------------------------------------------------------------
// Projection

enum class Projection { Pca, Tsne };
std::string to_string(Projection method);
Projection parse_projection(const std::string& name);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  int label = 0;
};

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;
};

/// PCA: scores on the top two principal components, each axis signed so its
/// largest-magnitude loading is positive. t-SNE: exact gradients, N <= 5000.
std::vector<Point2> project_2d(const Tensor& embeddings, std::span<const int> labels,
                               Projection method, const TsneConfig& tsne = {});

void write_points_csv(const std::filesystem::path& path, std::span<const Point2> points,
                      std::span<const std::string> label_names = {});

}  // namespace driveid::eval
