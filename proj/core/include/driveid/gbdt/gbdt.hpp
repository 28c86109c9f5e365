#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "driveid/numerics/tensor.hpp"

namespace driveid::gbdt {

using numerics::Tensor;

struct GbdtConfig {
  std::size_t num_leaves = 31;
  std::size_t num_trees = 100;  // boosting rounds
  std::size_t max_depth = 12;
  double feature_fraction = 0.8;
  double bagging_fraction = 0.9;
  double learning_rate = 0.1;
  std::size_t min_samples_leaf = 5;
  double lambda_l2 = 1.0;
  std::size_t num_bins = 64;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
  friend bool operator==(const GbdtConfig&, const GbdtConfig&) = default;
};

/// Equal-frequency bin boundaries of one feature. A value x falls into the
/// first bin b with x <= cuts[b]; values above every cut land in the last bin.
struct FeatureBins {
  std::vector<double> cuts;

  std::size_t bin_count() const noexcept { return cuts.size() + 1; }
  std::uint16_t bin_of(double x) const;
  /// Boundaries chosen among the observed values, so a strictly increasing
  /// transform of the data yields the same partition.
  static FeatureBins fit(std::span<const double> values, std::size_t max_bins);
};

/// Row-major matrix of bin indices.
struct BinnedMatrix {
  std::size_t rows = 0;
  std::size_t features = 0;
  std::vector<std::uint16_t> bins;

  std::uint16_t at(std::size_t row, std::size_t feature) const {
    return bins[row * features + feature];
  }
};

BinnedMatrix bin_matrix(const Tensor& x, std::span<const FeatureBins> bins);

struct TreeNode {
  /// -1 marks a leaf.
  int feature = -1;
  std::uint16_t threshold_bin = 0;  // go left when bin <= threshold_bin
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output (already shrunk)
  std::size_t depth = 0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  std::size_t leaf_count() const;
  std::size_t depth() const;
  /// Output for one binned row.
  double predict(std::span<const std::uint16_t> row_bins) const;
  double predict(const BinnedMatrix& x, std::size_t row) const {
    return predict(std::span<const std::uint16_t>(x.bins).subspan(row * x.features, x.features));
  }
};

/// -G / (H + lambda).
double newton_leaf_value(double grad_sum, double hess_sum, double lambda);

/// Split gain 1/2 [GL^2/(HL+l) + GR^2/(HR+l) - (GL+GR)^2/(HL+HR+l)].
double split_gain(double gl, double hl, double gr, double hr, double lambda);

/// Grows one tree leaf-wise on `rows` using only `features`, always splitting
/// the leaf with the largest positive gain.
RegressionTree grow_tree(const BinnedMatrix& x, std::span<const std::size_t> bin_counts,
                         std::span<const double> grad, std::span<const double> hess,
                         std::span<const std::size_t> rows, std::span<const std::size_t> features,
                         const GbdtConfig& cfg);

struct GradHess {
  std::vector<double> grad;
  std::vector<double> hess;
};

/// p = softmax(raw); g = p - onehot(label); h = p (1 - p).
GradHess softmax_grad_hess(std::span<const double> raw_scores, int label);

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> raw_scores);

struct GbdtModel {
  GbdtConfig config;
  std::size_t num_classes = 0;
  std::size_t num_features = 0;
  std::vector<double> init_scores;  // per class
  std::vector<FeatureBins> bins;    // per feature
  std::vector<std::vector<RegressionTree>> trees;  // [round][class]

  /// Raw scores for one row of features.
  std::vector<double> raw_scores(std::span<const double> row) const;
};

/// Throws DataError for N < K, non-finite features or labels outside [0, K).
GbdtModel fit(const Tensor& x, std::span<const int> labels, std::size_t num_classes,
              const GbdtConfig& cfg);

/// N x K class probabilities.
Tensor predict_proba(const GbdtModel& model, const Tensor& x);

/// Mean multiclass log loss on (x, labels): entry 0 before any round, entry r
/// after the first r rounds.
std::vector<double> training_logloss_curve(const GbdtModel& model, const Tensor& x,
                                           std::span<const int> labels);

inline constexpr int kUncertain = -1;

/// Argmax over `candidates` of a probability row (ties to the smallest label),
/// or kUncertain when the candidates' total probability, clamped to [0, 1],
/// is at most `threshold`.
int predict_restricted(std::span<const double> probabilities, std::span<const int> candidates,
                       double threshold);
int predict_restricted(const GbdtModel& model, std::span<const double> row,
                       std::span<const int> candidates, double threshold);

void save_model(const std::filesystem::path& path, const GbdtModel& model);
GbdtModel load_model(const std::filesystem::path& path);

}  // namespace driveid::gbdt
