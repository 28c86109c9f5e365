#include "driveid/gbdt/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "driveid/error.hpp"
#include "driveid/numerics/random.hpp"
#include "../config_json.hpp"

namespace driveid::gbdt {

using nlohmann::json;

void GbdtConfig::validate() const {
  if (num_leaves < 2) throw ConfigError("gbdt num_leaves must be at least 2");
  if (max_depth < 1) throw ConfigError("gbdt max_depth must be at least 1");
  if (!(feature_fraction > 0.0 && feature_fraction <= 1.0)) {
    throw ConfigError("gbdt feature_fraction must lie in (0, 1]");
  }
  if (!(bagging_fraction > 0.0 && bagging_fraction <= 1.0)) {
    throw ConfigError("gbdt bagging_fraction must lie in (0, 1]");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("gbdt learning_rate must be positive");
  }
  if (min_samples_leaf < 1) throw ConfigError("gbdt min_samples_leaf must be at least 1");
  if (!(lambda_l2 >= 0.0)) throw ConfigError("gbdt lambda_l2 must be non-negative");
  if (num_bins < 2 || num_bins > 65535) throw ConfigError("gbdt num_bins must lie in [2, 65535]");
}

// ---------------------------------------------------------------------------
// Binning

std::uint16_t FeatureBins::bin_of(double x) const {
  return static_cast<std::uint16_t>(std::lower_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
}

FeatureBins FeatureBins::fit(std::span<const double> values, std::size_t max_bins) {
  FeatureBins out;
  if (values.empty()) return out;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double top = sorted.back();
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() <= max_bins) {
    out.cuts.assign(distinct.begin(), distinct.end() - 1);
    return out;
  }
  const std::size_t n = sorted.size();
  for (std::size_t b = 1; b < max_bins; ++b) {
    const std::size_t rank = (b * n + max_bins - 1) / max_bins;  // ceil(b n / bins)
    const double cut = sorted[std::max<std::size_t>(rank, 1) - 1];
    if (cut >= top) break;
    if (out.cuts.empty() || cut > out.cuts.back()) out.cuts.push_back(cut);
  }
  return out;
}

BinnedMatrix bin_matrix(const Tensor& x, std::span<const FeatureBins> bins) {
  if (x.rank() != 2 || x.dim(1) != bins.size()) {
    throw DimensionError("bin_matrix: features " + numerics::to_string(x.shape()) +
                         " do not match " + std::to_string(bins.size()) + " binned features");
  }
  BinnedMatrix out;
  out.rows = x.dim(0);
  out.features = x.dim(1);
  out.bins.resize(out.rows * out.features);
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t f = 0; f < out.features; ++f) {
      out.bins[r * out.features + f] = bins[f].bin_of(x[r * out.features + f]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trees

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

std::size_t RegressionTree::depth() const {
  std::size_t d = 0;
  for (const TreeNode& n : nodes) d = std::max(d, n.depth);
  return d;
}

double RegressionTree::predict(std::span<const std::uint16_t> row_bins) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(row_bins[static_cast<std::size_t>(n.feature)] <= n.threshold_bin
                                     ? n.left
                                     : n.right);
  }
  return nodes[i].value;
}

double newton_leaf_value(double grad_sum, double hess_sum, double lambda) {
  return -grad_sum / (hess_sum + lambda);
}

double split_gain(double gl, double hl, double gr, double hr, double lambda) {
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
                (gl + gr) * (gl + gr) / (hl + hr + lambda));
}

namespace {

struct Split {
  double gain = 0.0;
  int feature = -1;
  std::uint16_t bin = 0;
};

struct Leaf {
  std::size_t node = 0;
  std::vector<std::size_t> rows;
  double g = 0.0;
  double h = 0.0;
  Split best;
};

class TreeGrower {
 public:
  TreeGrower(const BinnedMatrix& x, std::span<const std::size_t> bin_counts,
             std::span<const double> grad, std::span<const double> hess,
             std::span<const std::size_t> features, const GbdtConfig& cfg)
      : x_(x), bin_counts_(bin_counts), grad_(grad), hess_(hess), features_(features), cfg_(cfg) {
    std::size_t widest = 1;
    for (std::size_t f : features_) widest = std::max(widest, bin_counts_[f]);
    hist_g_.resize(widest);
    hist_h_.resize(widest);
    hist_n_.resize(widest);
  }

  RegressionTree grow(std::span<const std::size_t> rows) {
    RegressionTree tree;
    tree.nodes.push_back(TreeNode{});
    std::vector<Leaf> leaves;
    leaves.push_back(make_leaf(0, {rows.begin(), rows.end()}, 0));

    while (leaves.size() < cfg_.num_leaves) {
      std::size_t pick = leaves.size();
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        if (leaves[i].best.feature < 0) continue;
        if (pick == leaves.size() || leaves[i].best.gain > leaves[pick].best.gain) pick = i;
      }
      if (pick == leaves.size()) break;

      Leaf parent = std::move(leaves[pick]);
      leaves.erase(leaves.begin() + static_cast<std::ptrdiff_t>(pick));
      const auto f = static_cast<std::size_t>(parent.best.feature);
      std::vector<std::size_t> left_rows;
      std::vector<std::size_t> right_rows;
      for (std::size_t r : parent.rows) {
        (x_.at(r, f) <= parent.best.bin ? left_rows : right_rows).push_back(r);
      }
      const std::size_t depth = tree.nodes[parent.node].depth + 1;
      const int left = static_cast<int>(tree.nodes.size());
      const int right = left + 1;
      TreeNode& split = tree.nodes[parent.node];
      split.feature = parent.best.feature;
      split.threshold_bin = parent.best.bin;
      split.left = left;
      split.right = right;
      tree.nodes.push_back(TreeNode{-1, 0, -1, -1, 0.0, depth});
      tree.nodes.push_back(TreeNode{-1, 0, -1, -1, 0.0, depth});
      leaves.push_back(make_leaf(static_cast<std::size_t>(left), std::move(left_rows), depth));
      leaves.push_back(make_leaf(static_cast<std::size_t>(right), std::move(right_rows), depth));
    }
    for (const Leaf& leaf : leaves) {
      tree.nodes[leaf.node].value =
          newton_leaf_value(leaf.g, leaf.h, cfg_.lambda_l2) * cfg_.learning_rate;
    }
    return tree;
  }

 private:
  Leaf make_leaf(std::size_t node, std::vector<std::size_t> rows, std::size_t depth) {
    Leaf leaf;
    leaf.node = node;
    leaf.rows = std::move(rows);
    for (std::size_t r : leaf.rows) {
      leaf.g += grad_[r];
      leaf.h += hess_[r];
    }
    if (depth < cfg_.max_depth && leaf.rows.size() >= 2 * cfg_.min_samples_leaf) {
      leaf.best = best_split(leaf);
    }
    return leaf;
  }

  Split best_split(const Leaf& leaf) {
    Split best;
    const double lambda = cfg_.lambda_l2;
    const std::size_t total = leaf.rows.size();
    for (std::size_t f : features_) {
      const std::size_t nb = bin_counts_[f];
      if (nb < 2) continue;
      std::fill_n(hist_g_.begin(), nb, 0.0);
      std::fill_n(hist_h_.begin(), nb, 0.0);
      std::fill_n(hist_n_.begin(), nb, std::size_t{0});
      for (std::size_t r : leaf.rows) {
        const std::uint16_t b = x_.at(r, f);
        hist_g_[b] += grad_[r];
        hist_h_[b] += hess_[r];
        ++hist_n_[b];
      }
      double gl = 0.0;
      double hl = 0.0;
      std::size_t nl = 0;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        gl += hist_g_[b];
        hl += hist_h_[b];
        nl += hist_n_[b];
        if (nl < cfg_.min_samples_leaf) continue;
        if (total - nl < cfg_.min_samples_leaf) break;
        const double gain = split_gain(gl, hl, leaf.g - gl, leaf.h - hl, lambda);
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = static_cast<int>(f);
          best.bin = static_cast<std::uint16_t>(b);
        }
      }
    }
    return best;
  }

  const BinnedMatrix& x_;
  std::span<const std::size_t> bin_counts_;
  std::span<const double> grad_;
  std::span<const double> hess_;
  std::span<const std::size_t> features_;
  const GbdtConfig& cfg_;
  std::vector<double> hist_g_;
  std::vector<double> hist_h_;
  std::vector<std::size_t> hist_n_;
};

}  // namespace

RegressionTree grow_tree(const BinnedMatrix& x, std::span<const std::size_t> bin_counts,
                         std::span<const double> grad, std::span<const double> hess,
                         std::span<const std::size_t> rows, std::span<const std::size_t> features,
                         const GbdtConfig& cfg) {
  if (rows.empty()) throw ContractError("grow_tree: no rows");
  TreeGrower grower(x, bin_counts, grad, hess, features, cfg);
  return grower.grow(rows);
}

// ---------------------------------------------------------------------------
// Objective

std::vector<double> softmax(std::span<const double> raw_scores) {
  std::vector<double> p(raw_scores.begin(), raw_scores.end());
  if (p.empty()) return p;
  const double top = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (double& v : p) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

GradHess softmax_grad_hess(std::span<const double> raw_scores, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= raw_scores.size()) {
    throw ParameterError("softmax_grad_hess: label " + std::to_string(label) + " outside [0, " +
                         std::to_string(raw_scores.size()) + ")");
  }
  GradHess out;
  const std::vector<double> p = softmax(raw_scores);
  out.grad.resize(p.size());
  out.hess.resize(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    out.grad[k] = p[k] - (static_cast<int>(k) == label ? 1.0 : 0.0);
    out.hess[k] = p[k] * (1.0 - p[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model

std::vector<double> GbdtModel::raw_scores(std::span<const double> row) const {
  if (row.size() != num_features) {
    throw DimensionError("gbdt: row has " + std::to_string(row.size()) + " features, model expects " +
                         std::to_string(num_features));
  }
  std::vector<std::uint16_t> row_bins(num_features);
  for (std::size_t f = 0; f < num_features; ++f) row_bins[f] = bins[f].bin_of(row[f]);
  std::vector<double> raw = init_scores;
  for (const auto& round : trees) {
    for (std::size_t k = 0; k < num_classes; ++k) raw[k] += round[k].predict(row_bins);
  }
  return raw;
}

namespace {

void check_training_data(const Tensor& x, std::span<const int> labels, std::size_t num_classes) {
  if (x.rank() != 2) throw DimensionError("gbdt fit: features must be N x F, got " +
                                          numerics::to_string(x.shape()));
  const std::size_t n = x.dim(0);
  if (labels.size() != n) {
    throw DimensionError("gbdt fit: " + std::to_string(n) + " rows but " +
                         std::to_string(labels.size()) + " labels");
  }
  if (num_classes < 1) throw DataError("gbdt fit: need at least one class");
  if (n < num_classes) {
    throw DataError("gbdt fit: " + std::to_string(n) + " rows is fewer than " +
                    std::to_string(num_classes) + " classes");
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      throw DataError("gbdt fit: non-finite feature at row " + std::to_string(i / x.dim(1)) +
                      ", column " + std::to_string(i % x.dim(1)));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw DataError("gbdt fit: label " + std::to_string(labels[i]) + " at row " +
                      std::to_string(i) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

/// Sorted sample of `count` distinct indices out of [0, n).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, numerics::Rng& rng) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (count >= n) return all;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(all[i], all[j]);
  }
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

std::size_t fraction_count(std::size_t n, double fraction) {
  return std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n);
}

}  // namespace

GbdtModel fit(const Tensor& x, std::span<const int> labels, std::size_t num_classes,
              const GbdtConfig& cfg) {
  cfg.validate();
  check_training_data(x, labels, num_classes);
  const std::size_t n = x.dim(0);
  const std::size_t nf = x.dim(1);

  GbdtModel model;
  model.config = cfg;
  model.num_classes = num_classes;
  model.num_features = nf;
  model.init_scores.assign(num_classes, 0.0);
  std::vector<double> column(n);
  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t r = 0; r < n; ++r) column[r] = x[r * nf + f];
    model.bins.push_back(FeatureBins::fit(column, cfg.num_bins));
  }
  const BinnedMatrix binned = bin_matrix(x, model.bins);
  std::vector<std::size_t> bin_counts(nf);
  for (std::size_t f = 0; f < nf; ++f) bin_counts[f] = model.bins[f].bin_count();

  std::vector<double> raw(n * num_classes, 0.0);
  std::vector<double> grad(n * num_classes);
  std::vector<double> hess(n * num_classes);
  std::vector<double> g_k(n);
  std::vector<double> h_k(n);
  numerics::Rng rng(numerics::derive_seed(cfg.seed, 0x6bd7));
  const std::size_t bag = fraction_count(n, cfg.bagging_fraction);
  const std::size_t feature_count = fraction_count(nf, cfg.feature_fraction);

  for (std::size_t round = 0; round < cfg.num_trees; ++round) {
    for (std::size_t r = 0; r < n; ++r) {
      const GradHess gh = softmax_grad_hess(
          std::span<const double>(raw).subspan(r * num_classes, num_classes), labels[r]);
      std::copy(gh.grad.begin(), gh.grad.end(), grad.begin() + static_cast<std::ptrdiff_t>(r * num_classes));
      std::copy(gh.hess.begin(), gh.hess.end(), hess.begin() + static_cast<std::ptrdiff_t>(r * num_classes));
    }
    const std::vector<std::size_t> rows = sample_indices(n, bag, rng);
    std::vector<RegressionTree> round_trees;
    round_trees.reserve(num_classes);
    for (std::size_t k = 0; k < num_classes; ++k) {
      const std::vector<std::size_t> features = sample_indices(nf, feature_count, rng);
      for (std::size_t r = 0; r < n; ++r) {
        g_k[r] = grad[r * num_classes + k];
        h_k[r] = hess[r * num_classes + k];
      }
      round_trees.push_back(grow_tree(binned, bin_counts, g_k, h_k, rows, features, cfg));
    }
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t k = 0; k < num_classes; ++k) {
        raw[r * num_classes + k] += round_trees[k].predict(binned, r);
      }
    }
    model.trees.push_back(std::move(round_trees));
  }
  return model;
}

Tensor predict_proba(const GbdtModel& model, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != model.num_features) {
    throw DimensionError("predict_proba: features " + numerics::to_string(x.shape()) +
                         " do not match a model with " + std::to_string(model.num_features) +
                         " features");
  }
  const std::size_t n = x.dim(0);
  const std::size_t k = model.num_classes;
  Tensor out({n, k});
  for (std::size_t r = 0; r < n; ++r) {
    const auto p = softmax(
        model.raw_scores(std::span<const double>(x.data() + r * model.num_features, model.num_features)));
    std::copy(p.begin(), p.end(), out.data() + r * k);
  }
  return out;
}

std::vector<double> training_logloss_curve(const GbdtModel& model, const Tensor& x,
                                           std::span<const int> labels) {
  check_training_data(x, labels, model.num_classes);
  const std::size_t n = x.dim(0);
  const std::size_t k = model.num_classes;
  const BinnedMatrix binned = bin_matrix(x, model.bins);
  std::vector<double> raw(n * k);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy(model.init_scores.begin(), model.init_scores.end(), raw.begin() + static_cast<std::ptrdiff_t>(r * k));
  }
  auto logloss = [&] {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const auto p = softmax(std::span<const double>(raw).subspan(r * k, k));
      total -= std::log(std::max(p[static_cast<std::size_t>(labels[r])], 1e-300));
    }
    return total / static_cast<double>(n);
  };
  std::vector<double> curve{logloss()};
  for (const auto& round : model.trees) {
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < k; ++c) raw[r * k + c] += round[c].predict(binned, r);
    }
    curve.push_back(logloss());
  }
  return curve;
}

int predict_restricted(std::span<const double> probabilities, std::span<const int> candidates,
                       double threshold) {
  if (candidates.empty()) throw ParameterError("predict_restricted: empty candidate set");
  double mass = 0.0;
  int best = kUncertain;
  double best_p = -1.0;
  for (int c : candidates) {
    if (c < 0 || static_cast<std::size_t>(c) >= probabilities.size()) {
      throw ParameterError("predict_restricted: candidate " + std::to_string(c) +
                           " outside [0, " + std::to_string(probabilities.size()) + ")");
    }
    const double p = probabilities[static_cast<std::size_t>(c)];
    mass += p;
    if (p > best_p || (p == best_p && c < best)) {
      best_p = p;
      best = c;
    }
  }
  if (std::clamp(mass, 0.0, 1.0) <= threshold) return kUncertain;
  return best;
}

int predict_restricted(const GbdtModel& model, std::span<const double> row,
                       std::span<const int> candidates, double threshold) {
  return predict_restricted(softmax(model.raw_scores(row)), candidates, threshold);
}

// ---------------------------------------------------------------------------
// Serialization

void save_model(const std::filesystem::path& path, const GbdtModel& model) {
  json doc;
  doc["format"] = "driveid-gbdt";
  doc["version"] = 1;
  doc["config"] = detail::to_json(model.config);
  doc["num_classes"] = model.num_classes;
  doc["num_features"] = model.num_features;
  doc["init_scores"] = model.init_scores;
  json bins = json::array();
  for (const FeatureBins& b : model.bins) bins.push_back(b.cuts);
  doc["bin_cuts"] = std::move(bins);
  json rounds = json::array();
  for (const auto& round : model.trees) {
    json per_class = json::array();
    for (const RegressionTree& tree : round) {
      json nodes = json::array();
      for (const TreeNode& n : tree.nodes) {
        nodes.push_back({n.feature, n.threshold_bin, n.left, n.right, n.value, n.depth});
      }
      per_class.push_back(std::move(nodes));
    }
    rounds.push_back(std::move(per_class));
  }
  doc["trees"] = std::move(rounds);
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write model " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw FormatError("failed writing model " + path.string());
}

GbdtModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open model " + path.string());
  try {
    const json doc = json::parse(in);
    if (doc.at("format") != "driveid-gbdt" || doc.at("version") != 1) {
      throw FormatError(path.string() + " is not a version-1 gbdt model");
    }
    GbdtModel model;
    detail::read_into(doc.at("config"), model.config, "model config");
    model.num_classes = doc.at("num_classes").get<std::size_t>();
    model.num_features = doc.at("num_features").get<std::size_t>();
    model.init_scores = doc.at("init_scores").get<std::vector<double>>();
    for (const json& cuts : doc.at("bin_cuts")) {
      model.bins.push_back(FeatureBins{cuts.get<std::vector<double>>()});
    }
    for (const json& round : doc.at("trees")) {
      std::vector<RegressionTree> per_class;
      for (const json& nodes : round) {
        RegressionTree tree;
        for (const json& n : nodes) {
          tree.nodes.push_back(TreeNode{n.at(0).get<int>(), n.at(1).get<std::uint16_t>(),
                                        n.at(2).get<int>(), n.at(3).get<int>(),
                                        n.at(4).get<double>(), n.at(5).get<std::size_t>()});
        }
        per_class.push_back(std::move(tree));
      }
      if (per_class.size() != model.num_classes) {
        throw FormatError(path.string() + ": a round holds " + std::to_string(per_class.size()) +
                          " trees for " + std::to_string(model.num_classes) + " classes");
      }
      model.trees.push_back(std::move(per_class));
    }
    if (model.bins.size() != model.num_features ||
        model.init_scores.size() != model.num_classes) {
      throw FormatError(path.string() + " has inconsistent feature or class counts");
    }
    for (const auto& round : model.trees) {
      for (const RegressionTree& tree : round) {
        const auto count = static_cast<int>(tree.nodes.size());
        if (count == 0) throw FormatError(path.string() + " contains an empty tree");
        for (int i = 0; i < count; ++i) {
          const TreeNode& node = tree.nodes[static_cast<std::size_t>(i)];
          // Children always come after their parent, which rules out cycles.
          const bool ok = node.feature < 0 ||
                          (static_cast<std::size_t>(node.feature) < model.num_features &&
                           node.left > i && node.left < count && node.right > i &&
                           node.right < count);
          if (!ok) throw FormatError(path.string() + " contains a malformed tree node");
        }
      }
    }
    return model;
  } catch (const json::exception& e) {
    throw FormatError("malformed model " + path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError("model " + path.string() + ": " + e.what());
  }
}

}  // namespace driveid::gbdt
