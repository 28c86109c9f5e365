#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "driveid/error.hpp"
#include "driveid/gbdt/gbdt.hpp"
#include "driveid/numerics/random.hpp"
#include "test_support.hpp"

namespace driveid::gbdt {
namespace {

using driveid::testing::scratch_dir;

struct Labeled {
  Tensor x;
  std::vector<int> y;
};

/// Three Gaussian blobs far apart in the plane, plus `extra` noise features.
Labeled blobs(std::size_t per_class, std::size_t extra, std::uint64_t seed) {
  const double centers[3][2] = {{0, 0}, {10, 0}, {0, 10}};
  numerics::Rng rng(seed);
  const std::size_t d = 2 + extra;
  Labeled out{Tensor({3 * per_class, d}), {}};
  for (std::size_t i = 0; i < 3 * per_class; ++i) {
    const int label = static_cast<int>(i % 3);
    out.y.push_back(label);
    out.x[i * d + 0] = centers[label][0] + rng.normal(0.0, 1.0);
    out.x[i * d + 1] = centers[label][1] + rng.normal(0.0, 1.0);
    for (std::size_t j = 2; j < d; ++j) out.x[i * d + j] = rng.normal(0.0, 1.0);
  }
  return out;
}

double train_accuracy(const GbdtModel& model, const Labeled& data) {
  const Tensor p = predict_proba(model, data.x);
  const std::size_t k = model.num_classes;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.y.size(); ++i) {
    std::vector<int> all(k);
    std::iota(all.begin(), all.end(), 0);
    correct += predict_restricted(p.values().subspan(i * k, k), all, 0.0) == data.y[i];
  }
  return static_cast<double>(correct) / static_cast<double>(data.y.size());
}

TEST(SoftmaxGradHess, UniformScores) {
  const auto gh = softmax_grad_hess(std::vector<double>{0, 0, 0}, 0);
  EXPECT_NEAR(gh.grad[0], -2.0 / 3.0, 1e-15);
  EXPECT_NEAR(gh.grad[1], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(gh.grad[2], 1.0 / 3.0, 1e-15);
  for (double h : gh.hess) EXPECT_NEAR(h, 2.0 / 9.0, 1e-15);
}

TEST(SoftmaxGradHess, GradientsSumToZero) {
  numerics::Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> raw(5);
    for (double& v : raw) v = rng.normal(0.0, 5.0);
    const auto gh = softmax_grad_hess(raw, static_cast<int>(rng.uniform_index(5)));
    EXPECT_NEAR(std::accumulate(gh.grad.begin(), gh.grad.end(), 0.0), 0.0, 1e-12);
  }
}

TEST(SoftmaxGradHess, ConfidentPredictionHasVanishingGradient) {
  const auto gh = softmax_grad_hess(std::vector<double>{0, 50, 0}, 1);
  for (double g : gh.grad) EXPECT_NEAR(g, 0.0, 1e-20);
}

TEST(Softmax, StableForLargeScores) {
  const auto p = softmax(std::vector<double>{1000, 1000});
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(Newton, LeafValueOnSingleSample) {
  EXPECT_NEAR(newton_leaf_value(-2.0 / 3.0, 2.0 / 9.0, 0.0), 3.0, 1e-15);
  EXPECT_NEAR(split_gain(-1, 1, 1, 1, 0), 1.0, 1e-15);
}

TEST(Newton, RootOnlyTreeLeafValue) {
  const Tensor x({1, 1}, {0.5});
  const std::vector<FeatureBins> bins = {FeatureBins::fit(x.values(), 64)};
  const BinnedMatrix binned = bin_matrix(x, bins);
  const std::vector<std::size_t> counts = {bins[0].bin_count()};
  const auto gh = softmax_grad_hess(std::vector<double>{0, 0, 0}, 0);
  GbdtConfig cfg;
  cfg.lambda_l2 = 0.0;
  cfg.learning_rate = 1.0;
  const std::vector<std::size_t> rows = {0};
  const std::vector<std::size_t> features = {0};
  const RegressionTree tree = grow_tree(binned, counts, std::span(gh.grad).first(1),
                                        std::span(gh.hess).first(1), rows, features, cfg);
  ASSERT_EQ(tree.leaf_count(), 1u);
  EXPECT_NEAR(tree.nodes[0].value, 3.0, 1e-15);
}

TEST(FeatureBins, BoundariesAndLookup) {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 0.0);
  const FeatureBins b = FeatureBins::fit(v, 4);
  EXPECT_LE(b.bin_count(), 4u);
  EXPECT_EQ(b.bin_of(-1.0), 0);
  EXPECT_EQ(b.bin_of(1e9), b.bin_count() - 1);
  for (double c : b.cuts) EXPECT_EQ(c, std::floor(c));  // observed values
  const FeatureBins constant = FeatureBins::fit(std::vector<double>(10, 2.0), 64);
  EXPECT_LE(constant.bin_count(), 2u);
}

TEST(Fit, SeparableBlobsReachFullTrainingAccuracy) {
  const Labeled data = blobs(100, 0, 7);
  const GbdtModel model = fit(data.x, data.y, 3, GbdtConfig{});
  EXPECT_EQ(model.trees.size(), 100u);
  EXPECT_GE(train_accuracy(model, data), 0.99);
}

TEST(Fit, TreeCapsRespected) {
  const Labeled data = blobs(100, 4, 8);
  GbdtConfig cfg;
  cfg.num_leaves = 6;
  cfg.max_depth = 3;
  cfg.num_trees = 10;
  const GbdtModel model = fit(data.x, data.y, 3, cfg);
  for (const auto& round : model.trees) {
    ASSERT_EQ(round.size(), 3u);
    for (const auto& tree : round) {
      EXPECT_LE(tree.leaf_count(), 6u);
      EXPECT_LE(tree.depth(), 3u);
    }
  }
}

TEST(Fit, ConstantLabelGivesNearOneHot) {
  Labeled data = blobs(10, 0, 9);
  data.y.assign(data.y.size(), 1);
  const GbdtModel model = fit(data.x, data.y, 3, GbdtConfig{});
  const Tensor p = predict_proba(model, data.x);
  for (std::size_t i = 0; i < data.y.size(); ++i) EXPECT_GT(p[i * 3 + 1], 0.99);
}

TEST(Fit, ZeroRoundsGiveUniformRows) {
  const Labeled data = blobs(10, 0, 10);
  GbdtConfig cfg;
  cfg.num_trees = 0;
  const GbdtModel model = fit(data.x, data.y, 3, cfg);
  const Tensor p = predict_proba(model, data.x);
  for (double v : p.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Fit, RowsSumToOne) {
  const Labeled data = blobs(30, 3, 11);
  const Tensor p = predict_proba(fit(data.x, data.y, 3, GbdtConfig{}), data.x);
  for (std::size_t i = 0; i < data.y.size(); ++i) {
    EXPECT_NEAR(p[i * 3] + p[i * 3 + 1] + p[i * 3 + 2], 1.0, 1e-9);
  }
}

TEST(Fit, LoglossNonIncreasingWithoutSubsampling) {
  const Labeled data = blobs(100, 5, 12);
  GbdtConfig cfg;
  cfg.bagging_fraction = 1.0;
  cfg.feature_fraction = 1.0;
  const GbdtModel model = fit(data.x, data.y, 3, cfg);
  const auto curve = training_logloss_curve(model, data.x, data.y);
  ASSERT_EQ(curve.size(), 101u);
  EXPECT_NEAR(curve.front(), std::log(3.0), 1e-12);
  for (std::size_t r = 1; r < curve.size(); ++r) EXPECT_LE(curve[r], curve[r - 1] + 1e-9) << r;
}

TEST(Fit, Deterministic) {
  const Labeled data = blobs(50, 5, 13);
  const GbdtModel a = fit(data.x, data.y, 3, GbdtConfig{});
  const GbdtModel b = fit(data.x, data.y, 3, GbdtConfig{});
  EXPECT_EQ(predict_proba(a, data.x), predict_proba(b, data.x));
  GbdtConfig other;
  other.seed = 1;
  EXPECT_NE(predict_proba(fit(data.x, data.y, 3, other), data.x), predict_proba(a, data.x));
}

TEST(Fit, InvariantUnderMonotoneFeatureTransform) {
  const Labeled data = blobs(50, 3, 14);
  Labeled warped = data;
  for (double& v : warped.x.values()) v = std::exp(v / 4.0) * 3.0 - 7.0;
  const GbdtModel a = fit(data.x, data.y, 3, GbdtConfig{});
  const GbdtModel b = fit(warped.x, warped.y, 3, GbdtConfig{});
  EXPECT_EQ(predict_proba(a, data.x), predict_proba(b, warped.x));
}

TEST(Fit, MatchesIndependentTraversal) {
  const Labeled data = blobs(60, 4, 15);
  const GbdtModel model = fit(data.x, data.y, 3, GbdtConfig{});
  const Labeled probe = blobs(17, 4, 16);  // 51 rows
  const Tensor p = predict_proba(model, probe.x);
  const std::size_t d = model.num_features;
  for (std::size_t i = 0; i < probe.y.size(); ++i) {
    std::vector<double> raw = model.init_scores;
    for (const auto& round : model.trees) {
      for (std::size_t k = 0; k < 3; ++k) {
        const auto& nodes = round[k].nodes;
        int at = 0;
        while (nodes[at].feature >= 0) {
          const auto f = static_cast<std::size_t>(nodes[at].feature);
          const auto& cuts = model.bins[f].cuts;
          const double xv = probe.x[i * d + f];
          std::size_t bin = 0;
          while (bin < cuts.size() && xv > cuts[bin]) ++bin;
          at = bin <= nodes[at].threshold_bin ? nodes[at].left : nodes[at].right;
        }
        raw[k] += nodes[at].value;
      }
    }
    double mx = *std::max_element(raw.begin(), raw.end());
    double z = 0.0;
    for (double& r : raw) z += (r = std::exp(r - mx));
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(p[i * 3 + k], raw[k] / z, 1e-12);
  }
}

TEST(Fit, RejectsBadInputs) {
  const Labeled data = blobs(2, 0, 17);
  EXPECT_THROW(fit(Tensor({2, 2}), std::vector<int>{0, 1}, 3, GbdtConfig{}), DataError);
  std::vector<int> bad = data.y;
  bad[0] = 3;
  EXPECT_THROW(fit(data.x, bad, 3, GbdtConfig{}), DataError);
  Tensor nan_x = data.x;
  nan_x[3] = std::nan("");
  EXPECT_THROW(fit(nan_x, data.y, 3, GbdtConfig{}), DataError);
  GbdtConfig cfg;
  cfg.num_leaves = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(PredictRestricted, Examples) {
  const std::vector<double> p = {0.6, 0.3, 0.1};
  EXPECT_EQ(predict_restricted(p, std::vector<int>{1, 2}, 0.0), 1);
  EXPECT_EQ(predict_restricted(p, std::vector<int>{1, 2}, 0.5), kUncertain);
  EXPECT_EQ(predict_restricted(p, std::vector<int>{0, 1, 2}, 0.0), 0);
  EXPECT_EQ(predict_restricted(std::vector<double>{0.4, 0.4, 0.2}, std::vector<int>{1, 0}, 0.0),
            0);
  EXPECT_EQ(predict_restricted(std::vector<double>{0.0, 1.0}, std::vector<int>{1}, 1.0),
            kUncertain);
  EXPECT_THROW(predict_restricted(p, std::vector<int>{}, 0.0), ParameterError);
  EXPECT_THROW(predict_restricted(p, std::vector<int>{3}, 0.0), ParameterError);
}

TEST(ModelFile, RoundTripGivesIdenticalPredictions) {
  const Labeled data = blobs(40, 6, 18);
  const GbdtModel model = fit(data.x, data.y, 3, GbdtConfig{});
  const auto path = scratch_dir("gbdt_model") / "model.json";
  save_model(path, model);
  const GbdtModel back = load_model(path);
  EXPECT_EQ(back.config, model.config);
  EXPECT_EQ(predict_proba(back, data.x), predict_proba(model, data.x));
}

TEST(ModelFile, CorruptFileRejected) {
  const auto dir = scratch_dir("gbdt_corrupt");
  {
    std::ofstream out(dir / "bad.json");
    out << "{\"format\": \"something-else\"}";
  }
  EXPECT_THROW(load_model(dir / "bad.json"), FormatError);
  EXPECT_THROW(load_model(dir / "missing.json"), FormatError);
}

}  // namespace
}  // namespace driveid::gbdt
