#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "driveid/error.hpp"
#include "driveid/wavelet/haar.hpp"
#include "test_support.hpp"

namespace driveid::wavelet {
namespace {

const double kRoot2 = std::sqrt(2.0);

double energy(std::span<const double> v) {
  return std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
}

TEST(HaarForward, ConstantSignalHasNoDetail) {
  const std::vector<double> x = {1, 1, 1, 1};
  const auto h = haar_forward(x);
  EXPECT_DOUBLE_EQ(h.approx[0], kRoot2);
  EXPECT_DOUBLE_EQ(h.approx[1], kRoot2);
  EXPECT_EQ(h.detail, (std::vector<double>{0, 0}));
}

TEST(HaarForward, AlternationHasNoApproximation) {
  const std::vector<double> x = {1, -1};
  const auto h = haar_forward(x);
  EXPECT_EQ(h.approx, (std::vector<double>{0}));
  EXPECT_DOUBLE_EQ(h.detail[0], kRoot2);
}

TEST(HaarForward, HandExample) {
  const std::vector<double> x = {3, 1, 2, 0};
  const auto h = haar_forward(x);
  EXPECT_DOUBLE_EQ(h.approx[0], 2 * kRoot2);
  EXPECT_DOUBLE_EQ(h.approx[1], kRoot2);
  EXPECT_DOUBLE_EQ(h.detail[0], kRoot2);
  EXPECT_DOUBLE_EQ(h.detail[1], kRoot2);
  EXPECT_NEAR(energy(h.approx) + energy(h.detail), 14.0, 1e-12);
  EXPECT_EQ(energy(x), 14.0);
}

TEST(HaarForward, RejectsOddOrEmpty) {
  EXPECT_THROW(haar_forward(std::vector<double>{1, 2, 3}), ContractError);
  EXPECT_THROW(haar_forward(std::vector<double>{}), ContractError);
}

TEST(HaarInverse, HandExamples) {
  EXPECT_EQ(haar_inverse(std::vector<double>{kRoot2}, std::vector<double>{0}).size(), 2u);
  const auto a = haar_inverse(std::vector<double>{kRoot2}, std::vector<double>{0});
  EXPECT_NEAR(a[0], 1.0, 1e-15);
  EXPECT_NEAR(a[1], 1.0, 1e-15);
  const auto b = haar_inverse(std::vector<double>{0}, std::vector<double>{kRoot2});
  EXPECT_NEAR(b[0], 1.0, 1e-15);
  EXPECT_NEAR(b[1], -1.0, 1e-15);
  EXPECT_THROW(haar_inverse(std::vector<double>{1, 2}, std::vector<double>{1}), DimensionError);
}

TEST(HaarProperty, RoundTripAndEnergyOnRandomSignals) {
  numerics::Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 * (1 + rng.uniform_index(300));
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal(0.0, 1.0 + trial);
    const auto h = haar_forward(x);
    const auto back = haar_inverse(h.approx, h.detail);
    const double e = energy(x);
    EXPECT_LE(std::abs(energy(h.approx) + energy(h.detail) - e) / e, 1e-12);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_LE(std::abs(back[i] - x[i]), 1e-12 * (1.0 + std::abs(x[i])));
    }
  }
}

TEST(WindowFeatures, SingleChannelMatchesForward) {
  const numerics::Tensor frames({1, 4}, {3, 1, 2, 0});
  const auto f = window_wavelet_features(frames);
  const auto h = haar_forward(std::vector<double>{3, 1, 2, 0});
  EXPECT_EQ(f.approx, h.approx);
  EXPECT_EQ(f.detail, h.detail);
}

TEST(WindowFeatures, ChannelZeroFirst) {
  const numerics::Tensor frames({2, 4}, {3, 1, 2, 0, 1, 1, 1, 1});
  const auto f = window_wavelet_features(frames);
  ASSERT_EQ(f.approx.size(), 4u);
  ASSERT_EQ(f.detail.size(), 4u);
  EXPECT_DOUBLE_EQ(f.approx[0], 2 * kRoot2);
  EXPECT_DOUBLE_EQ(f.approx[1], kRoot2);
  EXPECT_DOUBLE_EQ(f.approx[2], kRoot2);
  EXPECT_DOUBLE_EQ(f.approx[3], kRoot2);
  EXPECT_DOUBLE_EQ(f.detail[0], kRoot2);
  EXPECT_DOUBLE_EQ(f.detail[1], kRoot2);
  EXPECT_EQ(f.detail[2], 0.0);
  EXPECT_EQ(f.detail[3], 0.0);
}

TEST(WindowFeatures, ZeroWindow) {
  const auto f = window_wavelet_features(numerics::Tensor({3, 8}));
  for (double v : f.approx) EXPECT_EQ(v, 0.0);
  for (double v : f.detail) EXPECT_EQ(v, 0.0);
}

}  // namespace
}  // namespace driveid::wavelet
