#pragma once

#include <span>
#include <vector>

#include "driveid/data/dataset.hpp"
#include "driveid/numerics/tensor.hpp"

namespace driveid::wavelet {

/// Level-1 orthonormal Haar coefficients of one signal.
struct HaarPair {
  std::vector<double> approx;
  std::vector<double> detail;
};

/// approx[k] = (x[2k] + x[2k+1]) / sqrt(2), detail[k] = (x[2k] - x[2k+1]) / sqrt(2).
/// Throws ContractError for odd or empty input.
HaarPair haar_forward(std::span<const double> signal);

/// Exact inverse of haar_forward. Throws DimensionError on length mismatch.
std::vector<double> haar_inverse(std::span<const double> approx, std::span<const double> detail);

/// Per-channel coefficients concatenated in channel order, each C * L/2 long.
struct WaveletFeatures {
  std::vector<double> approx;
  std::vector<double> detail;
};

/// Transforms each row of a channel-major C x L matrix.
WaveletFeatures window_wavelet_features(const numerics::Tensor& frames);
WaveletFeatures window_wavelet_features(const data::Window& window);

}  // namespace driveid::wavelet
