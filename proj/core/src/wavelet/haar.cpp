#include "driveid/wavelet/haar.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "driveid/error.hpp"

namespace driveid::wavelet {

namespace {

constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

void forward_into(const double* x, std::size_t half, double* approx, double* detail) {
  for (std::size_t k = 0; k < half; ++k) {
    const double a = x[2 * k];
    const double b = x[2 * k + 1];
    approx[k] = (a + b) * kInvSqrt2;
    detail[k] = (a - b) * kInvSqrt2;
  }
}

}  // namespace

HaarPair haar_forward(std::span<const double> signal) {
  if (signal.empty() || signal.size() % 2 != 0) {
    throw ContractError("haar_forward needs a non-empty even-length signal, got length " +
                        std::to_string(signal.size()));
  }
  const std::size_t half = signal.size() / 2;
  HaarPair out{std::vector<double>(half), std::vector<double>(half)};
  forward_into(signal.data(), half, out.approx.data(), out.detail.data());
  return out;
}

std::vector<double> haar_inverse(std::span<const double> approx, std::span<const double> detail) {
  if (approx.size() != detail.size()) {
    throw DimensionError("haar_inverse: approx has " + std::to_string(approx.size()) +
                         " coefficients, detail has " + std::to_string(detail.size()));
  }
  std::vector<double> x(2 * approx.size());
  for (std::size_t k = 0; k < approx.size(); ++k) {
    x[2 * k] = (approx[k] + detail[k]) * kInvSqrt2;
    x[2 * k + 1] = (approx[k] - detail[k]) * kInvSqrt2;
  }
  return x;
}

WaveletFeatures window_wavelet_features(const numerics::Tensor& frames) {
  if (frames.rank() != 2) {
    throw DimensionError("window_wavelet_features expects a C x L matrix, got " +
                         numerics::to_string(frames.shape()));
  }
  const std::size_t channels = frames.dim(0);
  const std::size_t length = frames.dim(1);
  if (length % 2 != 0) {
    throw ContractError("window length " + std::to_string(length) + " is odd");
  }
  const std::size_t half = length / 2;
  WaveletFeatures out{std::vector<double>(channels * half), std::vector<double>(channels * half)};
  for (std::size_t c = 0; c < channels; ++c) {
    forward_into(frames.data() + c * length, half, out.approx.data() + c * half,
                 out.detail.data() + c * half);
  }
  return out;
}

WaveletFeatures window_wavelet_features(const data::Window& window) {
  return window_wavelet_features(window.frames());
}

}  // namespace driveid::wavelet
