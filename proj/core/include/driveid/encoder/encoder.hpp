#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driveid/data/dataset.hpp"
#include "driveid/numerics/ops.hpp"
#include "driveid/numerics/tape.hpp"

namespace driveid::encoder {

using numerics::Tensor;
using numerics::Var;

struct EncoderConfig {
  std::size_t in_channels = 31;
  std::size_t kernel_size = 16;
  std::size_t levels = 6;
  std::size_t hidden_channels = 32;
  std::size_t tcn_embedding = 32;
  std::size_t wavelet_embedding_per_branch = 15;
  double dropout_p = 0.1;
  std::size_t window_length = 1000;

  /// 1 + 2 (K - 1)(2^levels - 1): two convolutions per level, dilation 2^level.
  std::size_t receptive_field() const;
  std::size_t embedding_size() const { return tcn_embedding + 2 * wavelet_embedding_per_branch; }
  /// Throws ConfigError; the receptive-field message quotes both numbers.
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Weights [Cout x Cin x K] and bias [Cout].
struct ConvLayer {
  Tensor weight;
  Tensor bias;
};

/// Weights [In x Out] and bias [Out].
struct LinearLayer {
  Tensor weight;
  Tensor bias;
};

struct ResidualBlockParams {
  ConvLayer conv1;
  ConvLayer conv2;
  std::optional<ConvLayer> projection;  // 1x1 conv when channel counts differ
};

struct EncoderParams {
  EncoderConfig config;
  std::vector<ResidualBlockParams> blocks;
  LinearLayer tcn_head;     // hidden_channels -> tcn_embedding
  LinearLayer approx_head;  // C * L/2 -> wavelet_embedding_per_branch
  LinearLayer detail_head;  // C * L/2 -> wavelet_embedding_per_branch

  /// Every parameter tensor in a fixed order (the checkpoint order).
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  std::vector<std::string> tensor_names() const;
  std::size_t parameter_count() const;
};

/// He (fan-in) normal initialisation of weights, zero biases.
EncoderParams build_encoder(const EncoderConfig& cfg, std::uint64_t seed);

/// How the TCN branch is evaluated. Both give the same embedding; the strided
/// form computes only the frames that feed the last-frame readout.
enum class Readout {
  /// Every block runs at full length with dilation 2^level.
  FullSequence,
  /// Block b sees only frames t with (L-1-t) % 2^b == 0, where a dilation
  /// 2^b convolution becomes an undilated one.
  StridedLastFrame,
};

/// Encoder parameters bound onto one tape.
class EncoderGraph {
 public:
  /// With `trainable` the parameters become gradient-receiving leaves.
  EncoderGraph(numerics::Tape& tape, const EncoderParams& params, bool trainable);
  /// Uses caller-bound variables (aligned with params.tensors()) in place of
  /// the stored values; `params` supplies only the structure.
  EncoderGraph(const EncoderParams& params, std::span<const Var> vars);

  /// Embedding [1 x E] of one C x L frame matrix. `dropout` may be null in
  /// eval mode.
  Var embed(const Tensor& frames, bool training, numerics::DropoutStream* dropout,
            Readout readout = Readout::StridedLastFrame) const;
  Var embed(const data::Window& window, bool training, numerics::DropoutStream* dropout,
            Readout readout = Readout::StridedLastFrame) const;

  /// Bound parameters, aligned with EncoderParams::tensors().
  std::span<const Var> parameters() const noexcept { return vars_; }

 private:
  Var block(Var x, std::size_t level, bool last, bool training, numerics::DropoutStream* dropout,
            Readout readout) const;

  numerics::Tape& tape_;
  const EncoderParams& params_;
  std::vector<Var> vars_;
};

/// Eval-mode embedding of a single window (dropout off).
std::vector<double> embed(const EncoderParams& params, const data::Window& window);
std::vector<double> embed(const EncoderParams& params, const Tensor& frames);

/// Row i is embed(params, windows[i]); N x E. `threads` = 0 picks the
/// hardware concurrency; results do not depend on the thread count.
Tensor embed_batch(const EncoderParams& params, std::span<const data::Window> windows,
                   std::size_t threads = 1);

/// Versioned binary checkpoint: magic, config as JSON, then every tensor with
/// its name and shape. Values are stored as raw little-endian doubles.
void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params);

/// Throws FormatError for unreadable files and ConfigError when `expected`
/// is given and differs from the stored config.
EncoderParams load_checkpoint(const std::filesystem::path& path,
                              const std::optional<EncoderConfig>& expected = std::nullopt);

}  // namespace driveid::encoder
