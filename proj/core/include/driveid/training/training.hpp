#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driveid/data/dataset.hpp"
#include "driveid/encoder/encoder.hpp"
#include "driveid/numerics/random.hpp"

namespace driveid::training {

using numerics::Tensor;
using numerics::Var;

enum class Mode { Triplet, CrossEntropy };
enum class Mining { Random, SemiHard };

std::string to_string(Mode mode);
std::string to_string(Mining mining);
/// Throws ConfigError for unknown names.
Mode parse_mode(const std::string& name);
Mining parse_mining(const std::string& name);

struct TrainConfig {
  double learning_rate = 4e-4;
  double decay = 0.975;  // multiplicative, applied after every epoch
  double margin = 1.0;
  std::size_t batch_size = 32;
  std::size_t epochs = 12;
  std::uint64_t seed = 1;
  Mode mode = Mode::Triplet;
  Mining mining = Mining::Random;
  /// Negatives scored per anchor under semi-hard mining.
  std::size_t semi_hard_candidates = 8;
  /// Worker threads for per-triplet forward/backward; 1 is fully sequential.
  std::size_t threads = 1;

  /// Throws ConfigError.
  void validate() const;
};

/// Indices into one split's window list.
struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
};

/// Uniform triplet draws over a fixed set of windows.
class TripletSampler {
 public:
  /// Throws DataError when fewer than two drivers are present or any driver
  /// has fewer than two windows. `driver_names` (indexed by label) is used
  /// only for messages.
  explicit TripletSampler(std::span<const data::Window> windows,
                          std::span<const std::string> driver_names = {});

  /// Anchor uniform over windows, positive uniform over the anchor's other
  /// windows, negative uniform over every window of another driver.
  Triplet draw(numerics::Rng& rng) const;
  /// Uniform window of a driver other than `driver`.
  std::size_t draw_negative(int driver, numerics::Rng& rng) const;

  std::size_t window_count() const noexcept { return labels_.size(); }

 private:
  struct Block {
    std::size_t begin = 0;  // offset into order_
    std::size_t size = 0;
  };
  const Block& block_of(int driver) const;

  std::vector<int> labels_;
  std::vector<std::size_t> order_;  // window indices grouped by driver
  std::vector<int> block_driver_;
  std::vector<Block> blocks_;
};

std::vector<Triplet> sample_triplets(std::span<const data::Window> windows,
                                     std::size_t batch_size, numerics::Rng& rng,
                                     std::span<const std::string> driver_names = {});

/// max(0, |r - p|^2 - |r - n|^2 + margin).
double triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                    std::span<const double> negative, double margin);
/// Differentiable form on 1 x E embeddings.
Var triplet_loss(Var anchor, Var positive, Var negative, double margin);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

/// One bias-corrected Adam update. Moments are created on the first call.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               double learning_rate);

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double learning_rate = 0.0;  // rate used during the epoch
  double seconds = 0.0;
};

struct TrainResult {
  encoder::EncoderParams params;
  /// Cross-entropy mode only: embedding -> driver logits.
  std::optional<encoder::LinearLayer> classifier_head;
  std::vector<double> loss_history;  // mean loss per epoch
  std::vector<double> learning_rates;
  double wall_seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Trains an encoder on dataset.train. Each epoch runs ceil(N / batch_size)
/// batches, so every training window is expected once as an anchor. Throws
/// TrainingError on a non-finite loss.
TrainResult train(const data::Dataset& dataset, const encoder::EncoderConfig& encoder_config,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Structured-text record of a run: configs, seed, per-epoch losses, wall time.
void write_run_manifest(const std::filesystem::path& path,
                        const encoder::EncoderConfig& encoder_config,
                        const TrainConfig& config, const TrainResult& result);
/// epoch,learning_rate,mean_loss rows.
void write_loss_history(const std::filesystem::path& path, const TrainResult& result);

}  // namespace driveid::training
