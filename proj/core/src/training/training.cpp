#include "driveid/training/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "../config_json.hpp"
#include "driveid/error.hpp"
#include "driveid/numerics/ops.hpp"

namespace driveid::training {

using numerics::Rng;
using numerics::Tape;

std::string to_string(Mode mode) {
  return mode == Mode::Triplet ? "triplet" : "cross_entropy";
}

std::string to_string(Mining mining) {
  return mining == Mining::Random ? "random" : "semi_hard";
}

Mode parse_mode(const std::string& name) {
  if (name == "triplet") return Mode::Triplet;
  if (name == "cross_entropy") return Mode::CrossEntropy;
  throw ConfigError("unknown training mode '" + name + "' (expected triplet or cross_entropy)");
}

Mining parse_mining(const std::string& name) {
  if (name == "random") return Mining::Random;
  if (name == "semi_hard") return Mining::SemiHard;
  throw ConfigError("unknown mining strategy '" + name + "' (expected random or semi_hard)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive");
  }
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay must lie in (0, 1]");
  if (!(margin > 0.0) || !std::isfinite(margin)) throw ConfigError("margin must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (mining == Mining::SemiHard && semi_hard_candidates == 0) {
    throw ConfigError("semi-hard mining needs at least one candidate negative");
  }
}

// ---------------------------------------------------------------------------
// Triplet sampling

namespace {

std::string driver_label(int driver, std::span<const std::string> names) {
  if (driver >= 0 && static_cast<std::size_t>(driver) < names.size()) {
    return "'" + names[static_cast<std::size_t>(driver)] + "'";
  }
  return std::to_string(driver);
}

}  // namespace

TripletSampler::TripletSampler(std::span<const data::Window> windows,
                               std::span<const std::string> driver_names) {
  std::map<int, std::vector<std::size_t>> by_driver;
  labels_.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    labels_.push_back(windows[i].driver);
    by_driver[windows[i].driver].push_back(i);
  }
  for (std::size_t d = 0; d < driver_names.size(); ++d) {
    if (!by_driver.contains(static_cast<int>(d))) {
      throw DataError("driver " + driver_label(static_cast<int>(d), driver_names) +
                      " has no windows in this split; triplets need at least 2");
    }
  }
  for (const auto& [driver, members] : by_driver) {
    if (members.size() < 2) {
      throw DataError("driver " + driver_label(driver, driver_names) + " has " +
                      std::to_string(members.size()) +
                      " window in this split; triplets need at least 2");
    }
  }
  if (by_driver.size() < 2) {
    throw DataError("triplets need windows from at least 2 drivers, got " +
                    std::to_string(by_driver.size()));
  }
  for (const auto& [driver, members] : by_driver) {
    blocks_.push_back(Block{order_.size(), members.size()});
    block_driver_.push_back(driver);
    order_.insert(order_.end(), members.begin(), members.end());
  }
}

const TripletSampler::Block& TripletSampler::block_of(int driver) const {
  const auto it = std::lower_bound(block_driver_.begin(), block_driver_.end(), driver);
  if (it == block_driver_.end() || *it != driver) {
    throw ContractError("driver " + std::to_string(driver) + " is not in the sampler");
  }
  return blocks_[static_cast<std::size_t>(it - block_driver_.begin())];
}

std::size_t TripletSampler::draw_negative(int driver, Rng& rng) const {
  const Block& own = block_of(driver);
  std::size_t j = rng.uniform_index(order_.size() - own.size);
  if (j >= own.begin) j += own.size;
  return order_[j];
}

Triplet TripletSampler::draw(Rng& rng) const {
  Triplet t;
  t.anchor = rng.uniform_index(labels_.size());
  const int driver = labels_[t.anchor];
  const Block& own = block_of(driver);
  // Uniform over the driver's other windows: skip the anchor's slot.
  std::size_t slot = 0;
  while (order_[own.begin + slot] != t.anchor) ++slot;
  std::size_t j = rng.uniform_index(own.size - 1);
  if (j >= slot) ++j;
  t.positive = order_[own.begin + j];
  t.negative = draw_negative(driver, rng);
  return t;
}

std::vector<Triplet> sample_triplets(std::span<const data::Window> windows,
                                     std::size_t batch_size, Rng& rng,
                                     std::span<const std::string> driver_names) {
  const TripletSampler sampler(windows, driver_names);
  std::vector<Triplet> out;
  out.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) out.push_back(sampler.draw(rng));
  return out;
}

// ---------------------------------------------------------------------------
// Loss and optimizer

double triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                    std::span<const double> negative, double margin) {
  if (anchor.size() != positive.size() || anchor.size() != negative.size()) {
    throw DimensionError("triplet_loss: embedding lengths " + std::to_string(anchor.size()) +
                         ", " + std::to_string(positive.size()) + ", " +
                         std::to_string(negative.size()) + " differ");
  }
  double rp = 0.0;
  double rn = 0.0;
  for (std::size_t d = 0; d < anchor.size(); ++d) {
    const double a = anchor[d] - positive[d];
    const double b = anchor[d] - negative[d];
    rp += a * a;
    rn += b * b;
  }
  const double d = rp - rn + margin;
  return d <= 0.0 ? 0.0 : d;
}

Var triplet_loss(Var anchor, Var positive, Var negative, double margin) {
  Var rp = numerics::squared_l2_distance(anchor, positive);
  Var rn = numerics::squared_l2_distance(anchor, negative);
  return numerics::relu(numerics::add_scalar(numerics::sub(rp, rn), margin));
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               double learning_rate) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) {
    throw ContractError("adam_step: optimizer state belongs to a different parameter set");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (g.shape() != p.shape()) {
      throw DimensionError("adam_step: gradient shape " + numerics::to_string(g.shape()) +
                           " does not match parameter " + numerics::to_string(p.shape()));
    }
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p[k] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

using Clock = std::chrono::steady_clock;

std::vector<Tensor> zeros_like(std::span<Tensor* const> params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Tensor* p : params) out.emplace_back(p->shape());
  return out;
}

void accumulate(std::vector<Tensor>& into, std::span<const Var> vars) {
  for (std::size_t i = 0; i < into.size(); ++i) {
    const Tensor& g = vars[i].grad();
    double* dst = into[i].data();
    const double* src = g.data();
    for (std::size_t k = 0; k < g.size(); ++k) dst[k] += src[k];
  }
}

void add_into(std::vector<Tensor>& into, const std::vector<Tensor>& from) {
  for (std::size_t i = 0; i < into.size(); ++i) {
    double* dst = into[i].data();
    const double* src = from[i].data();
    for (std::size_t k = 0; k < into[i].size(); ++k) dst[k] += src[k];
  }
}

/// One training example of a batch: a triplet or a labelled window.
struct Example {
  Triplet triplet;
  std::uint64_t dropout_seed = 0;
};

class Trainer {
 public:
  Trainer(const data::Dataset& dataset, const encoder::EncoderConfig& ecfg,
          const TrainConfig& cfg)
      : dataset_(dataset), cfg_(cfg), params_(encoder::build_encoder(ecfg, cfg.seed)) {
    if (cfg.mode == Mode::CrossEntropy) {
      Rng rng(numerics::derive_seed(cfg.seed, 0xce4ead));
      const std::size_t in = ecfg.embedding_size();
      const std::size_t k = dataset.driver_count();
      Tensor w({in, k});
      const double sd = std::sqrt(2.0 / static_cast<double>(in));
      for (double& v : w.values()) v = rng.normal(0.0, sd);
      head_ = encoder::LinearLayer{std::move(w), Tensor({k})};
    }
    tensors_ = params_.tensors();
    if (head_) tensors_.insert(tensors_.end(), {&head_->weight, &head_->bias});
  }

  TrainResult run(const EpochCallback& on_epoch) {
    const auto start = Clock::now();
    TrainResult result;
    if (cfg_.epochs > 0) {
      const TripletSampler sampler(dataset_.train, dataset_.drivers);
      const std::size_t n = dataset_.train.size();
      const std::size_t batches = (n + cfg_.batch_size - 1) / cfg_.batch_size;
      Rng rng(numerics::derive_seed(cfg_.seed, 0x7a1e));
      AdamState adam;
      std::uint64_t example_counter = 0;
      for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
        const double lr = cfg_.learning_rate * std::pow(cfg_.decay, static_cast<double>(epoch));
        const auto epoch_start = Clock::now();
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
          std::vector<Example> batch(cfg_.batch_size);
          for (Example& ex : batch) {
            ex.triplet = sampler.draw(rng);
            ex.dropout_seed = numerics::derive_seed(cfg_.seed, 0xd20f0000 + example_counter++);
          }
          if (cfg_.mode == Mode::Triplet && cfg_.mining == Mining::SemiHard) {
            mine_semi_hard(batch, sampler, rng);
          }
          std::vector<Tensor> grads = zeros_like(tensors_);
          const double loss = run_batch(batch, grads);
          if (!std::isfinite(loss)) {
            std::ostringstream msg;
            msg << "non-finite loss at epoch " << epoch << ", batch " << b
                << " (learning rate " << lr << ")";
            throw TrainingError(msg.str());
          }
          loss_sum += loss;
          adam_step(tensors_, grads, adam, lr);
        }
        const double mean = loss_sum / static_cast<double>(batches);
        result.loss_history.push_back(mean);
        result.learning_rates.push_back(lr);
        if (on_epoch) {
          on_epoch(EpochStats{epoch, mean, lr,
                              std::chrono::duration<double>(Clock::now() - epoch_start).count()});
        }
      }
    }
    result.params = std::move(params_);
    result.classifier_head = std::move(head_);
    result.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return result;
  }

 private:
  /// Mean loss over the batch; gradients of that mean are added to `grads`.
  double run_batch(const std::vector<Example>& batch, std::vector<Tensor>& grads) const {
    const std::size_t threads = std::max<std::size_t>(1, std::min(cfg_.threads, batch.size()));
    const double weight = 1.0 / static_cast<double>(batch.size());
    if (threads == 1) {
      double total = 0.0;
      for (const Example& ex : batch) total += run_example(ex, weight, grads);
      return total;
    }
    // Contiguous chunks, reduced in chunk order.
    std::vector<std::vector<Tensor>> partial(threads);
    std::vector<double> losses(threads, 0.0);
    const std::size_t chunk = (batch.size() + threads - 1) / threads;
    {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          partial[t] = zeros_like(tensors_);
          const std::size_t end = std::min(batch.size(), (t + 1) * chunk);
          for (std::size_t i = t * chunk; i < end; ++i) {
            losses[t] += run_example(batch[i], weight, partial[t]);
          }
        });
      }
    }
    double total = 0.0;
    for (std::size_t t = 0; t < threads; ++t) {
      add_into(grads, partial[t]);
      total += losses[t];
    }
    return total;
  }

  /// Weighted loss of one example; its weighted gradient is added to `grads`.
  double run_example(const Example& ex, double weight, std::vector<Tensor>& grads) const {
    Tape tape;
    encoder::EncoderGraph graph(tape, params_, true);
    numerics::DropoutStream dropout(ex.dropout_seed);
    const auto& windows = dataset_.train;
    Var loss;
    std::vector<Var> vars(graph.parameters().begin(), graph.parameters().end());
    if (cfg_.mode == Mode::Triplet) {
      Var r = graph.embed(windows[ex.triplet.anchor], true, &dropout);
      Var p = graph.embed(windows[ex.triplet.positive], true, &dropout);
      Var n = graph.embed(windows[ex.triplet.negative], true, &dropout);
      loss = numerics::scale(triplet_loss(r, p, n, cfg_.margin), weight);
    } else {
      const data::Window& w = windows[ex.triplet.anchor];
      Var e = graph.embed(w, true, &dropout);
      vars.push_back(tape.parameter(head_->weight));
      vars.push_back(tape.parameter(head_->bias));
      Var logits = numerics::linear(e, vars[vars.size() - 2], vars.back());
      const int label[] = {w.driver};
      loss = numerics::scale(numerics::softmax_cross_entropy(logits, label), weight);
    }
    tape.backward(loss);
    accumulate(grads, vars);
    return loss.value().item();
  }

  /// Replaces each negative by the closest one farther than the positive,
  /// among a few random candidates (eval-mode embeddings).
  void mine_semi_hard(std::vector<Example>& batch, const TripletSampler& sampler,
                      Rng& rng) const {
    const auto& windows = dataset_.train;
    for (Example& ex : batch) {
      const auto r = encoder::embed(params_, windows[ex.triplet.anchor]);
      const auto p = encoder::embed(params_, windows[ex.triplet.positive]);
      const double rp = sq_distance(r, p);
      const int driver = windows[ex.triplet.anchor].driver;
      double best = std::numeric_limits<double>::infinity();
      std::size_t chosen = ex.triplet.negative;
      for (std::size_t c = 0; c < cfg_.semi_hard_candidates; ++c) {
        const std::size_t cand = sampler.draw_negative(driver, rng);
        const double rn = sq_distance(r, encoder::embed(params_, windows[cand]));
        if (rn > rp && rn < best) {
          best = rn;
          chosen = cand;
        }
      }
      ex.triplet.negative = chosen;
    }
  }

  static double sq_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
  }

  const data::Dataset& dataset_;
  TrainConfig cfg_;
  encoder::EncoderParams params_;
  std::optional<encoder::LinearLayer> head_;
  std::vector<Tensor*> tensors_;
};

}  // namespace

TrainResult train(const data::Dataset& dataset, const encoder::EncoderConfig& encoder_config,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  encoder_config.validate();
  if (encoder_config.in_channels != dataset.channel_count()) {
    throw ConfigError("encoder expects " + std::to_string(encoder_config.in_channels) +
                      " channels but the dataset has " + std::to_string(dataset.channel_count()));
  }
  if (encoder_config.window_length != dataset.window_length()) {
    throw ConfigError("encoder window length " + std::to_string(encoder_config.window_length) +
                      " does not match the dataset's " + std::to_string(dataset.window_length()));
  }
  if (config.epochs > 0 && dataset.train.empty()) {
    throw DataError("training split has no windows");
  }
  Trainer trainer(dataset, encoder_config, config);
  return trainer.run(on_epoch);
}

void write_run_manifest(const std::filesystem::path& path,
                        const encoder::EncoderConfig& encoder_config,
                        const TrainConfig& config, const TrainResult& result) {
  detail::json epochs = detail::json::array();
  for (std::size_t i = 0; i < result.loss_history.size(); ++i) {
    epochs.push_back({{"epoch", i},
                      {"learning_rate", result.learning_rates[i]},
                      {"mean_loss", result.loss_history[i]}});
  }
  const detail::json doc = {{"encoder", detail::to_json(encoder_config)},
                            {"training", detail::to_json(config)},
                            {"seed", config.seed},
                            {"parameter_count", result.params.parameter_count()},
                            {"epochs", epochs},
                            {"wall_seconds", result.wall_seconds}};
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write run manifest " + path.string());
  out << doc.dump(2) << '\n';
}

void write_loss_history(const std::filesystem::path& path, const TrainResult& result) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write loss history " + path.string());
  out << "epoch,learning_rate,mean_loss\n" << std::setprecision(17);
  for (std::size_t i = 0; i < result.loss_history.size(); ++i) {
    out << i << ',' << result.learning_rates[i] << ',' << result.loss_history[i] << '\n';
  }
}

}  // namespace driveid::training
