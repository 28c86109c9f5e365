#include "driveid/encoder/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include "driveid/error.hpp"
#include "driveid/numerics/random.hpp"
#include "driveid/wavelet/haar.hpp"
#include "../config_json.hpp"

namespace driveid::encoder {

using detail::json;
using numerics::Rng;
using numerics::Tape;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

std::size_t EncoderConfig::receptive_field() const {
  if (levels >= 63) return static_cast<std::size_t>(-1);
  return 1 + 2 * (kernel_size - 1) * ((std::size_t{1} << levels) - 1);
}

void EncoderConfig::validate() const {
  if (in_channels == 0 || kernel_size == 0 || levels == 0 || hidden_channels == 0 ||
      tcn_embedding == 0 || wavelet_embedding_per_branch == 0 || window_length == 0) {
    throw ConfigError("encoder sizes must all be positive");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw ConfigError("encoder dropout must lie in [0, 1)");
  }
  if (window_length % 2 != 0) {
    throw ConfigError("window length " + std::to_string(window_length) +
                      " must be even for the Haar branch");
  }
  if (receptive_field() < window_length) {
    throw ConfigError("receptive field " + std::to_string(receptive_field()) +
                      " is shorter than the window length " + std::to_string(window_length) +
                      " (kernel " + std::to_string(kernel_size) + ", " + std::to_string(levels) +
                      " levels)");
  }
}

std::vector<Tensor*> EncoderParams::tensors() {
  std::vector<Tensor*> out;
  for (auto& b : blocks) {
    out.insert(out.end(), {&b.conv1.weight, &b.conv1.bias, &b.conv2.weight, &b.conv2.bias});
    if (b.projection) out.insert(out.end(), {&b.projection->weight, &b.projection->bias});
  }
  out.insert(out.end(), {&tcn_head.weight, &tcn_head.bias, &approx_head.weight,
                         &approx_head.bias, &detail_head.weight, &detail_head.bias});
  return out;
}

std::vector<const Tensor*> EncoderParams::tensors() const {
  auto mutable_view = const_cast<EncoderParams*>(this)->tensors();
  return {mutable_view.begin(), mutable_view.end()};
}

std::vector<std::string> EncoderParams::tensor_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    names.insert(names.end(), {p + "conv1.weight", p + "conv1.bias", p + "conv2.weight",
                               p + "conv2.bias"});
    if (blocks[i].projection) {
      names.insert(names.end(), {p + "projection.weight", p + "projection.bias"});
    }
  }
  names.insert(names.end(), {"tcn_head.weight", "tcn_head.bias", "approx_head.weight",
                             "approx_head.bias", "detail_head.weight", "detail_head.bias"});
  return names;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

namespace {

// Gain of the embedding head initialisation.
constexpr double kHeadGain = 0.01;

Tensor he_normal(numerics::Shape shape, std::size_t fan_in, Rng& rng, double gain = 1.0) {
  Tensor t(std::move(shape));
  const double sd = gain * std::sqrt(2.0 / static_cast<double>(fan_in));
  for (double& v : t.values()) v = rng.normal(0.0, sd);
  return t;
}

ConvLayer make_conv(std::size_t cout, std::size_t cin, std::size_t taps, Rng& rng) {
  return ConvLayer{he_normal({cout, cin, taps}, cin * taps, rng), Tensor({cout})};
}

LinearLayer make_linear(std::size_t in, std::size_t out, Rng& rng) {
  return LinearLayer{he_normal({in, out}, in, rng, kHeadGain), Tensor({out})};
}

}  // namespace

EncoderParams build_encoder(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(numerics::derive_seed(seed, 0xe1c0de));
  EncoderParams params;
  params.config = cfg;
  std::size_t channels = cfg.in_channels;
  for (std::size_t level = 0; level < cfg.levels; ++level) {
    ResidualBlockParams block;
    block.conv1 = make_conv(cfg.hidden_channels, channels, cfg.kernel_size, rng);
    block.conv2 = make_conv(cfg.hidden_channels, cfg.hidden_channels, cfg.kernel_size, rng);
    if (channels != cfg.hidden_channels) {
      block.projection = make_conv(cfg.hidden_channels, channels, 1, rng);
    }
    params.blocks.push_back(std::move(block));
    channels = cfg.hidden_channels;
  }
  const std::size_t wavelet_inputs = cfg.in_channels * cfg.window_length / 2;
  params.tcn_head = make_linear(cfg.hidden_channels, cfg.tcn_embedding, rng);
  params.approx_head = make_linear(wavelet_inputs, cfg.wavelet_embedding_per_branch, rng);
  params.detail_head = make_linear(wavelet_inputs, cfg.wavelet_embedding_per_branch, rng);
  return params;
}

EncoderGraph::EncoderGraph(Tape& tape, const EncoderParams& params, bool trainable)
    : tape_(tape), params_(params) {
  for (const Tensor* t : params.tensors()) {
    vars_.push_back(trainable ? tape.parameter(*t) : tape.borrow(*t));
  }
}

EncoderGraph::EncoderGraph(const EncoderParams& params, std::span<const Var> vars)
    : tape_(vars.empty() ? throw ContractError("EncoderGraph: no variables") : vars.front().tape()),
      params_(params),
      vars_(vars.begin(), vars.end()) {
  const auto tensors = params.tensors();
  if (vars_.size() != tensors.size()) {
    throw ContractError("EncoderGraph: expected " + std::to_string(tensors.size()) +
                        " variables, got " + std::to_string(vars_.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (vars_[i].shape() != tensors[i]->shape()) {
      throw DimensionError("EncoderGraph: variable " + std::to_string(i) + " has shape " +
                           numerics::to_string(vars_[i].shape()) + ", expected " +
                           numerics::to_string(tensors[i]->shape()));
    }
  }
}

Var EncoderGraph::block(Var x, std::size_t level, bool last, bool training,
                        numerics::DropoutStream* dropout, Readout readout) const {
  // Offset of this block's tensors in vars_.
  std::size_t offset = 0;
  for (std::size_t i = 0; i < level; ++i) offset += params_.blocks[i].projection ? 6 : 4;
  const bool has_projection = params_.blocks[level].projection.has_value();

  const bool full = readout == Readout::FullSequence;
  const std::size_t dilation = full ? (std::size_t{1} << level) : 1;
  const std::size_t length = x.shape()[2];
  const std::size_t stride = full ? 1 : (last ? length : 2);
  const double p = params_.config.dropout_p;

  auto drop = [&](Var v) {
    if (!training || p == 0.0) return v;
    if (dropout == nullptr) throw ContractError("training-mode embed needs a dropout stream");
    return numerics::dropout(v, p, true, *dropout);
  };

  Var h = numerics::conv1d_causal(x, vars_[offset], vars_[offset + 1], dilation);
  h = drop(numerics::relu(h));
  Var y = numerics::conv1d_causal(h, vars_[offset + 2], vars_[offset + 3], dilation, stride);
  Var residual = has_projection
                     ? numerics::conv1d_causal(x, vars_[offset + 4], vars_[offset + 5], 1, stride)
                     : numerics::decimate_tail(x, stride);
  return drop(numerics::relu(numerics::add(residual, y)));
}

namespace {

/// Wavelet coefficients enter their heads scaled by 1/sqrt(count).
std::vector<double> scaled(std::vector<double> coefficients) {
  const double factor = 1.0 / std::sqrt(static_cast<double>(coefficients.size()));
  for (double& c : coefficients) c *= factor;
  return coefficients;
}

}  // namespace

Var EncoderGraph::embed(const Tensor& frames, bool training, numerics::DropoutStream* dropout,
                        Readout readout) const {
  const EncoderConfig& cfg = params_.config;
  if (frames.shape() != numerics::Shape{cfg.in_channels, cfg.window_length}) {
    throw DimensionError("encoder expects a " + std::to_string(cfg.in_channels) + "x" +
                         std::to_string(cfg.window_length) + " window, got " +
                         numerics::to_string(frames.shape()));
  }
  const wavelet::WaveletFeatures features = wavelet::window_wavelet_features(frames);
  const std::size_t half = features.approx.size();

  Var x = tape_.constant(Tensor({1, cfg.in_channels, cfg.window_length},
                                std::vector<double>(frames.values().begin(),
                                                    frames.values().end())));
  for (std::size_t level = 0; level < cfg.levels; ++level) {
    x = block(x, level, level + 1 == cfg.levels, training, dropout, readout);
  }
  const std::size_t heads = vars_.size() - 6;
  Var tcn = numerics::linear(numerics::last_frame(x), vars_[heads], vars_[heads + 1]);

  Var approx_in = tape_.constant(Tensor({1, half}, scaled(features.approx)));
  Var detail_in = tape_.constant(Tensor({1, half}, scaled(features.detail)));
  Var approx = numerics::linear(approx_in, vars_[heads + 2], vars_[heads + 3]);
  Var detail = numerics::linear(detail_in, vars_[heads + 4], vars_[heads + 5]);
  const Var parts[] = {tcn, approx, detail};
  return numerics::concat_columns(parts);
}

Var EncoderGraph::embed(const data::Window& window, bool training,
                        numerics::DropoutStream* dropout, Readout readout) const {
  return embed(window.frames(), training, dropout, readout);
}

std::vector<double> embed(const EncoderParams& params, const Tensor& frames) {
  Tape tape;
  EncoderGraph graph(tape, params, false);
  const Var e = graph.embed(frames, false, nullptr);
  return {e.value().values().begin(), e.value().values().end()};
}

std::vector<double> embed(const EncoderParams& params, const data::Window& window) {
  return embed(params, window.frames());
}

Tensor embed_batch(const EncoderParams& params, std::span<const data::Window> windows,
                   std::size_t threads) {
  const std::size_t dim = params.config.embedding_size();
  if (windows.empty()) return Tensor();
  Tensor out({windows.size(), dim});
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = embed(params, windows[i]);
      std::copy(row.begin(), row.end(), out.data() + i * dim);
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, windows.size());
  if (threads <= 1) {
    work(0, windows.size());
    return out;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (windows.size() + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(windows.size(), begin + chunk);
    if (begin < end) pool.emplace_back(work, begin, end);
  }
  pool.clear();
  return out;
}

namespace {

constexpr char kMagic[8] = {'D', 'R', 'V', 'I', 'D', 'E', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::filesystem::path& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("checkpoint " + path.string() + " is truncated");
  return value;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const std::filesystem::path& path) {
  const auto n = read_pod<std::uint64_t>(in, path);
  if (n > (1u << 20)) throw FormatError("checkpoint " + path.string() + " has a corrupt string");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw FormatError("checkpoint " + path.string() + " is truncated");
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_string(out, detail::to_json(params.config).dump());
  const auto tensors = params.tensors();
  const auto names = params.tensor_names();
  write_pod<std::uint64_t>(out, tensors.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    write_string(out, names[i]);
    write_pod<std::uint64_t>(out, tensors[i]->rank());
    for (std::size_t d : tensors[i]->shape()) write_pod<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(tensors[i]->data()),
              static_cast<std::streamsize>(tensors[i]->size() * sizeof(double)));
  }
  if (!out) throw FormatError("failed writing checkpoint " + path.string());
}

EncoderParams load_checkpoint(const std::filesystem::path& path,
                              const std::optional<EncoderConfig>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path.string() + " is not an encoder checkpoint");
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw FormatError("checkpoint " + path.string() + " has unsupported version " +
                      std::to_string(version));
  }
  EncoderConfig cfg;
  try {
    detail::read_into(json::parse(read_string(in, path)), cfg, "checkpoint config");
  } catch (const json::exception& e) {
    throw FormatError("checkpoint " + path.string() + " has a corrupt config: " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError("checkpoint " + path.string() + " has a corrupt config: " + e.what());
  }
  if (expected && !(*expected == cfg)) {
    throw ConfigError("checkpoint " + path.string() + " was trained with config " +
                      detail::to_json(cfg).dump() + " but " + detail::to_json(*expected).dump() +
                      " was requested");
  }
  EncoderParams params = build_encoder(cfg, 0);
  const auto tensors = params.tensors();
  const auto names = params.tensor_names();
  const auto count = read_pod<std::uint64_t>(in, path);
  if (count != tensors.size()) {
    throw FormatError("checkpoint " + path.string() + " holds " + std::to_string(count) +
                      " tensors, config needs " + std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const std::string name = read_string(in, path);
    if (name != names[i]) {
      throw FormatError("checkpoint " + path.string() + ": expected tensor '" + names[i] +
                        "', found '" + name + "'");
    }
    const auto rank = read_pod<std::uint64_t>(in, path);
    numerics::Shape shape;
    for (std::uint64_t d = 0; d < rank; ++d) shape.push_back(read_pod<std::uint64_t>(in, path));
    if (shape != tensors[i]->shape()) {
      throw FormatError("checkpoint " + path.string() + ": tensor '" + name + "' has shape " +
                        numerics::to_string(shape) + ", expected " +
                        numerics::to_string(tensors[i]->shape()));
    }
    in.read(reinterpret_cast<char*>(tensors[i]->data()),
            static_cast<std::streamsize>(tensors[i]->size() * sizeof(double)));
    if (!in) throw FormatError("checkpoint " + path.string() + " is truncated");
  }
  return params;
}

}  // namespace driveid::encoder
