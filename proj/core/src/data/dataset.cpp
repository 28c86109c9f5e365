#include "driveid/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "driveid/error.hpp"
#include "json.hpp"

namespace driveid::data {

SplitRanges split_811(std::size_t frames) {
  const std::size_t tenth = frames / 10;
  const std::size_t train_end = frames - 2 * tenth;
  return SplitRanges{{0, train_end}, {train_end, train_end + tenth}, {train_end + tenth, frames}};
}

namespace {

std::size_t to_frames(double seconds, double rate, const char* what) {
  const double exact = seconds * rate;
  const double rounded = std::round(exact);
  if (!(rounded >= 1.0) || std::abs(exact - rounded) > 1e-9 * std::max(1.0, exact)) {
    throw ConfigError(std::string(what) + " of " + std::to_string(seconds) +
                      " s is not a positive whole number of frames at " + std::to_string(rate) +
                      " Hz");
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace

std::size_t WindowingConfig::length_frames() const {
  return to_frames(interval_length_s, sample_rate_hz, "interval length");
}

std::size_t WindowingConfig::gap_frames() const {
  return to_frames(interval_gap_s, sample_rate_hz, "interval gap");
}

void WindowingConfig::validate() const {
  if (!(sample_rate_hz > 0.0)) throw ConfigError("sample rate must be positive");
  if (!(interval_gap_s > 0.0)) throw ConfigError("interval gap must be positive");
  if (!(interval_length_s > 0.0)) throw ConfigError("interval length must be positive");
  (void)length_frames();
  (void)gap_frames();
}

std::size_t window_count(std::size_t range_frames, std::size_t length_frames,
                         std::size_t gap_frames) {
  if (gap_frames == 0) throw ConfigError("window gap must be positive");
  if (range_frames < length_frames) return 0;
  return (range_frames - length_frames) / gap_frames + 1;
}

numerics::Tensor Window::frames() const {
  const std::size_t channels = channel_count();
  numerics::Tensor out({channels, length});
  for (std::size_t t = 0; t < length; ++t) {
    const double* row = source->values.data() + (start + t) * channels;
    for (std::size_t c = 0; c < channels; ++c) out[c * length + t] = row[c];
  }
  return out;
}

std::vector<Window> make_windows(std::shared_ptr<const Recording> recording,
                                 std::size_t recording_index, FrameRange range,
                                 const WindowingConfig& cfg, int driver) {
  if (range.end > recording->frames || range.begin > range.end) {
    throw ContractError("window range exceeds recording");
  }
  const std::size_t length = cfg.length_frames();
  const std::size_t gap = cfg.gap_frames();
  const std::size_t count = window_count(range.size(), length, gap);
  std::vector<Window> windows;
  windows.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Window w;
    w.source = recording;
    w.recording_index = recording_index;
    w.start = range.begin + i * gap;
    w.length = length;
    w.driver = driver;
    w.area = recording->area;
    windows.push_back(std::move(w));
  }
  return windows;
}

Normalizer::Normalizer(std::vector<double> mean, std::vector<double> scale)
    : mean_(std::move(mean)), scale_(std::move(scale)) {
  if (mean_.size() != scale_.size()) throw DimensionError("normalizer mean/scale size mismatch");
}

Normalizer Normalizer::fit(std::span<const Window> windows) {
  if (windows.empty()) throw DataError("cannot fit normalizer on zero windows");
  const std::size_t channels = windows.front().channel_count();
  std::vector<double> mean(channels, 0.0);
  std::vector<double> var(channels, 0.0);
  double count = 0.0;
  for (const Window& w : windows) {
    if (w.channel_count() != channels) throw DataError("windows disagree on channel count");
    for (std::size_t t = 0; t < w.length; ++t) {
      for (std::size_t c = 0; c < channels; ++c) mean[c] += w.at(c, t);
    }
    count += static_cast<double>(w.length);
  }
  for (double& m : mean) m /= count;
  for (const Window& w : windows) {
    for (std::size_t t = 0; t < w.length; ++t) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double d = w.at(c, t) - mean[c];
        var[c] += d * d;
      }
    }
  }
  std::vector<double> scale(channels, 1.0);
  for (std::size_t c = 0; c < channels; ++c) {
    const double sd = std::sqrt(var[c] / count);
    if (sd > 1e-12 * std::max(1.0, std::abs(mean[c]))) scale[c] = sd;
  }
  return Normalizer(std::move(mean), std::move(scale));
}

Recording Normalizer::apply(const Recording& recording) const {
  if (recording.channel_count() != mean_.size()) {
    throw DimensionError("normalizer fitted for " + std::to_string(mean_.size()) +
                         " channels applied to " + std::to_string(recording.channel_count()));
  }
  Recording out = recording;
  const std::size_t channels = mean_.size();
  for (std::size_t t = 0; t < out.frames; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      double& v = out.values[t * channels + c];
      v = (v - mean_[c]) / scale_[c];
    }
  }
  return out;
}

Window Normalizer::apply(const Window& window) const {
  auto slice = std::make_shared<Recording>();
  slice->driver = window.source->driver;
  slice->area = window.source->area;
  slice->channels = window.source->channels;
  slice->frames = window.length;
  const std::size_t channels = window.channel_count();
  const auto first = window.source->values.begin() +
                     static_cast<std::ptrdiff_t>(window.start * channels);
  slice->values.assign(first, first + static_cast<std::ptrdiff_t>(window.length * channels));
  Window out = window;
  out.source = std::make_shared<const Recording>(apply(*slice));
  out.start = 0;
  return out;
}

namespace {

std::vector<Window> rebind(const std::vector<Window>& windows,
                           const std::vector<std::shared_ptr<const Recording>>& recordings) {
  std::vector<Window> out = windows;
  for (Window& w : out) w.source = recordings.at(w.recording_index);
  return out;
}

}  // namespace

Dataset build_dataset(std::vector<Recording> recordings, const WindowingConfig& cfg) {
  cfg.validate();
  if (recordings.empty()) throw DataError("dataset has no recordings");
  Dataset ds;
  ds.windowing = cfg;
  ds.channels = recordings.front().channels;
  std::map<std::string, int> labels;
  for (const Recording& r : recordings) {
    if (r.channels != ds.channels) {
      throw DataError("recording of driver '" + r.driver + "' has a different channel layout");
    }
    labels.emplace(r.driver, 0);
  }
  int next = 0;
  for (auto& [id, label] : labels) {
    label = next++;
    ds.drivers.push_back(id);
  }
  for (Recording& r : recordings) {
    ds.recordings.push_back(std::make_shared<const Recording>(std::move(r)));
  }
  for (std::size_t i = 0; i < ds.recordings.size(); ++i) {
    const auto& rec = ds.recordings[i];
    const int driver = labels.at(rec->driver);
    const SplitRanges split = split_811(rec->frames);
    auto append = [&](std::vector<Window>& dst, FrameRange range) {
      auto windows = make_windows(rec, i, range, cfg, driver);
      dst.insert(dst.end(), windows.begin(), windows.end());
    };
    append(ds.train, split.train);
    append(ds.eval, split.eval);
    append(ds.test, split.test);
  }
  return ds;
}

Dataset rewindow(const Dataset& dataset, const WindowingConfig& cfg) {
  std::vector<Recording> recordings;
  recordings.reserve(dataset.recordings.size());
  for (const auto& r : dataset.recordings) recordings.push_back(*r);
  return build_dataset(std::move(recordings), cfg);
}

Dataset normalize(const Dataset& dataset, const Normalizer& normalizer) {
  Dataset out = dataset;
  for (auto& r : out.recordings) r = std::make_shared<const Recording>(normalizer.apply(*r));
  out.train = rebind(dataset.train, out.recordings);
  out.eval = rebind(dataset.eval, out.recordings);
  out.test = rebind(dataset.test, out.recordings);
  return out;
}

std::string GroupMask::label() const {
  auto join = [](const std::set<ChannelGroup>& groups) {
    std::string s;
    for (ChannelGroup g : groups) {
      if (!s.empty()) s += "+";
      s += to_string(g);
    }
    return s;
  };
  if (keep_only) return "keep only " + join(*keep_only);
  if (removed.empty()) return "all included";
  return "without " + join(removed);
}

Dataset mask_groups(const Dataset& dataset, const GroupMask& mask) {
  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c < dataset.channels.size(); ++c) {
    const ChannelGroup g = group_of(dataset.channels[c]);
    const bool keep = mask.keep_only ? mask.keep_only->contains(g) : !mask.removed.contains(g);
    if (keep) kept.push_back(c);
  }
  if (kept.empty()) throw ConfigError("group mask '" + mask.label() + "' removes every channel");

  Dataset out = dataset;
  out.channels.clear();
  for (std::size_t c : kept) out.channels.push_back(dataset.channels[c]);
  for (auto& r : out.recordings) {
    auto reduced = std::make_shared<Recording>();
    reduced->driver = r->driver;
    reduced->area = r->area;
    reduced->channels = out.channels;
    reduced->frames = r->frames;
    reduced->values.reserve(r->frames * kept.size());
    for (std::size_t t = 0; t < r->frames; ++t) {
      for (std::size_t c : kept) reduced->values.push_back(r->at(t, c));
    }
    r = std::move(reduced);
  }
  out.train = rebind(dataset.train, out.recordings);
  out.eval = rebind(dataset.eval, out.recordings);
  out.test = rebind(dataset.test, out.recordings);
  return out;
}

void save_normalizer(const std::filesystem::path& path, const Normalizer& normalizer,
                     std::span<const std::string> channels) {
  if (channels.size() != normalizer.mean().size()) {
    throw DimensionError("normalizer has " + std::to_string(normalizer.mean().size()) +
                         " channels but " + std::to_string(channels.size()) + " names");
  }
  nlohmann::json doc;
  doc["format"] = "driveid-normalizer";
  doc["version"] = 1;
  doc["channels"] = std::vector<std::string>(channels.begin(), channels.end());
  doc["mean"] = normalizer.mean();
  doc["scale"] = normalizer.scale();
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

Normalizer load_normalizer(const std::filesystem::path& path,
                           std::span<const std::string> expected_channels) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open normalizer " + path.string());
  try {
    const nlohmann::json doc = nlohmann::json::parse(in);
    if (doc.at("format") != "driveid-normalizer" || doc.at("version") != 1) {
      throw FormatError(path.string() + " is not a version-1 normalizer file");
    }
    const auto channels = doc.at("channels").get<std::vector<std::string>>();
    if (!std::equal(channels.begin(), channels.end(), expected_channels.begin(),
                    expected_channels.end())) {
      throw FormatError("normalizer " + path.string() + " was fitted on different channels");
    }
    auto mean = doc.at("mean").get<std::vector<double>>();
    auto scale = doc.at("scale").get<std::vector<double>>();
    if (mean.size() != channels.size() || scale.size() != channels.size()) {
      throw FormatError("normalizer " + path.string() + " has inconsistent sizes");
    }
    for (double s : scale) {
      if (!(s > 0.0) || !std::isfinite(s)) throw FormatError("normalizer scale must be positive");
    }
    return Normalizer(std::move(mean), std::move(scale));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed normalizer " + path.string() + ": " + e.what());
  }
}

}  // namespace driveid::data
