#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "driveid/data/channels.hpp"
#include "driveid/data/recording.hpp"
#include "driveid/numerics/tensor.hpp"

namespace driveid::data {

/// Half-open frame interval [begin, end).
struct FrameRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool contains(std::size_t first, std::size_t count) const noexcept {
    return first >= begin && first + count <= end;
  }
  friend bool operator==(const FrameRange&, const FrameRange&) = default;
};

/// Contiguous 80/10/10 train/eval/test partition of a recording, earliest
/// frames first. Rounding remainder goes to train.
struct SplitRanges {
  FrameRange train;
  FrameRange eval;
  FrameRange test;
};

SplitRanges split_811(std::size_t frames);

struct WindowingConfig {
  double interval_length_s = 10.0;
  double interval_gap_s = 2.0;
  double sample_rate_hz = 100.0;

  std::size_t length_frames() const;
  std::size_t gap_frames() const;
  /// Throws ConfigError when gap <= 0, length <= 0 or either is not a whole
  /// number of frames.
  void validate() const;
};

/// floor((R - L) / G) + 1 when R >= L, else 0.
std::size_t window_count(std::size_t range_frames, std::size_t length_frames,
                         std::size_t gap_frames);

/// Fixed-length slice of a recording; frames are read through the shared
/// recording rather than copied.
struct Window {
  std::shared_ptr<const Recording> source;
  std::size_t recording_index = 0;
  std::size_t start = 0;
  std::size_t length = 0;
  int driver = 0;
  Area area = Area::Highway;

  std::size_t channel_count() const { return source->channel_count(); }
  double at(std::size_t channel, std::size_t frame) const {
    return source->at(start + frame, channel);
  }
  /// Channel-major copy of the frames, shape C x L.
  numerics::Tensor frames() const;
};

std::vector<Window> make_windows(std::shared_ptr<const Recording> recording,
                                 std::size_t recording_index, FrameRange range,
                                 const WindowingConfig& cfg, int driver);

/// Per-channel z-score fitted on training windows.
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(std::vector<double> mean, std::vector<double> scale);

  /// Statistics over every frame of every window (overlapping frames count
  /// once per window). A zero-variance channel keeps scale 1 (centered only).
  static Normalizer fit(std::span<const Window> windows);

  Window apply(const Window& window) const;
  Recording apply(const Recording& recording) const;

  const std::vector<double>& mean() const noexcept { return mean_; }
  const std::vector<double>& scale() const noexcept { return scale_; }

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

/// Windows grouped by split over a set of recordings.
struct Dataset {
  std::vector<std::string> channels;
  std::vector<std::string> drivers;  // label i -> driver id
  std::vector<std::shared_ptr<const Recording>> recordings;
  WindowingConfig windowing;
  std::vector<Window> train;
  std::vector<Window> eval;
  std::vector<Window> test;

  std::size_t channel_count() const noexcept { return channels.size(); }
  std::size_t driver_count() const noexcept { return drivers.size(); }
  std::size_t window_length() const { return windowing.length_frames(); }
};

/// Splits every recording 8:1:1 and windows each partition. Driver labels are
/// assigned in sorted driver-id order. Throws DataError for an empty input or
/// recordings with mismatched channels.
Dataset build_dataset(std::vector<Recording> recordings, const WindowingConfig& cfg);

/// Same recordings, new window length / gap.
Dataset rewindow(const Dataset& dataset, const WindowingConfig& cfg);

/// Normalizes the underlying recordings once and rebinds all windows.
Dataset normalize(const Dataset& dataset, const Normalizer& normalizer);

/// Structured-text copy of a normalizer and the channel names it was fitted on.
void save_normalizer(const std::filesystem::path& path, const Normalizer& normalizer,
                     std::span<const std::string> channels);
/// Throws FormatError on malformed files and when `expected_channels` differs.
Normalizer load_normalizer(const std::filesystem::path& path,
                           std::span<const std::string> expected_channels);

/// Which channel groups to drop. `keep_only`, when set, wins over `removed`.
struct GroupMask {
  std::set<ChannelGroup> removed;
  std::optional<std::set<ChannelGroup>> keep_only;

  std::string label() const;
};

/// Dataset restricted to the channels that survive the mask, canonical order
/// preserved.
Dataset mask_groups(const Dataset& dataset, const GroupMask& mask);

}  // namespace driveid::data
