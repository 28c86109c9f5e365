#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "driveid/data/channels.hpp"

namespace driveid::data {

/// One continuous drive of one driver in one road area.
///
/// Frames are stored time-major: values[t * channel_count() + c].
struct Recording {
  std::string driver;
  Area area = Area::Highway;
  std::vector<std::string> channels;
  std::size_t frames = 0;
  std::vector<double> values;

  std::size_t channel_count() const noexcept { return channels.size(); }
  double at(std::size_t frame, std::size_t channel) const {
    return values[frame * channels.size() + channel];
  }
};

/// One row of a dataset manifest.
struct ManifestEntry {
  std::string driver;
  Area area = Area::Highway;
  std::filesystem::path file;  // relative paths resolve against the manifest directory
};

/// Dataset manifest: which files make up a dataset and what their columns mean.
struct DatasetManifest {
  double sample_rate_hz = 100.0;
  std::vector<ManifestEntry> entries;
  std::map<std::string, std::string> units;  // channel name -> unit
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Reads one delimited-text recording. Columns are reordered to the canonical
/// channel order; unknown columns are dropped and reported through `warnings`
/// (or std::clog when null).
Recording read_recording_csv(const std::filesystem::path& path, const std::string& driver,
                             Area area, std::vector<std::string>* warnings = nullptr);

void write_recording_csv(const std::filesystem::path& path, const Recording& recording);

/// Loads every recording listed in a manifest file.
std::vector<Recording> load_recordings(const std::filesystem::path& manifest_path,
                                       std::vector<std::string>* warnings = nullptr);

}  // namespace driveid::data
