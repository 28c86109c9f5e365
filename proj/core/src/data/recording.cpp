#include "driveid/data/recording.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include "json.hpp"
#include <sstream>

#include "driveid/error.hpp"

namespace driveid::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string_view> split_line(std::string_view line, char delim) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_cell(std::string_view cell, const fs::path& path, std::size_t line,
                  std::size_t column) {
  cell = trim(cell);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": non-numeric cell '" +
                    std::string(cell) + "' in column " + std::to_string(column + 1));
  }
  return value;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  DatasetManifest manifest;
  try {
    manifest.sample_rate_hz = doc.value("sample_rate_hz", 100.0);
    if (doc.contains("units")) {
      manifest.units = doc.at("units").get<std::map<std::string, std::string>>();
    }
    const fs::path base = path.parent_path();
    for (const auto& item : doc.at("recordings")) {
      ManifestEntry entry;
      entry.driver = item.at("driver").get<std::string>();
      entry.area = parse_area(item.at("area").get<std::string>());
      entry.file = item.at("file").get<std::string>();
      if (entry.file.is_relative()) entry.file = base / entry.file;
      manifest.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
  if (manifest.sample_rate_hz != 100.0) {
    throw DataError("manifest " + path.string() + ": sample rate must be 100 Hz");
  }
  return manifest;
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  json doc;
  doc["sample_rate_hz"] = manifest.sample_rate_hz;
  doc["units"] = manifest.units;
  doc["recordings"] = json::array();
  for (const auto& e : manifest.entries) {
    doc["recordings"].push_back(
        {{"driver", e.driver}, {"area", std::string(to_string(e.area))}, {"file", e.file.string()}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << doc.dump(2) << '\n';
}

Recording read_recording_csv(const fs::path& path, const std::string& driver, Area area,
                             std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open recording " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing header row");
  const auto header = split_line(line, ',');

  const auto canonical = canonical_channels();
  std::vector<std::size_t> source_column(canonical.size(), header.size());
  for (std::size_t col = 0; col < header.size(); ++col) {
    const std::string_view name = trim(header[col]);
    const auto it = std::find(canonical.begin(), canonical.end(), name);
    if (it == canonical.end()) {
      const std::string msg =
          path.string() + ": ignoring extra column '" + std::string(name) + "'";
      if (warnings != nullptr) {
        warnings->push_back(msg);
      } else {
        std::clog << "warning: " << msg << '\n';
      }
      continue;
    }
    source_column[static_cast<std::size_t>(it - canonical.begin())] = col;
  }
  for (std::size_t c = 0; c < canonical.size(); ++c) {
    if (source_column[c] == header.size()) {
      throw DataError(path.string() + ": missing required channel '" +
                      std::string(canonical[c]) + "'");
    }
  }

  Recording rec;
  rec.driver = driver;
  rec.area = area;
  rec.channels.assign(canonical.begin(), canonical.end());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line, ',');
    if (cells.size() != header.size()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " cells, got " +
                      std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < canonical.size(); ++c) {
      rec.values.push_back(parse_cell(cells[source_column[c]], path, line_no, source_column[c]));
    }
    ++rec.frames;
  }
  return rec;
}

void write_recording_csv(const fs::path& path, const Recording& recording) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write recording " + path.string());
  for (std::size_t c = 0; c < recording.channel_count(); ++c) {
    if (c != 0) out << ',';
    out << recording.channels[c];
  }
  out << '\n';
  std::string row;
  for (std::size_t t = 0; t < recording.frames; ++t) {
    row.clear();
    for (std::size_t c = 0; c < recording.channel_count(); ++c) {
      if (c != 0) row += ',';
      row += format_double(recording.at(t, c));
    }
    row += '\n';
    out << row;
  }
}

std::vector<Recording> load_recordings(const fs::path& manifest_path,
                                       std::vector<std::string>* warnings) {
  const DatasetManifest manifest = read_manifest(manifest_path);
  std::vector<Recording> recordings;
  recordings.reserve(manifest.entries.size());
  for (const auto& entry : manifest.entries) {
    recordings.push_back(read_recording_csv(entry.file, entry.driver, entry.area, warnings));
  }
  return recordings;
}

}  // namespace driveid::data
