#include "driveid/data/channels.hpp"

#include <algorithm>
#include <utility>

#include "driveid/error.hpp"

namespace driveid::data {

namespace {

struct ChannelSpec {
  std::string_view name;
  ChannelGroup group;
};

constexpr std::array<ChannelSpec, kChannelCount> kSchema = {{
    {"Acceleration (x)", ChannelGroup::Acceleration},
    {"Acceleration (y)", ChannelGroup::Acceleration},
    {"Acceleration (z)", ChannelGroup::Acceleration},
    {"Distance to next vehicle", ChannelGroup::DistanceInformation},
    {"Distance to next intersection", ChannelGroup::DistanceInformation},
    {"Distance to next stop sign", ChannelGroup::DistanceInformation},
    {"Distance to next traffic signal", ChannelGroup::DistanceInformation},
    {"Distance to next yield sign", ChannelGroup::DistanceInformation},
    {"Distance to completion", ChannelGroup::DistanceInformation},
    {"Gear", ChannelGroup::Gearbox},
    {"Clutch pedal", ChannelGroup::Gearbox},
    {"Number of lanes present", ChannelGroup::LaneInformation},
    {"Fast lane", ChannelGroup::LaneInformation},
    {"Location in lane (right)", ChannelGroup::LaneInformation},
    {"Location in lane (center)", ChannelGroup::LaneInformation},
    {"Location in lane (left)", ChannelGroup::LaneInformation},
    {"Lane width", ChannelGroup::LaneInformation},
    {"Acceleration pedal", ChannelGroup::Pedals},
    {"Brake pedal", ChannelGroup::Pedals},
    {"Steering wheel angle", ChannelGroup::RoadAngle},
    {"Curve radius", ChannelGroup::RoadAngle},
    {"Road angle", ChannelGroup::RoadAngle},
    {"Speed (x)", ChannelGroup::Speed},
    {"Speed (y)", ChannelGroup::Speed},
    {"Speed (z)", ChannelGroup::Speed},
    {"Speed (next vehicle)", ChannelGroup::Speed},
    {"Speed limit", ChannelGroup::Speed},
    {"Turn indicators", ChannelGroup::TurnIndicators},
    {"Turn indicators on intersection", ChannelGroup::TurnIndicators},
    {"Horn", ChannelGroup::Uncategorized},
    {"Vehicle heading", ChannelGroup::Uncategorized},
}};

constexpr auto kNames = [] {
  std::array<std::string_view, kChannelCount> names{};
  for (std::size_t i = 0; i < kChannelCount; ++i) names[i] = kSchema[i].name;
  return names;
}();

constexpr std::array<std::pair<ChannelGroup, std::string_view>, 9> kGroupNames = {{
    {ChannelGroup::Acceleration, "acceleration"},
    {ChannelGroup::DistanceInformation, "distance information"},
    {ChannelGroup::Gearbox, "gearbox"},
    {ChannelGroup::LaneInformation, "lane information"},
    {ChannelGroup::Pedals, "pedals"},
    {ChannelGroup::RoadAngle, "road angle"},
    {ChannelGroup::Speed, "speed"},
    {ChannelGroup::TurnIndicators, "turn indicators"},
    {ChannelGroup::Uncategorized, "uncategorized"},
}};

constexpr std::array<std::pair<Area, std::string_view>, 4> kAreaNames = {{
    {Area::Highway, "highway"},
    {Area::Suburban, "suburban"},
    {Area::Urban, "urban"},
    {Area::Tutorial, "tutorial"},
}};

}  // namespace

std::span<const std::string_view> canonical_channels() { return kNames; }

ChannelGroup group_of(std::string_view channel) {
  for (const auto& spec : kSchema) {
    if (spec.name == channel) return spec.group;
  }
  throw DataError("unknown channel '" + std::string(channel) + "'");
}

std::vector<std::string_view> group_members(ChannelGroup group) {
  std::vector<std::string_view> members;
  for (const auto& spec : kSchema) {
    if (spec.group == group) members.push_back(spec.name);
  }
  return members;
}

std::string_view to_string(ChannelGroup group) {
  for (const auto& [g, name] : kGroupNames) {
    if (g == group) return name;
  }
  return "unknown";
}

std::string_view to_string(Area area) {
  for (const auto& [a, name] : kAreaNames) {
    if (a == area) return name;
  }
  return "unknown";
}

ChannelGroup parse_group(std::string_view name) {
  for (const auto& [g, n] : kGroupNames) {
    if (n == name) return g;
  }
  throw ConfigError("unknown channel group '" + std::string(name) + "'");
}

Area parse_area(std::string_view name) {
  for (const auto& [a, n] : kAreaNames) {
    if (n == name) return a;
  }
  throw DataError("unknown area tag '" + std::string(name) + "'");
}

}  // namespace driveid::data
