#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace driveid::data {

inline constexpr std::size_t kChannelCount = 31;

/// Sensor groups; removal in ablations always takes whole groups.
enum class ChannelGroup {
  Acceleration,
  DistanceInformation,
  Gearbox,
  LaneInformation,
  Pedals,
  RoadAngle,
  Speed,
  TurnIndicators,
  Uncategorized,
};

inline constexpr std::array<ChannelGroup, 9> kAllGroups = {
    ChannelGroup::Acceleration,   ChannelGroup::DistanceInformation, ChannelGroup::Gearbox,
    ChannelGroup::LaneInformation, ChannelGroup::Pedals,             ChannelGroup::RoadAngle,
    ChannelGroup::Speed,          ChannelGroup::TurnIndicators,      ChannelGroup::Uncategorized,
};

enum class Area { Highway, Suburban, Urban, Tutorial };

inline constexpr std::array<Area, 4> kAllAreas = {Area::Highway, Area::Suburban, Area::Urban,
                                                  Area::Tutorial};

/// The 31 channel names in canonical order (grouped as in kAllGroups).
std::span<const std::string_view> canonical_channels();

ChannelGroup group_of(std::string_view channel);
std::vector<std::string_view> group_members(ChannelGroup group);

std::string_view to_string(ChannelGroup group);
std::string_view to_string(Area area);

/// Parses "speed", "lane information", ... Throws ConfigError.
ChannelGroup parse_group(std::string_view name);
/// Parses "highway", "suburban", "urban", "tutorial". Throws DataError.
Area parse_area(std::string_view name);

}  // namespace driveid::data
