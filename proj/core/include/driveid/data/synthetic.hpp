#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "driveid/data/channels.hpp"
#include "driveid/data/recording.hpp"

namespace driveid::data {

/// Behavioural parameters of one simulated driver.
struct DriverProfile {
  double target_speed_factor = 0.95;  // desired speed / speed limit
  double target_speed_sd = 0.03;      // slow wander of that factor
  double headway_s = 1.8;             // preferred time gap to a lead vehicle
  double lane_bias_m = 0.0;           // mean offset from lane centre (+ = left)
  double lane_jitter_m = 0.15;        // stationary sd of lateral wander
  double accel_time_constant_s = 3.0; // speed-error time constant; small = aggressive
  double turn_signal_prob = 0.6;      // chance of signalling a turn or lane change
  double steering_smoothness_s = 2.0; // correlation time of lateral wander
  double shift_rpm = 2600.0;          // upshift engine speed
  double reaction_latency_s = 0.6;    // delay between perception and pedal action

  /// Throws ConfigError if any field is outside ProfileBounds.
  void validate() const;
};

/// Physically plausible range of every DriverProfile field.
struct ProfileBounds {
  static constexpr std::array<double, 2> target_speed_factor{0.5, 1.3};
  static constexpr std::array<double, 2> target_speed_sd{0.0, 0.2};
  static constexpr std::array<double, 2> headway_s{0.5, 4.0};
  static constexpr std::array<double, 2> lane_bias_m{-0.8, 0.8};
  static constexpr std::array<double, 2> lane_jitter_m{0.01, 0.5};
  static constexpr std::array<double, 2> accel_time_constant_s{0.5, 8.0};
  static constexpr std::array<double, 2> turn_signal_prob{0.0, 1.0};
  static constexpr std::array<double, 2> steering_smoothness_s{0.2, 6.0};
  static constexpr std::array<double, 2> shift_rpm{1500.0, 4500.0};
  static constexpr std::array<double, 2> reaction_latency_s{0.1, 1.5};
};

/// Draws `count` profiles spread around a typical driver. `separation` in
/// (0, 1] scales how far apart the drivers are.
std::vector<DriverProfile> make_profiles(std::size_t count, double separation,
                                         std::uint64_t seed);

/// Road features of one stretch of route.
struct RouteSegment {
  enum class Control { None, StopSign, TrafficSignal, YieldSign };
  enum class Turn { Straight, Left, Right };

  double length_m = 300.0;
  double speed_limit_mps = 13.9;
  int lanes = 1;
  double lane_width_m = 3.5;
  double curvature_per_m = 0.0;  // signed; + = left
  double grade = 0.0;            // rise / run
  bool intersection_at_end = false;
  Control control = Control::None;
  Turn turn = Turn::Straight;
  bool lead_vehicle = false;
  double lead_speed_factor = 0.9;  // lead speed / limit
  double signal_phase_s = 0.0;
};

/// The scripted course every driver follows in one area.
struct RouteScript {
  Area area = Area::Highway;
  std::vector<RouteSegment> segments;

  double total_length_m() const;
};

/// Deterministic route for an area, long enough for `duration_s` at any
/// admissible speed.
RouteScript make_route(Area area, double duration_s, std::uint64_t seed);

/// Default per-area durations in seconds (highway, suburban, urban, tutorial).
inline constexpr std::array<double, 4> kDefaultAreaDurations = {238.8, 251.7, 196.9, 171.9};

struct SyntheticConfig {
  std::array<double, 4> area_duration_s = kDefaultAreaDurations;
  std::uint64_t seed = 7;
  /// Sensor noise multiplier; 0 gives noise-free channels.
  double sensor_noise = 1.0;
};

/// Speed may exceed the profile's maximum desired speed by at most this much
/// (m/s): the integrator saturates at max desired speed + a_max * latency.
double max_speed_overshoot(const DriverProfile& profile);
/// Largest desired speed the profile can ask for on `route`.
double max_desired_speed(const DriverProfile& profile, const RouteScript& route);

/// Simulates one drive over `route`. Driver `index` selects the noise stream.
Recording simulate_drive(const DriverProfile& profile, std::size_t index,
                         const RouteScript& route, double duration_s, const SyntheticConfig& cfg);

/// One recording per (profile, area); every driver follows the same routes.
/// Driver ids are "driver_00", "driver_01", ...
std::vector<Recording> generate_synthetic(std::span<const DriverProfile> profiles,
                                          const SyntheticConfig& cfg);

/// Units used by the generator for each channel.
std::map<std::string, std::string> synthetic_units();

}  // namespace driveid::data
