#include "driveid/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <string>

#include "driveid/error.hpp"
#include "driveid/numerics/random.hpp"

namespace driveid::data {

using numerics::derive_seed;
using numerics::Rng;

namespace {

constexpr double kDt = 0.01;
constexpr double kDistanceCap = 500.0;
constexpr double kGapCap = 250.0;
constexpr double kCarLength = 4.5;
constexpr double kHalfCarWidth = 0.9;
constexpr double kWheelbase = 2.7;
constexpr double kSteeringRatio = 15.0;
constexpr double kMaxBrake = 7.0;
constexpr double kTurnArc = 20.0;  // metres over which a 90 degree turn is driven
constexpr std::array<double, 6> kRpmPerMps = {420.0, 250.0, 170.0, 128.0, 102.0, 85.0};

void check_range(const char* name, double value, const std::array<double, 2>& range) {
  if (!(value >= range[0] && value <= range[1])) {
    throw ConfigError(std::string("driver profile field ") + name + " = " +
                      std::to_string(value) + " outside [" + std::to_string(range[0]) + ", " +
                      std::to_string(range[1]) + "]");
  }
}

double max_acceleration(const DriverProfile& p) {
  return std::clamp(1.0 + 6.0 / p.accel_time_constant_s, 1.0, 4.5);
}

double lateral_comfort(const DriverProfile& p) {
  return std::clamp(1.5 + 3.0 / p.accel_time_constant_s, 1.5, 4.0);
}

double comfort_brake(const DriverProfile& p) {
  return std::clamp(1.5 + 4.0 / p.accel_time_constant_s, 1.5, 4.5);
}

double wrap_degrees(double radians) {
  double deg = std::fmod(radians * 180.0 / std::numbers::pi, 360.0);
  if (deg > 180.0) deg -= 360.0;
  if (deg <= -180.0) deg += 360.0;
  return deg;
}

struct AreaStyle {
  std::array<double, 3> limits_kmh;
  double min_length, max_length;
  int min_lanes, max_lanes;
  double lane_width;
  double curve_prob, min_radius, max_radius;
  double intersection_prob;
  std::array<double, 4> control_weights;  // none, stop, signal, yield
  double lead_prob;
};

AreaStyle style_for(Area area) {
  switch (area) {
    case Area::Highway:
      return {{100, 110, 120}, 500, 1200, 3, 4, 3.75, 0.6, 800, 3000, 0.0, {1, 0, 0, 0}, 0.6};
    case Area::Suburban:
      return {{50, 60, 70}, 200, 500, 2, 2, 3.5, 0.5, 150, 800, 0.7, {0.2, 0.4, 0.2, 0.2}, 0.4};
    case Area::Urban:
      return {{30, 40, 50}, 100, 250, 1, 3, 3.25, 0.2, 100, 400, 0.9, {0.1, 0.3, 0.5, 0.1}, 0.5};
    case Area::Tutorial:
      return {{30, 50, 60}, 150, 400, 1, 2, 3.5, 0.5, 100, 500, 0.5, {0.3, 0.4, 0.2, 0.1}, 0.3};
  }
  throw ContractError("unknown area");
}

RouteSegment::Control pick_control(Rng& rng, const std::array<double, 4>& weights) {
  const double total = weights[0] + weights[1] + weights[2] + weights[3];
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < 4; ++i) {
    if (u < weights[i]) return static_cast<RouteSegment::Control>(i);
    u -= weights[i];
  }
  return RouteSegment::Control::None;
}

/// Precomputed lookups over a route.
class RouteIndex {
 public:
  explicit RouteIndex(const RouteScript& route) : route_(route) {
    double s = 0.0;
    for (const auto& seg : route.segments) {
      starts_.push_back(s);
      s += seg.length_m;
    }
    total_ = s;
  }

  std::size_t segment_at(double s, std::size_t hint) const {
    std::size_t i = hint;
    while (i + 1 < starts_.size() && s >= starts_[i + 1]) ++i;
    return i;
  }

  double start(std::size_t i) const { return starts_[i]; }
  double end(std::size_t i) const { return starts_[i] + route_.segments[i].length_m; }
  double total() const { return total_; }
  const RouteSegment& segment(std::size_t i) const { return route_.segments[i]; }
  std::size_t size() const { return starts_.size(); }

  /// Signed curvature at distance s, including the turn arc that follows a
  /// turning intersection.
  double curvature(double s, std::size_t hint) const {
    const std::size_t i = segment_at(s, hint);
    double k = route_.segments[i].curvature_per_m;
    if (i > 0) {
      const RouteSegment& prev = route_.segments[i - 1];
      if (prev.intersection_at_end && prev.turn != RouteSegment::Turn::Straight &&
          s - starts_[i] < kTurnArc) {
        const double turn = (std::numbers::pi / 2.0) / kTurnArc;
        k += prev.turn == RouteSegment::Turn::Left ? turn : -turn;
      }
    }
    return k;
  }

  /// Distance from s to the next segment end with the requested property.
  template <typename Pred>
  double distance_to(double s, std::size_t hint, Pred pred) const {
    for (std::size_t i = segment_at(s, hint); i < starts_.size(); ++i) {
      const double d = end(i) - s;
      if (d > kDistanceCap) break;
      if (pred(route_.segments[i])) return d;
    }
    return kDistanceCap;
  }

 private:
  const RouteScript& route_;
  std::vector<double> starts_;
  double total_ = 0.0;
};

bool signal_is_green(const RouteSegment& seg, double t) {
  const double phase = std::fmod(t + seg.signal_phase_s, 40.0);
  return phase < 20.0;
}

}  // namespace

void DriverProfile::validate() const {
  check_range("target_speed_factor", target_speed_factor, ProfileBounds::target_speed_factor);
  check_range("target_speed_sd", target_speed_sd, ProfileBounds::target_speed_sd);
  check_range("headway_s", headway_s, ProfileBounds::headway_s);
  check_range("lane_bias_m", lane_bias_m, ProfileBounds::lane_bias_m);
  check_range("lane_jitter_m", lane_jitter_m, ProfileBounds::lane_jitter_m);
  check_range("accel_time_constant_s", accel_time_constant_s,
              ProfileBounds::accel_time_constant_s);
  check_range("turn_signal_prob", turn_signal_prob, ProfileBounds::turn_signal_prob);
  check_range("steering_smoothness_s", steering_smoothness_s,
              ProfileBounds::steering_smoothness_s);
  check_range("shift_rpm", shift_rpm, ProfileBounds::shift_rpm);
  check_range("reaction_latency_s", reaction_latency_s, ProfileBounds::reaction_latency_s);
}

std::vector<DriverProfile> make_profiles(std::size_t count, double separation,
                                         std::uint64_t seed) {
  if (!(separation > 0.0 && separation <= 1.0)) {
    throw ConfigError("profile separation must lie in (0, 1]");
  }
  Rng rng(derive_seed(seed, 0x9f0f11e5));
  auto draw = [&](double centre, double half_range) {
    return centre + separation * half_range * rng.uniform(-1.0, 1.0);
  };
  std::vector<DriverProfile> profiles;
  profiles.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    DriverProfile p;
    p.target_speed_factor = draw(0.95, 0.15);
    p.target_speed_sd = draw(0.03, 0.02);
    p.headway_s = draw(1.8, 0.8);
    p.lane_bias_m = draw(0.0, 0.4);
    p.lane_jitter_m = draw(0.15, 0.1);
    p.accel_time_constant_s = draw(3.0, 2.0);
    p.turn_signal_prob = draw(0.6, 0.4);
    p.steering_smoothness_s = draw(2.0, 1.5);
    p.shift_rpm = draw(2600.0, 800.0);
    p.reaction_latency_s = draw(0.6, 0.3);
    p.validate();
    profiles.push_back(p);
  }
  return profiles;
}

double RouteScript::total_length_m() const {
  double total = 0.0;
  for (const auto& s : segments) total += s.length_m;
  return total;
}

RouteScript make_route(Area area, double duration_s, std::uint64_t seed) {
  const AreaStyle style = style_for(area);
  Rng rng(derive_seed(seed, 0x4f7e + static_cast<std::uint64_t>(area)));
  RouteScript route;
  route.area = area;
  const double needed = duration_s * 45.0 + 1000.0;
  double length = 0.0;
  while (length < needed) {
    RouteSegment seg;
    seg.length_m = rng.uniform(style.min_length, style.max_length);
    seg.speed_limit_mps = style.limits_kmh[rng.uniform_index(3)] / 3.6;
    seg.lanes = style.min_lanes +
                static_cast<int>(rng.uniform_index(
                    static_cast<std::uint64_t>(style.max_lanes - style.min_lanes + 1)));
    seg.lane_width_m = style.lane_width;
    if (rng.bernoulli(style.curve_prob)) {
      const double radius = rng.uniform(style.min_radius, style.max_radius);
      seg.curvature_per_m = (rng.bernoulli(0.5) ? 1.0 : -1.0) / radius;
    }
    seg.grade = rng.uniform(-0.04, 0.04);
    seg.intersection_at_end = rng.bernoulli(style.intersection_prob);
    if (seg.intersection_at_end) {
      seg.control = pick_control(rng, style.control_weights);
      const double u = rng.uniform();
      seg.turn = u < 0.5 ? RouteSegment::Turn::Straight
                         : (u < 0.75 ? RouteSegment::Turn::Left : RouteSegment::Turn::Right);
    }
    seg.lead_vehicle = rng.bernoulli(style.lead_prob);
    seg.lead_speed_factor = rng.uniform(0.75, 0.95);
    seg.signal_phase_s = rng.uniform(0.0, 40.0);
    length += seg.length_m;
    route.segments.push_back(seg);
  }
  return route;
}

double max_speed_overshoot(const DriverProfile& profile) {
  return max_acceleration(profile) * profile.reaction_latency_s;
}

double max_desired_speed(const DriverProfile& profile, const RouteScript& route) {
  double top = 0.0;
  for (const auto& seg : route.segments) top = std::max(top, seg.speed_limit_mps);
  return top * (profile.target_speed_factor + 3.0 * profile.target_speed_sd);
}

Recording simulate_drive(const DriverProfile& p, std::size_t index, const RouteScript& route,
                         double duration_s, const SyntheticConfig& cfg) {
  p.validate();
  if (!(duration_s > 0.0)) throw ConfigError("drive duration must be positive");
  if (route.segments.empty()) throw ConfigError("route has no segments");

  const RouteIndex idx(route);
  Rng rng(derive_seed(cfg.seed, index * 16 + static_cast<std::uint64_t>(route.area) + 1));
  const double noise = cfg.sensor_noise;

  const auto frames = static_cast<std::size_t>(std::llround(duration_s / kDt));
  const auto latency_steps =
      static_cast<std::size_t>(std::llround(p.reaction_latency_s / kDt));
  const double a_max = max_acceleration(p);
  const double a_lat = lateral_comfort(p);
  const double b_comfort = comfort_brake(p);
  const double v_cap = max_desired_speed(p, route) + max_speed_overshoot(p);
  const double tau_brake = std::max(0.5, 0.4 * p.accel_time_constant_s);

  Recording rec;
  rec.driver = "driver_" + std::string(index < 10 ? "0" : "") + std::to_string(index);
  rec.area = route.area;
  const auto names = canonical_channels();
  rec.channels.assign(names.begin(), names.end());
  rec.frames = frames;
  rec.values.reserve(frames * kChannelCount);

  // Vehicle state.
  double s = 0.0, v = 0.0;
  std::size_t seg_i = 0;
  double wander = 0.0;                 // target-speed wander
  double lat_noise = 0.0;              // lateral OU component
  double lat_track = p.lane_bias_m;    // deterministic lateral tracking
  int lane = 0, lane_target = 0;
  int gear = 1;
  double shift_timer = 0.0;
  double heading_road = 0.0;
  double horn_timer = 0.0;
  std::deque<double> desired_history(latency_steps + 1, 0.0);

  // Per-segment decisions.
  std::size_t decided_for = static_cast<std::size_t>(-1);
  bool signal_turn = false;
  bool signal_lane_change = false;
  double lane_change_start = -1.0;
  bool stop_done = false;
  double stop_dwell = 0.0;
  bool lead_active = false;
  double lead_s = 0.0, lead_v = 0.0, lead_phase = 0.0;

  for (std::size_t step = 0; step < frames; ++step) {
    const double t = static_cast<double>(step) * kDt;
    seg_i = idx.segment_at(s, seg_i);
    const RouteSegment& seg = idx.segment(seg_i);
    const double to_end = idx.end(seg_i) - s;

    if (decided_for != seg_i) {
      decided_for = seg_i;
      signal_turn = seg.intersection_at_end && seg.turn != RouteSegment::Turn::Straight &&
                    rng.bernoulli(p.turn_signal_prob);
      stop_done = false;
      stop_dwell = 0.0;
      lane = std::min(lane, seg.lanes - 1);
      lane_target = lane;
      lane_change_start = -1.0;
      if (seg.lanes > 1 && rng.bernoulli(0.2 + 0.3 / p.accel_time_constant_s)) {
        lane_target = lane + 1 < seg.lanes ? lane + 1 : lane - 1;
        lane_change_start = t + 3.0;
        signal_lane_change = rng.bernoulli(p.turn_signal_prob);
      } else {
        signal_lane_change = false;
      }
      if (seg.lead_vehicle) {
        lead_active = true;
        lead_s = s + 50.0;
        lead_v = seg.lead_speed_factor * seg.speed_limit_mps;
        lead_phase = seg.signal_phase_s;
      } else {
        lead_active = false;
      }
    }

    // Lead vehicle leaves at the end of its segment.
    if (lead_active) {
      lead_v = seg.lead_speed_factor * seg.speed_limit_mps *
               (1.0 + 0.1 * std::sin(2.0 * std::numbers::pi * (t + lead_phase) / 20.0));
      lead_s += lead_v * kDt;
      if (lead_s > idx.end(seg_i)) lead_active = false;
    }

    // Desired speed.
    wander += -wander * kDt / 10.0 + p.target_speed_sd * std::sqrt(2.0 * kDt / 10.0) * rng.normal();
    wander = std::clamp(wander, -3.0 * p.target_speed_sd, 3.0 * p.target_speed_sd);
    double v_des = seg.speed_limit_mps * (p.target_speed_factor + wander);

    const double k_now = idx.curvature(s, seg_i);
    const double k_ahead = idx.curvature(std::min(s + 3.0 * v + 5.0, idx.total() - 1.0), seg_i);
    const double k_max = std::max(std::abs(k_now), std::abs(k_ahead));
    if (k_max > 1e-6) v_des = std::min(v_des, std::sqrt(a_lat / k_max));

    bool must_stop = false;
    if (seg.intersection_at_end && !stop_done) {
      if (seg.control == RouteSegment::Control::StopSign) must_stop = true;
      if (seg.control == RouteSegment::Control::TrafficSignal) {
        const double braking_needed = v * v / (2.0 * kMaxBrake);
        must_stop = !signal_is_green(seg, t) && to_end > braking_needed;
        if (!must_stop && signal_is_green(seg, t) && to_end < 2.0) stop_done = true;
      }
      if (seg.control == RouteSegment::Control::YieldSign && to_end < 30.0) {
        v_des = std::min(v_des, 0.5 * seg.speed_limit_mps);
      }
    }
    if (must_stop) {
      v_des = std::min(v_des, std::sqrt(2.0 * b_comfort * std::max(to_end - 1.5, 0.0)));
      if (to_end < 3.0 && v < 0.2) {
        stop_dwell += kDt;
        if (seg.control == RouteSegment::Control::StopSign &&
            stop_dwell > 1.0 + p.reaction_latency_s) {
          stop_done = true;
        }
      }
    }

    double gap = kGapCap;
    if (lead_active) {
      gap = std::max(lead_s - s - kCarLength, 0.0);
      const double wanted = 3.0 + p.headway_s * v;
      v_des = std::min(v_des, std::max(0.0, lead_v + (gap - wanted) / (1.5 * p.headway_s)));
    }
    v_des = std::max(v_des, 0.0);

    desired_history.push_back(v_des);
    desired_history.pop_front();
    const double v_seen = desired_history.front();

    double a_cmd = v_seen >= v ? (v_seen - v) / p.accel_time_constant_s : (v_seen - v) / tau_brake;
    a_cmd = std::clamp(a_cmd, -kMaxBrake, a_max);
    if (lead_active && gap < 1.0) a_cmd = std::min(a_cmd, (lead_v - v) / kDt);

    const double v_prev = v;
    v = std::clamp(v + a_cmd * kDt, 0.0, v_cap);
    const double a_long = (v - v_prev) / kDt;
    s += v * kDt;

    // Lateral motion.
    const double tau_lat = p.steering_smoothness_s;
    lat_noise += -lat_noise * kDt / tau_lat +
                 p.lane_jitter_m * std::sqrt(2.0 * kDt / tau_lat) * rng.normal();
    double lateral_ref = p.lane_bias_m;
    if (lane_change_start >= 0.0 && t >= lane_change_start && lane != lane_target) {
      lateral_ref += (lane_target - lane) * seg.lane_width_m;
    }
    const double track_prev = lat_track;
    lat_track += (lateral_ref - lat_track) * kDt / 1.5;
    if (lat_track > seg.lane_width_m / 2.0 && lane + 1 < seg.lanes) {
      ++lane;
      lat_track -= seg.lane_width_m;
    } else if (lat_track < -seg.lane_width_m / 2.0 && lane > 0) {
      --lane;
      lat_track += seg.lane_width_m;
    }
    const double lat_rate = std::clamp((lat_track - track_prev) / kDt, -3.0, 3.0);
    const double y = lat_track + lat_noise;

    heading_road += k_now * v * kDt;
    const double heading = heading_road + std::atan2(lat_rate, std::max(v, 0.5));

    // Gearbox.
    double clutch = 0.0;
    if (shift_timer > 0.0) {
      clutch = shift_timer > 0.2 ? 1.0 : shift_timer / 0.2;
      shift_timer -= kDt;
    } else {
      const double rpm = 800.0 + v * kRpmPerMps[static_cast<std::size_t>(gear - 1)];
      if (rpm > p.shift_rpm && gear < 6) {
        ++gear;
        shift_timer = 0.5;
      } else if (gear > 1 && rpm < 1300.0) {
        --gear;
        shift_timer = 0.5;
      }
    }
    if (v < 0.1) {
      clutch = 1.0;
      gear = 1;
    }

    // Indicators and horn.
    const double d_intersection =
        idx.distance_to(s, seg_i, [](const RouteSegment& r) { return r.intersection_at_end; });
    const bool turn_light = signal_turn && to_end < 60.0;
    const bool lane_light = signal_lane_change && lane_change_start >= 0.0 &&
                            t >= lane_change_start - 3.0 && t < lane_change_start + 2.0;
    const double indicator = (turn_light || lane_light) ? 1.0 : 0.0;
    const double indicator_at_intersection = (turn_light && d_intersection < 25.0) ? 1.0 : 0.0;
    if (horn_timer > 0.0) {
      horn_timer -= kDt;
    } else if (lead_active && gap < 0.7 * (3.0 + p.headway_s * v) &&
               rng.bernoulli(kDt * 0.05 * 3.0 / p.accel_time_constant_s)) {
      horn_timer = 0.4;
    }
    const double horn = horn_timer > 0.0 ? 1.0 : 0.0;

    const double accel_pedal = a_cmd > 0.0 ? std::clamp(a_cmd / a_max, 0.0, 1.0) : 0.0;
    const double brake_pedal = a_cmd < 0.0 ? std::clamp(-a_cmd / kMaxBrake, 0.0, 1.0) : 0.0;
    const double steering =
        kSteeringRatio *
        (kWheelbase * k_now + 2.0 * lat_rate / std::max(v, 3.0) -
         0.5 * lat_noise / (tau_lat * std::max(v, 3.0))) *
        180.0 / std::numbers::pi;

    auto n = [&](double sd) { return noise > 0.0 ? noise * sd * rng.normal() : 0.0; };
    const double row[kChannelCount] = {
        a_long + n(0.05),                                         // Acceleration (x)
        v * v * k_now + n(0.05),                                  // Acceleration (y)
        9.81 + n(0.05),                                           // Acceleration (z)
        lead_active ? gap : kGapCap,                              // Distance to next vehicle
        d_intersection,                                           // ... next intersection
        idx.distance_to(s, seg_i,
                        [](const RouteSegment& r) {
                          return r.intersection_at_end &&
                                 r.control == RouteSegment::Control::StopSign;
                        }),
        idx.distance_to(s, seg_i,
                        [](const RouteSegment& r) {
                          return r.intersection_at_end &&
                                 r.control == RouteSegment::Control::TrafficSignal;
                        }),
        idx.distance_to(s, seg_i,
                        [](const RouteSegment& r) {
                          return r.intersection_at_end &&
                                 r.control == RouteSegment::Control::YieldSign;
                        }),
        std::max(idx.total() - s, 0.0),                           // Distance to completion
        static_cast<double>(gear),                                // Gear
        clutch,                                                   // Clutch pedal
        static_cast<double>(seg.lanes),                           // Number of lanes present
        lane == seg.lanes - 1 && seg.lanes > 1 ? 1.0 : 0.0,       // Fast lane
        seg.lane_width_m / 2.0 + y - kHalfCarWidth + n(0.01),     // Location in lane (right)
        y + n(0.01),                                              // Location in lane (center)
        seg.lane_width_m / 2.0 - y - kHalfCarWidth + n(0.01),     // Location in lane (left)
        seg.lane_width_m,                                         // Lane width
        accel_pedal,                                              // Acceleration pedal
        brake_pedal,                                              // Brake pedal
        steering + n(0.2),                                        // Steering wheel angle
        std::abs(k_now) > 1.0 / 5000.0 ? 1.0 / std::abs(k_now) : 5000.0,  // Curve radius
        wrap_degrees(heading_road),                               // Road angle
        v * std::cos(heading) + n(0.02),                          // Speed (x)
        v * std::sin(heading) + n(0.02),                          // Speed (y)
        v * seg.grade + n(0.01),                                  // Speed (z)
        lead_active ? lead_v : 0.0,                               // Speed (next vehicle)
        seg.speed_limit_mps,                                      // Speed limit
        indicator,                                                // Turn indicators
        indicator_at_intersection,                                // ... on intersection
        horn,                                                     // Horn
        wrap_degrees(heading),                                    // Vehicle heading
    };
    rec.values.insert(rec.values.end(), std::begin(row), std::end(row));
  }
  return rec;
}

std::vector<Recording> generate_synthetic(std::span<const DriverProfile> profiles,
                                          const SyntheticConfig& cfg) {
  std::vector<Recording> out;
  for (std::size_t a = 0; a < kAllAreas.size(); ++a) {
    if (!(cfg.area_duration_s[a] > 0.0)) {
      throw ConfigError("area duration must be positive for " +
                        std::string(to_string(kAllAreas[a])));
    }
  }
  std::vector<RouteScript> routes;
  for (std::size_t a = 0; a < kAllAreas.size(); ++a) {
    routes.push_back(make_route(kAllAreas[a], cfg.area_duration_s[a], cfg.seed));
  }
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    for (std::size_t a = 0; a < kAllAreas.size(); ++a) {
      out.push_back(simulate_drive(profiles[i], i, routes[a], cfg.area_duration_s[a], cfg));
    }
  }
  return out;
}

std::map<std::string, std::string> synthetic_units() {
  std::map<std::string, std::string> units;
  for (std::string_view name : canonical_channels()) {
    std::string unit = "1";
    const std::string n(name);
    if (n.starts_with("Acceleration (")) unit = "m/s^2";
    if (n.starts_with("Distance")) unit = "m";
    if (n.starts_with("Speed")) unit = "m/s";
    if (n.starts_with("Location in lane") || n == "Lane width" || n == "Curve radius") unit = "m";
    if (n == "Steering wheel angle" || n == "Road angle" || n == "Vehicle heading") unit = "deg";
    if (n == "Gear" || n == "Number of lanes present") unit = "count";
    if (n == "Acceleration pedal" || n == "Brake pedal" || n == "Clutch pedal") {
      unit = "fraction";
    }
    if (n == "Fast lane" || n.starts_with("Turn indicators") || n == "Horn") unit = "binary";
    units.emplace(n, unit);
  }
  return units;
}

}  // namespace driveid::data
