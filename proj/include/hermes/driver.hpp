#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hermes/events.hpp"
#include "hermes/geo.hpp"
#include "hermes/road_graph.hpp"

namespace hermes::sim {

/// A path laid out as a polyline with per-segment limits, ready for driving.
struct Route {
  std::vector<geo::GeoPoint> points;
  /// Distance from the first point to points[i], in meters.
  std::vector<double> offsets;
  std::vector<double> limit_kmh;  // one per segment
  std::vector<RoadType> road_type;
  /// Speed (m/s) a vehicle may carry through points[i]; infinite on straight
  /// joints, reduced at turns and zero at the final point.
  std::vector<double> pass_speed;

  double length() const { return offsets.empty() ? 0.0 : offsets.back(); }
  /// Time to drive the route at the posted limits, in seconds.
  double nominal_time_s() const;
  std::size_t segment_at(double position) const;
  geo::GeoPoint point_at(double position) const;
};

struct DriverModel {
  double max_acceleration = 2.5;  // m/s^2, scaled by aggressiveness
  double max_deceleration = 4.0;  // m/s^2, scaled by aggressiveness
  /// Deceleration used when planning ahead for turns and slower roads.
  double planning_deceleration = 1.5;
  double turn_angle_deg = 45.0;
  double turn_speed_kmh = 20.0;
  double lookahead_m = 400.0;
  /// Per-segment variation of the target speed, as a fraction of it.
  double speed_noise = 0.05;
  /// Stop at each end of the path, as a multiple of the trip just driven,
  /// drawn uniformly. The vehicle keeps reporting its location while parked.
  double dwell_min_ratio = 1.2;
  double dwell_max_ratio = 2.5;
  /// Start each driver at a random point of its drive and park cycle rather
  /// than at the head of the path.
  bool random_phase = true;
  double heart_rate_noise = 0.5;

  EpochMs location_interval_ms = 10'000;
  double section_length_m = 500.0;

  double abnormal_acceleration = 3.5;  // m/s^2
  double abnormal_speed_factor = 1.2;  // x speed limit
  double abnormal_heart_rate = 120.0;  // bpm
};

Route build_route(const RoadGraph& graph, const PathSpec& path, const DriverModel& model = {},
                  bool reversed = false);
/// Straight-line helper used by tools and tests: consecutive points joined by
/// segments with the given limits.
Route build_route(const std::vector<geo::GeoPoint>& points, const std::vector<double>& limits_kmh,
                  const DriverModel& model = {});

struct DriverProfile {
  std::string driver_id;
  double speed_bias = 1.0;
  double aggressiveness = 1.0;
  EpochMs start_offset_ms = 0;
  std::size_t path_index = 0;
  double heart_rate_offset = 0.0;
  double initial_score = 80.0;
  std::uint64_t seed = 0;
};

/// Profiles for `drivers` drivers spread round-robin over `paths` paths.
std::vector<DriverProfile> make_profiles(std::size_t drivers, std::size_t paths, std::uint64_t seed);

struct DriverState {
  EpochMs clock = 0;
  double position = 0.0;  // meters along the current route
  double speed = 0.0;     // m/s
  double heart_rate = 70.0;
  double score = 80.0;
  bool reversed = false;
  std::uint64_t trips = 0;

  std::vector<SectionSample> samples;
  double section_distance = 0.0;
  EpochMs since_location = 0;

  std::size_t noise_segment = std::numeric_limits<std::size_t>::max();
  double segment_noise = 0.0;
  EpochMs parked_ms = 0;  // remaining stop at a path end
  EpochMs trip_started = 0;

  bool over_acceleration = false;
  bool over_deceleration = false;
  bool over_speed = false;
  bool over_heart_rate = false;

  /// When set, the next step holds this speed (m/s) instead of the model.
  std::optional<double> forced_speed;

  std::mt19937_64 rng;
};

DriverState start_driver(const DriverProfile& profile, const Route& route, EpochMs start,
                         const DriverModel& model = {});

/// The two directions of one path; drivers turn around at each end.
struct RoutePair {
  Route forward;
  Route backward;
  const Route& for_state(const DriverState& s) const { return s.reversed ? backward : forward; }
};

/// Advances the driver by dt milliseconds and returns the events produced.
std::vector<EventEnvelope> step_driver(DriverState& state, const DriverProfile& profile, const RoutePair& routes,
                                       EpochMs dt, const DriverModel& model = {});

}  // namespace hermes::sim
