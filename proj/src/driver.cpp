#include "hermes/driver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace hermes::sim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double heading_change(const geo::GeoPoint& a, const geo::GeoPoint& b, const geo::GeoPoint& c) {
  try {
    double d = std::fabs(geo::bearing(b, c) - geo::bearing(a, b));
    return d > 180.0 ? 360.0 - d : d;
  } catch (const geo::GeoError&) {
    return 0.0;
  }
}

Route layout(std::vector<geo::GeoPoint> points, std::vector<double> limits, std::vector<RoadType> types,
             const DriverModel& model) {
  if (points.size() < 2 || limits.size() + 1 != points.size()) {
    throw std::invalid_argument("route needs at least one segment and one limit per segment");
  }
  Route r;
  r.points = std::move(points);
  r.limit_kmh = std::move(limits);
  r.road_type = std::move(types);
  r.offsets.assign(r.points.size(), 0.0);
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    r.offsets[i] = r.offsets[i - 1] + geo::haversine_distance(r.points[i - 1], r.points[i]);
  }
  r.pass_speed.assign(r.points.size(), kInf);
  for (std::size_t i = 1; i + 1 < r.points.size(); ++i) {
    if (heading_change(r.points[i - 1], r.points[i], r.points[i + 1]) > model.turn_angle_deg) {
      r.pass_speed[i] = model.turn_speed_kmh / 3.6;
    }
  }
  r.pass_speed.back() = 0.0;
  return r;
}

}  // namespace

std::size_t Route::segment_at(double position) const {
  auto it = std::upper_bound(offsets.begin(), offsets.end(), position);
  std::size_t idx = it == offsets.begin() ? 0 : static_cast<std::size_t>(it - offsets.begin()) - 1;
  return std::min(idx, limit_kmh.size() - 1);
}

double Route::nominal_time_s() const {
  double t = 0.0;
  for (std::size_t i = 0; i < limit_kmh.size(); ++i) t += (offsets[i + 1] - offsets[i]) / (limit_kmh[i] / 3.6);
  return t;
}

geo::GeoPoint Route::point_at(double position) const {
  const std::size_t s = segment_at(position);
  const double span = offsets[s + 1] - offsets[s];
  if (span <= 0.0) return points[s];
  // Follows the great circle between the two points.
  const double along = std::clamp(position - offsets[s], 0.0, span);
  if (along >= span) return points[s + 1];
  return geo::destination(points[s], geo::bearing(points[s], points[s + 1]), along);
}

Route build_route(const RoadGraph& graph, const PathSpec& path, const DriverModel& model, bool reversed) {
  std::vector<std::size_t> nodes = path.nodes;
  if (reversed) std::reverse(nodes.begin(), nodes.end());
  std::vector<geo::GeoPoint> points;
  std::vector<double> limits;
  std::vector<RoadType> types;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    points.push_back(graph.point(nodes[i]));
    if (i == 0) continue;
    auto e = graph.edge_between(nodes[i - 1], nodes[i]);
    if (!e) throw std::invalid_argument("path uses a missing edge");
    limits.push_back(graph.edges()[*e].speed_limit_kmh);
    types.push_back(graph.edges()[*e].road_type);
  }
  return layout(std::move(points), std::move(limits), std::move(types), model);
}

Route build_route(const std::vector<geo::GeoPoint>& points, const std::vector<double>& limits_kmh,
                  const DriverModel& model) {
  return layout(points, limits_kmh, std::vector<RoadType>(limits_kmh.size(), RoadType::urban), model);
}

std::vector<DriverProfile> make_profiles(std::size_t drivers, std::size_t paths, std::uint64_t seed) {
  if (paths == 0) throw std::invalid_argument("at least one path is required");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x70726f66u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> bias(0.8, 1.2);
  std::uniform_real_distribution<double> aggr(0.8, 1.2);
  std::uniform_int_distribution<EpochMs> offset(0, 59'999);
  std::uniform_real_distribution<double> hr(-5.0, 5.0);
  std::uniform_real_distribution<double> score(60.0, 95.0);

  std::vector<DriverProfile> out;
  out.reserve(drivers);
  for (std::size_t i = 0; i < drivers; ++i) {
    DriverProfile p;
    char id[32];
    std::snprintf(id, sizeof id, "driver-%05zu", i);
    p.driver_id = id;
    p.speed_bias = bias(rng);
    p.aggressiveness = aggr(rng);
    p.start_offset_ms = offset(rng);
    p.path_index = i % paths;
    p.heart_rate_offset = hr(rng);
    p.initial_score = score(rng);
    p.seed = rng();
    out.push_back(std::move(p));
  }
  return out;
}

DriverState start_driver(const DriverProfile& profile, const Route& route, EpochMs start,
                         const DriverModel& model) {
  DriverState s;
  s.clock = start + profile.start_offset_ms;
  s.trip_started = s.clock;
  s.rng.seed(profile.seed);
  s.heart_rate = 70.0 + profile.heart_rate_offset;
  s.score = profile.initial_score;
  if (model.random_phase && model.dwell_max_ratio > 0.0) {
    const double trip_ms = route.nominal_time_s() * 1000.0 / profile.speed_bias;
    const double mean_ratio = (model.dwell_min_ratio + model.dwell_max_ratio) / 2.0;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(s.rng) < mean_ratio / (1.0 + mean_ratio)) {
      s.parked_ms = static_cast<EpochMs>(u(s.rng) * trip_ms * mean_ratio);
    } else {
      const double f = u(s.rng);
      s.position = f * route.length();
      s.trip_started = s.clock - static_cast<EpochMs>(f * trip_ms);
    }
  }
  const auto p = route.point_at(s.position);
  s.samples.push_back({s.clock, p.latitude, p.longitude, 0.0, s.heart_rate});
  return s;
}

namespace {

EventEnvelope envelope(DriverState& s, const DriverProfile& profile, EventBody body) {
  EventEnvelope e;
  e.event_id = make_uuid(s.rng);
  e.source_id = profile.driver_id;
  e.created_at = s.clock;
  e.body = std::move(body);
  return e;
}

}  // namespace

std::vector<EventEnvelope> step_driver(DriverState& s, const DriverProfile& profile, const RoutePair& routes,
                                       EpochMs dt, const DriverModel& model) {
  std::vector<EventEnvelope> out;
  const double dts = static_cast<double>(dt) / 1000.0;
  const Route& route = routes.for_state(s);

  const std::size_t seg = route.segment_at(s.position);
  if (seg != s.noise_segment) {
    s.noise_segment = seg;
    s.segment_noise = model.speed_noise > 0.0
                          ? std::uniform_real_distribution<double>(-model.speed_noise, model.speed_noise)(s.rng)
                          : 0.0;
  }
  const double limit = route.limit_kmh[seg];

  const double v0 = s.speed;
  const bool parked = s.parked_ms > 0 && !s.forced_speed;
  double v1;
  if (parked) {
    v1 = 0.0;
    s.parked_ms -= dt;
    if (s.parked_ms <= 0) s.trip_started = s.clock + dt;
  } else if (s.forced_speed) {
    v1 = std::max(0.0, *s.forced_speed);
    s.forced_speed.reset();
  } else {
    double target = limit / 3.6 * profile.speed_bias * (1.0 + s.segment_noise);
    for (std::size_t k = seg + 1; k < route.points.size(); ++k) {
      const double d = route.offsets[k] - s.position;
      if (d > model.lookahead_m) break;
      double cap = route.pass_speed[k];
      if (k < route.limit_kmh.size()) cap = std::min(cap, route.limit_kmh[k] / 3.6 * profile.speed_bias);
      if (!std::isfinite(cap)) continue;
      const double room = std::max(0.0, d - v0 * dts);
      target = std::min(target, std::sqrt(cap * cap + 2.0 * model.planning_deceleration * room));
    }
    const double a = std::clamp((target - v0) / dts, -model.max_deceleration * profile.aggressiveness,
                                model.max_acceleration * profile.aggressiveness);
    v1 = std::max(0.0, v0 + a * dts);
  }
  const double accel = (v1 - v0) / dts;

  s.position += (v0 + v1) / 2.0 * dts;
  s.speed = v1;
  s.clock += dt;
  bool arrived = false;
  if (s.position >= route.length() - 0.5) {
    s.reversed = !s.reversed;
    s.position = 0.0;
    s.speed = 0.0;
    s.noise_segment = std::numeric_limits<std::size_t>::max();
    ++s.trips;
    arrived = true;
    if (model.dwell_max_ratio > 0.0) {
      const double ratio = std::uniform_real_distribution<double>(model.dwell_min_ratio, model.dwell_max_ratio)(s.rng);
      s.parked_ms = static_cast<EpochMs>(static_cast<double>(s.clock - s.trip_started) * ratio);
    }
  }
  const geo::GeoPoint here = routes.for_state(s).point_at(s.position);
  const double speed_kmh = v1 * 3.6;

  const double hr_target = 70.0 + profile.heart_rate_offset + 0.25 * speed_kmh + 6.0 * std::fabs(accel);
  s.heart_rate += 0.15 * (hr_target - s.heart_rate) * dts;
  if (model.heart_rate_noise > 0.0) {
    s.heart_rate += std::normal_distribution<double>(0.0, model.heart_rate_noise)(s.rng);
  }
  s.heart_rate = std::max(40.0, s.heart_rate);

  auto raise = [&](bool now_over, bool& was_over, AbnormalKind kind, double magnitude) {
    if (now_over && !was_over) {
      out.push_back(envelope(s, profile, AbnormalSituation{s.clock, here.latitude, here.longitude, kind, magnitude}));
      s.score = std::max(0.0, s.score - 2.0);
    }
    was_over = now_over;
  };
  raise(accel > model.abnormal_acceleration, s.over_acceleration, AbnormalKind::high_acceleration, accel);
  raise(-accel > model.abnormal_acceleration, s.over_deceleration, AbnormalKind::high_deceleration, -accel);
  raise(speed_kmh > model.abnormal_speed_factor * limit, s.over_speed, AbnormalKind::high_speed, speed_kmh);
  raise(s.heart_rate > model.abnormal_heart_rate, s.over_heart_rate, AbnormalKind::high_heart_rate, s.heart_rate);
  s.score = std::clamp(s.score + 0.001 * (profile.initial_score - s.score) * dts, 0.0, 100.0);

  const SectionSample& prev = s.samples.back();
  s.section_distance += geo::haversine_distance({prev.latitude, prev.longitude}, here);
  s.samples.push_back({s.clock, here.latitude, here.longitude, speed_kmh, s.heart_rate});
  if (s.parked_ms > 0 && (arrived || parked)) {
    // A trip ends with the vehicle parked; the unfinished section is dropped.
    s.samples = {s.samples.back()};
    s.section_distance = 0.0;
  }

  s.since_location += dt;
  if (s.since_location >= model.location_interval_ms) {
    s.since_location -= model.location_interval_ms;
    const double accuracy = std::uniform_real_distribution<double>(3.0, 15.0)(s.rng);
    out.push_back(envelope(
        s, profile, VehicleLocation{s.clock, here.latitude, here.longitude, accuracy, speed_kmh, s.score}));
  }

  if (s.section_distance >= model.section_length_m - 1e-6) {
    DrivingSection section;
    section.start_timestamp = s.samples.front().timestamp;
    section.end_timestamp = s.samples.back().timestamp;
    section.aggregates = compute_section_aggregates(s.samples);
    section.samples = std::move(s.samples);
    s.samples = {section.samples.back()};
    s.section_distance = 0.0;
    out.push_back(envelope(s, profile, std::move(section)));
  }
  return out;
}

}  // namespace hermes::sim
