#include "hermes/longterm_stub.hpp"

#include <algorithm>
#include <cmath>

namespace hermes::longterm {

double recommended_speed_for(double speed_limit) { return std::round(0.9 * speed_limit / 5.0) * 5.0; }

RoadStub::RoadStub(const sim::RoadGraph& graph, double snap_distance_m)
    : graph_(graph), snap_distance_m_(snap_distance_m) {
  const auto& edges = graph_.edges();
  for (std::size_t id = 0; id < edges.size(); ++id) {
    const auto& a = graph_.point(edges[id].a);
    const auto& b = graph_.point(edges[id].b);
    const double mid_lat = (a.latitude + b.latitude) / 2.0;
    const double pad_lat = snap_distance_m_ / geo::kMetersPerDegree;
    const double pad_lon = pad_lat / std::cos(mid_lat * geo::kPi / 180.0);
    const auto r0 = static_cast<long>(std::floor((std::min(a.latitude, b.latitude) - pad_lat) / cell_degrees_));
    const auto r1 = static_cast<long>(std::floor((std::max(a.latitude, b.latitude) + pad_lat) / cell_degrees_));
    const auto c0 = static_cast<long>(std::floor((std::min(a.longitude, b.longitude) - pad_lon) / cell_degrees_));
    const auto c1 = static_cast<long>(std::floor((std::max(a.longitude, b.longitude) + pad_lon) / cell_degrees_));
    for (long r = r0; r <= r1; ++r)
      for (long c = c0; c <= c1; ++c)
        cells_[(static_cast<std::uint64_t>(r + (1L << 31)) << 32) | static_cast<std::uint32_t>(c + (1L << 31))]
            .push_back(id);
  }
}

RoadStub::CellKey RoadStub::cell_of(double lat, double lon) const {
  const auto r = static_cast<long>(std::floor(lat / cell_degrees_));
  const auto c = static_cast<long>(std::floor(lon / cell_degrees_));
  return (static_cast<std::uint64_t>(r + (1L << 31)) << 32) | static_cast<std::uint32_t>(c + (1L << 31));
}

std::optional<std::size_t> RoadStub::nearest_edge(const geo::GeoPoint& point) const {
  auto it = cells_.find(cell_of(point.latitude, point.longitude));
  if (it == cells_.end()) return std::nullopt;
  std::optional<std::size_t> best;
  double best_d = snap_distance_m_;
  for (auto id : it->second) {
    const auto& e = graph_.edges()[id];
    const double d = geo::distance_to_segment(point, graph_.point(e.a), graph_.point(e.b));
    if (d < best_d || (d == best_d && (!best || id < *best))) {
      best_d = d;
      best = id;
    }
  }
  return best;
}

std::optional<RoadAttributes> RoadStub::road_attributes(const geo::GeoPoint& point) const {
  ScopedBusy busy(busy_);
  calls_.fetch_add(1);
  auto edge = nearest_edge(point);
  if (!edge) return std::nullopt;
  const auto& e = graph_.edges()[*edge];
  return RoadAttributes{e.road_type, e.speed_limit_kmh, recommended_speed_for(e.speed_limit_kmh)};
}

}  // namespace hermes::longterm
