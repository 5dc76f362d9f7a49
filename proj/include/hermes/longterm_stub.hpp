#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "hermes/busy.hpp"
#include "hermes/events.hpp"
#include "hermes/geo.hpp"
#include "hermes/road_graph.hpp"

namespace hermes::longterm {

inline constexpr double kSnapDistanceM = 50.0;

struct RoadAttributes {
  RoadType road_type = RoadType::unknown;
  double speed_limit = 0.0;        // km/h
  double recommended_speed = 0.0;  // km/h, <= speed_limit

  bool operator==(const RoadAttributes&) const = default;
};

/// 0.9 x limit rounded to the nearest 5 km/h.
double recommended_speed_for(double speed_limit);

/// Source of road attributes for the collectors. A real GIS would implement
/// this interface; RoadStub answers from the synthetic road graph.
class Provider {
 public:
  virtual ~Provider() = default;
  /// nullopt means "unknown": no road within snapping distance.
  virtual std::optional<RoadAttributes> road_attributes(const geo::GeoPoint& point) const = 0;
};

class RoadStub final : public Provider {
 public:
  explicit RoadStub(const sim::RoadGraph& graph, double snap_distance_m = kSnapDistanceM);

  std::optional<RoadAttributes> road_attributes(const geo::GeoPoint& point) const override;

  /// Index of the nearest edge within the snap distance (ties: lowest index).
  std::optional<std::size_t> nearest_edge(const geo::GeoPoint& point) const;

  std::uint64_t call_count() const { return calls_.load(); }
  BusyCounter& busy() const { return busy_; }

 private:
  using CellKey = std::uint64_t;
  CellKey cell_of(double lat, double lon) const;

  const sim::RoadGraph& graph_;
  double snap_distance_m_;
  double cell_degrees_ = 0.002;
  std::unordered_map<CellKey, std::vector<std::size_t>> cells_;
  mutable std::atomic<std::uint64_t> calls_{0};
  mutable BusyCounter busy_;
};

}  // namespace hermes::longterm
