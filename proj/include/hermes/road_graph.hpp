#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hermes/events.hpp"
#include "hermes/geo.hpp"

namespace hermes::sim {

struct RoadNode {
  geo::GeoPoint point;
};

struct RoadEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  double length_m = 0.0;
  double speed_limit_kmh = 0.0;
  RoadType road_type = RoadType::urban;

  double travel_time_s() const { return length_m / (speed_limit_kmh / 3.6); }
};

/// Undirected road network. Node ids are indices into nodes().
class RoadGraph {
 public:
  struct Adjacent {
    std::size_t node;
    std::size_t edge;
  };

  std::size_t add_node(const geo::GeoPoint& point);
  /// Edge length is the haversine distance between the endpoints.
  std::size_t add_edge(std::size_t a, std::size_t b, double speed_limit_kmh, RoadType type);

  const std::vector<RoadNode>& nodes() const { return nodes_; }
  const std::vector<RoadEdge>& edges() const { return edges_; }
  const std::vector<Adjacent>& neighbors(std::size_t node) const { return adjacency_[node]; }
  std::optional<std::size_t> edge_between(std::size_t a, std::size_t b) const;
  const geo::GeoPoint& point(std::size_t node) const { return nodes_[node].point; }

  std::string to_json() const;
  static RoadGraph from_json(const std::string& text);

 private:
  std::vector<RoadNode> nodes_;
  std::vector<RoadEdge> edges_;
  std::vector<std::vector<Adjacent>> adjacency_;
};

struct GridOptions {
  double spacing_m = 200.0;
  double jitter_fraction = 0.2;
  /// Every n-th grid line is an arterial at 90 km/h.
  int arterial_every = 6;
  /// Share of local streets limited to 30 km/h; the rest get 50.
  double slow_street_share = 0.5;
};

/// Perturbed grid clipped to a disc of `radius_m` around `center`, reduced to
/// its largest connected component. Deterministic for a given seed.
/// Throws std::invalid_argument unless radius is within [1, 30] km.
RoadGraph generate_graph(const geo::GeoPoint& center, double radius_m, std::uint64_t seed,
                         const GridOptions& options = {});

struct PathSpec {
  std::vector<std::size_t> nodes;
  double length_m = 0.0;
  double travel_time_s = 0.0;

  bool operator==(const PathSpec&) const = default;
};

/// Minimum travel time route (edge weight = length / speed limit).
std::optional<PathSpec> shortest_path(const RoadGraph& graph, std::size_t from, std::size_t to);

/// `count` fastest routes between random distinct nodes lying within
/// `max_endpoint_distance_m` of `center` (whole graph when <= 0).
std::vector<PathSpec> generate_paths(const RoadGraph& graph, std::size_t count, std::uint64_t seed,
                                     const geo::GeoPoint& center = {}, double max_endpoint_distance_m = 0.0);

std::string paths_to_json(const std::vector<PathSpec>& paths);
std::vector<PathSpec> paths_from_json(const std::string& text, const RoadGraph& graph);

}  // namespace hermes::sim
