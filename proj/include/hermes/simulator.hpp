#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hermes/driver.hpp"
#include "hermes/events.hpp"
#include "hermes/geo.hpp"
#include "hermes/road_graph.hpp"

namespace hermes::sim {

struct SimulationConfig {
  std::size_t drivers = 10;
  std::size_t paths = 10;
  geo::GeoPoint center{37.3891, -5.9845};
  double radius_m = 5000.0;
  /// Start and end points are drawn within this distance of the center;
  /// non-positive means the whole graph.
  double endpoint_distance_m = 0.0;
  std::uint64_t seed = 1;
  EpochMs tick_ms = 1000;
  double duration_s = 60.0;
  std::string target = "http://127.0.0.1:8080";
  GridOptions grid;
  DriverModel model;
  /// Upper bound on concurrent in-flight requests.
  std::size_t sender_threads = 256;
  double request_timeout_s = 10.0;
  /// Time allowed after the run for queued events to be delivered.
  double drain_s = 30.0;

  /// Minimum aggregate request rate once every driver has started.
  double r_min() const { return static_cast<double>(drivers) / 10.0; }
};

/// Everything derived from the seed: cartography, routes and drivers.
struct World {
  RoadGraph graph;
  std::vector<PathSpec> paths;
  std::vector<RoutePair> routes;
  std::vector<DriverProfile> profiles;
};

World build_world(const SimulationConfig& config);
/// Rebuilds routes and profiles over an existing graph and path set.
World build_world(const SimulationConfig& config, RoadGraph graph, std::vector<PathSpec> paths);

struct TimedEvent {
  std::size_t driver = 0;
  EventEnvelope event;
};

/// Steps every driver from `start` for duration_s of simulated time without
/// any network activity. Events are delivered in simulated time order.
void run_offline(const World& world, const SimulationConfig& config, EpochMs start,
                 const std::function<void(const TimedEvent&)>& sink);

struct ClientRecord {
  std::string event_id;
  EventType type = EventType::vehicle_location;
  EpochMs created_at = 0;
  EpochMs sent_at = 0;
  int response_code = 0;  // 0 when no response arrived
  double response_ms = 0.0;
};

struct SimulationResult {
  std::vector<ClientRecord> records;
  EpochMs started_at = 0;
  /// Wall clock at which the last driver started.
  EpochMs all_started_at = 0;
  EpochMs finished_at = 0;
  bool aborted = false;
  std::size_t requests = 0;
  std::size_t failures = 0;
  std::size_t connections = 0;
};

/// Real-time run: one simulated tick per wall-clock tick, one persistent
/// HTTP connection per driver. `stop`, when given, ends the run early.
SimulationResult run_simulation(const World& world, const SimulationConfig& config,
                                const std::atomic<bool>* stop = nullptr);

void write_client_metrics(const std::string& path, const std::vector<ClientRecord>& records);

/// Requests per second sent within [from, to).
double post_rate(const std::vector<ClientRecord>& records, EpochMs from, EpochMs to);

}  // namespace hermes::sim
