#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "hermes/balancer.hpp"
#include "hermes/collector.hpp"
#include "hermes/geo.hpp"
#include "hermes/longterm_stub.hpp"
#include "hermes/road_graph.hpp"
#include "hermes/shortterm.hpp"
#include "hermes/streamhub.hpp"

namespace hermes::topology {

enum class Mode { in_process, multi_process };

struct BalancerSpec {
  int port = 8080;
  std::size_t threads = 2048;
  int failure_threshold = 3;
  int probe_interval_ms = 5000;
};

struct CollectorSpec {
  std::size_t replicas = 6;
  /// Replica i listens on base_port + i.
  int base_port = 8101;
  std::size_t threads = 1024;
  collector::CollectorConfig config;
};

struct HubSpec {
  int port = 8201;
  std::size_t capacity = hub::kDefaultCapacity;
  std::set<EventType> storage_types{EventType::driving_section, EventType::abnormal_situation};
  std::size_t threads = 128;
};

struct ShorttermSpec {
  int port = 8301;
  shortterm::ServiceConfig config;
  std::size_t threads = 1024;
  /// How often rotation and eviction run.
  int maintenance_interval_ms = 1000;
};

/// Cartography served by the road attribute stub. Either generated from
/// (center, radius, seed) or loaded from a graph file.
struct GraphSpec {
  geo::GeoPoint center{37.3891, -5.9845};
  double radius_m = 5000.0;
  std::uint64_t seed = 1;
  std::string file;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Declarative description of one deployment. Port 0 picks a free port,
/// which is only allowed in process.
struct TopologyConfig {
  Mode mode = Mode::in_process;
  std::string host = "127.0.0.1";
  /// Subset of {"balancer", "collectors", "hub", "shortterm"} to run.
  std::set<std::string> components{"balancer", "collectors", "hub", "shortterm"};
  BalancerSpec balancer;
  CollectorSpec collectors;
  HubSpec hub;
  ShorttermSpec shortterm;
  GraphSpec graph;
  /// Path of the city binary used to spawn children in multi_process mode;
  /// empty means the one next to the running executable.
  std::string executable;
  std::chrono::milliseconds health_timeout{10'000};
  std::chrono::milliseconds drain_timeout{5'000};

  /// Throws ConfigError on port collisions and out-of-range values.
  void validate() const;

  static TopologyConfig from_json(const std::string& text);
  static TopologyConfig load(const std::string& path);
  std::string to_json() const;
};

sim::RoadGraph load_graph(const GraphSpec& spec);

class LaunchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Endpoint {
  std::string component;  // "balancer", "collector-0", "hub", "shortterm"
  std::string address;    // host:port
};

/// Runs a single component of `config` in the calling process until `stop`
/// becomes true. Used by multi-process children; `component` is one of
/// "balancer", "hub", "shortterm" or "collector-<i>".
void serve_component(const TopologyConfig& config, const std::string& component, const std::atomic<bool>& stop);

/// A running deployment. Shutdown is idempotent and also runs on destruction.
class Topology {
 public:
  /// Starts every configured component and waits for all health checks.
  /// On any failure the components already started are torn down and
  /// LaunchError names the one that failed.
  static std::unique_ptr<Topology> launch(const TopologyConfig& config);
  ~Topology();

  Topology(const Topology&) = delete;
  Topology& operator=(const Topology&) = delete;

  /// Stops ingress, lets stream subscribers drain, then stops the rest.
  void shutdown();
  bool is_shut_down() const;

  /// Conjunction of the component health checks.
  bool healthy() const;

  const TopologyConfig& config() const;
  std::vector<Endpoint> endpoints() const;
  std::string address_of(const std::string& component) const;
  std::string balancer_url() const;

  /// In-process access; null or empty when the component runs elsewhere.
  hub::StreamHub* hub();
  shortterm::LocalService* shortterm();
  std::vector<collector::Collector*> collectors();
  balancer::Balancer* balancer();
  const longterm::RoadStub* road_stub() const;

 private:
  friend void serve_component(const TopologyConfig&, const std::string&, const std::atomic<bool>&);
  Topology();
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// True when GET /v1/health on `address` answers 200 within the timeout.
bool check_health(const std::string& address, std::chrono::milliseconds timeout = std::chrono::milliseconds(1000));

}  // namespace hermes::topology
