#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hermes/events.hpp"
#include "hermes/simulator.hpp"
#include "hermes/stats.hpp"
#include "hermes/topology.hpp"

namespace hermes::bench {

// ---------------------------------------------------------------------------
// Utilization

struct UtilizationSample {
  std::string component;
  int minute = 0;
  double utilization = 0.0;  // busy seconds / window seconds
};

/// Busy-time delta over a window, as a fraction of the window.
double utilization(std::int64_t busy_before_ns, std::int64_t busy_after_ns, std::int64_t window_ns);

/// One cumulative busy counter exposed by a component's /v1/metrics.
struct CounterSource {
  std::string component;
  std::string address;  // host:port
  std::string metric = "busy_cpu_ns";
};

/// Standard counters of a running topology: balancer, each collector,
/// shortterm, hub main stream and hub storage stream.
std::vector<CounterSource> topology_counters(const topology::Topology& t);

/// Reads the counters once per call and turns consecutive reads into
/// samples. Counters that cannot be read are skipped and logged.
class UtilizationSampler {
 public:
  explicit UtilizationSampler(std::vector<CounterSource> sources);

  /// First call only records a baseline.
  std::vector<UtilizationSample> sample(int minute);
  std::size_t skipped() const { return skipped_; }

 private:
  std::vector<CounterSource> sources_;
  std::map<std::string, std::int64_t> last_ns_;
  std::map<std::string, std::int64_t> last_at_;
  std::size_t skipped_ = 0;
};

/// Adds "collectors_sum" and "collectors_mean" rows for every minute.
void add_collector_aggregates(std::vector<UtilizationSample>& samples);

/// Mean utilization per component over the given minutes (inclusive).
std::map<std::string, double> mean_utilization(const std::vector<UtilizationSample>& samples, int first_minute,
                                               int last_minute);

// ---------------------------------------------------------------------------
// Delays

struct DelaySample {
  std::string event_id;
  EventType type = EventType::vehicle_location;
  EpochMs created_at = 0;
  EpochMs collector_at = 0;
  std::optional<EpochMs> storage_at;

  double d_collector_ms() const { return static_cast<double>(collector_at - created_at); }
  std::optional<double> d_storage_ms() const {
    if (!storage_at) return std::nullopt;
    return static_cast<double>(*storage_at - created_at);
  }
};

/// What a main-stream subscriber saw of one event.
struct MainObservation {
  std::uint64_t seq = 0;
  EventType type = EventType::vehicle_location;
  EpochMs accepted_at = 0;
  EpochMs received_at = 0;
};

struct DelayJoin {
  std::vector<DelaySample> samples;
  /// Acknowledged events that never reached the main stream.
  std::size_t lost = 0;
};

/// Joins acknowledged client records with main and storage observations by
/// event_id. A uniform `sample_rate` share of the acknowledged events is
/// kept; loss is counted over all of them.
DelayJoin measure_delays(const std::vector<sim::ClientRecord>& records,
                         const std::map<std::string, MainObservation>& main,
                         const std::map<std::string, EpochMs>& storage_received, double sample_rate,
                         std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Suite

struct RateRow {
  int minute = 0;
  std::uint64_t events_main = 0;
  std::uint64_t events_storage = 0;
  std::uint64_t rejected = 0;
};

struct LoadReport {
  std::size_t drivers = 0;
  double duration_s = 0.0;
  bool aborted = false;
  bool saturated = false;
  std::string error;

  std::vector<RateRow> rates;
  std::vector<UtilizationSample> utilization;
  std::vector<DelaySample> delays;

  /// Mean main-stream events per minute over the full-load minutes.
  double events_per_minute = 0.0;
  double post_rate = 0.0;  // requests/s once every driver has started
  double r_min = 0.0;
  std::size_t client_connections = 0;

  std::uint64_t acknowledged = 0;
  std::uint64_t rejected = 0;
  std::uint64_t main_events = 0;
  std::uint64_t storage_events = 0;
  std::uint64_t hub_admitted = 0;
  std::uint64_t hub_saturated_batches = 0;
  std::uint64_t lost = 0;
  /// Storage transcript equals the filtered main transcript, in order.
  bool storage_is_filtered_main = false;

  stats::MetricSummary d_collector;
  stats::MetricSummary d_storage;
  std::map<std::string, double> mean_utilization;

  bool zero_loss() const {
    return lost == 0 && acknowledged == main_events && main_events == hub_admitted && storage_is_filtered_main;
  }
};

struct SuiteConfig {
  std::vector<std::size_t> loads{50, 100, 200};
  double duration_s = 300.0;
  topology::TopologyConfig topology;
  /// Template for each run; drivers, target and duration are overwritten.
  sim::SimulationConfig simulation;
  double delay_sample_rate = 0.05;
  /// Minutes from the start of a run that are ramp-up and excluded from
  /// rates and utilization means.
  int warmup_minutes = 1;
  /// Time allowed for subscribers to catch up with the hub after a run.
  double drain_s = 30.0;
  std::string out_dir;
};

struct SuiteReport {
  std::vector<LoadReport> loads;
  std::optional<stats::LinearFit> rate_fit;         // events/min vs drivers
  std::optional<stats::LinearFit> hub_utilization;  // hub main utilization vs events/min
  std::optional<std::size_t> first_saturated_load;
};

using Logger = std::function<void(const std::string&)>;

LoadReport run_load(const SuiteConfig& config, std::size_t drivers, const Logger& log = {});
SuiteReport run_suite(const SuiteConfig& config, const Logger& log = {});

/// Fits over the loads that completed without abort or saturation.
void fit_suite(SuiteReport& report);

void write_load_csvs(const std::string& dir, const LoadReport& report);
void write_summary_csv(const std::string& path, const SuiteReport& report);

/// Renders SVG charts from a suite output directory. Returns the files written.
std::vector<std::string> plot_suite(const std::string& dir);

}  // namespace hermes::bench
