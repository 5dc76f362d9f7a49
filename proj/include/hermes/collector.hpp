#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hermes/busy.hpp"
#include "hermes/events.hpp"
#include "hermes/longterm_stub.hpp"
#include "hermes/shortterm.hpp"
#include "hermes/streamhub.hpp"

namespace hermes::collector {

struct CollectorConfig {
  double advancement_threshold = shortterm::kDefaultAdvancementThresholdM;
  double feedback_rect_half_side = shortterm::kDefaultRectHalfSideM;
  std::size_t max_batch = 100;
  std::size_t nearby_limit = shortterm::kDefaultNearbyLimit;
  AbnormalThresholds thresholds;
};

/// Feedback returned in the body of a Vehicle Location post. Fields whose
/// source failed are left empty and omitted from the JSON.
struct FeedbackResponse {
  RoadType road_type = RoadType::unknown;
  std::optional<double> speed_limit;
  std::optional<double> recommended_speed;
  std::optional<std::vector<shortterm::TrafficAlert>> traffic_alerts;
  std::optional<std::vector<shortterm::ScoreEntry>> nearby_scores;

  bool operator==(const FeedbackResponse&) const = default;
};

std::string to_json(const FeedbackResponse& f);
FeedbackResponse feedback_from_json(std::string_view text);

struct Reply {
  int status = 200;
  std::string body;
  std::string content_type = "text/plain";
};

/// Validates, stamps and forwards posted events, and assembles feedback.
/// Thread-safe; every request is handled independently.
class Collector {
 public:
  Collector(CollectorConfig config, hub::Publisher& hub, shortterm::Service& shortterm,
            const longterm::Provider& roads);

  /// Body is one event or an NDJSON batch. 200 (feedback JSON when the batch
  /// holds a Vehicle Location), 400 on any invalid event, 413 over
  /// max_batch, 503 when the hub is unreachable or saturated. Batches are
  /// all-or-nothing.
  Reply handle_post(std::string_view body, EpochMs now);

  FeedbackResponse build_feedback(const std::string& driver_id, const VehicleLocation& loc, EpochMs now);

  struct Stats {
    std::uint64_t requests = 0;
    std::uint64_t accepted_events = 0;
    std::uint64_t rejected_invalid = 0;
    std::uint64_t rejected_oversized = 0;
    std::uint64_t rejected_unavailable = 0;
    std::uint64_t rejected_events = 0;
    std::uint64_t feedback_built = 0;
    std::uint64_t road_lookups = 0;
    std::uint64_t advanced = 0;
  };
  Stats stats() const;
  BusyCounter& busy() { return busy_; }
  std::size_t cached_drivers() const;
  const CollectorConfig& config() const { return config_; }

 private:
  struct CacheEntry {
    geo::GeoPoint resolved_at;
    std::optional<longterm::RoadAttributes> attributes;
  };

  CollectorConfig config_;
  hub::Publisher& hub_;
  shortterm::Service& shortterm_;
  const longterm::Provider& roads_;

  mutable std::mutex cache_mutex_;
  std::unordered_map<std::string, CacheEntry> road_cache_;

  BusyCounter busy_;
  std::atomic<std::uint64_t> requests_{0}, accepted_events_{0}, rejected_invalid_{0}, rejected_oversized_{0},
      rejected_unavailable_{0}, rejected_events_{0}, feedback_built_{0}, road_lookups_{0}, advanced_{0};
};

/// POST /v1/events, GET /v1/health, GET /v1/metrics. Each response carries
/// its handling latency in the X-Handling-Latency-Us header; the metrics
/// export the running totals.
class CollectorServer {
 public:
  explicit CollectorServer(Collector& collector, std::size_t max_threads = 256);
  ~CollectorServer();

  bool start(const std::string& host, int port);
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hermes::collector
