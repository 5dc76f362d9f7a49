#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "hermes/busy.hpp"
#include "hermes/clock.hpp"
#include "hermes/events.hpp"
#include "hermes/geo.hpp"

namespace hermes::shortterm {

inline constexpr EpochMs kDefaultRotationPeriodMs = 30'000;
inline constexpr EpochMs kDefaultRetentionMs = 3'600'000;
inline constexpr EpochMs kDefaultAlertRetentionMs = 600'000;
inline constexpr double kDefaultAdvancementThresholdM = 10.0;
inline constexpr double kDefaultRectHalfSideM = 500.0;
inline constexpr std::size_t kDefaultNearbyLimit = 50;

struct LocationFix {
  geo::GeoPoint point;
  EpochMs timestamp = 0;

  bool operator==(const LocationFix&) const = default;
};

/// Last known location per driver, held in two generations. Every rotation
/// drops the older generation, so an entry that is not refreshed lives
/// between one and two rotation periods.
class TwoTierLocationStore {
 public:
  explicit TwoTierLocationStore(EpochMs now, EpochMs rotation_period = kDefaultRotationPeriodMs);

  void record_location(const std::string& driver_id, const geo::GeoPoint& point, EpochMs now);
  std::optional<LocationFix> last_location(const std::string& driver_id, EpochMs now) const;

  /// Promotes current to previous and starts an empty current generation.
  /// Calls earlier than last_rotation_at + rotation_period are no-ops.
  /// Returns whether a rotation happened.
  bool rotate(EpochMs now);

  /// True if there is no stored location or the driver moved at least
  /// `threshold` meters from it. Never writes.
  bool has_advanced(const std::string& driver_id, const geo::GeoPoint& point, double threshold,
                    EpochMs now) const;

  EpochMs last_rotation_at() const;
  EpochMs rotation_period() const { return rotation_period_; }
  std::size_t size() const;

 private:
  using Tier = std::unordered_map<std::string, LocationFix>;

  EpochMs rotation_period_;
  mutable std::shared_mutex mutex_;
  Tier current_;
  Tier previous_;
  EpochMs last_rotation_at_;
};

struct ScoreEntry {
  std::string driver_id;
  double score = 0.0;
  geo::GeoPoint point;
  EpochMs last_update = 0;

  bool operator==(const ScoreEntry&) const = default;
};

/// Driver score and position keyed by driver, with a uniform lat/lon grid
/// for rectangle queries and a time-ordered set for retention eviction.
class ScoreIndex {
 public:
  explicit ScoreIndex(EpochMs retention = kDefaultRetentionMs, double cell_degrees = 0.01);

  void record_score(const std::string& driver_id, const geo::GeoPoint& point, double score, EpochMs now);

  /// Entries inside rect_around(center, half_side), updated within the
  /// retention window, excluding `requester_id`; nearest first (ties by
  /// driver id), truncated to `limit`.
  std::vector<ScoreEntry> nearby_scores(const geo::GeoPoint& center, double half_side,
                                        const std::string& requester_id, EpochMs now,
                                        std::size_t limit = kDefaultNearbyLimit) const;

  /// Removes every entry with last_update < now - retention.
  std::size_t evict_expired(EpochMs now);

  std::size_t size() const;
  EpochMs retention() const { return retention_; }
  std::vector<ScoreEntry> snapshot() const;

 private:
  using CellKey = std::uint64_t;

  CellKey cell_of(const geo::GeoPoint& p) const;
  void erase_locked(const std::string& driver_id);

  EpochMs retention_;
  double cell_degrees_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, ScoreEntry> entries_;
  std::unordered_map<CellKey, std::set<std::string>> cells_;
  std::set<std::pair<EpochMs, std::string>> by_age_;
};

struct TrafficAlert {
  std::string kind;
  geo::GeoPoint point;
  EpochMs timestamp = 0;

  bool operator==(const TrafficAlert&) const = default;
};

/// Recent abnormal situations, kept for a fixed window (10 minutes by
/// default) and served as traffic alerts by rectangle.
class AlertWindow {
 public:
  explicit AlertWindow(EpochMs retention = kDefaultAlertRetentionMs) : retention_(retention) {}

  void record(const AbnormalSituation& event, EpochMs now);
  std::vector<TrafficAlert> query(const geo::GeoRect& rect, EpochMs now) const;
  std::size_t evict_expired(EpochMs now);
  std::size_t size() const;

 private:
  struct Entry {
    TrafficAlert alert;
    EpochMs recorded_at;
  };

  EpochMs retention_;
  mutable std::shared_mutex mutex_;
  std::deque<Entry> entries_;
};

struct ServiceConfig {
  EpochMs rotation_period = kDefaultRotationPeriodMs;
  EpochMs retention = kDefaultRetentionMs;
  EpochMs alert_retention = kDefaultAlertRetentionMs;
  /// Apply the advancement rule to score writes as well as road lookups.
  bool score_requires_advance = true;
};

/// What the collectors need from the short-term services. Implemented
/// in-process by LocalService and over HTTP by HttpServiceClient.
class Service {
 public:
  virtual ~Service() = default;

  virtual bool has_advanced(const std::string& driver_id, const geo::GeoPoint& point, double threshold,
                            EpochMs now) = 0;
  /// Records the location; also the score unless the score rule suppresses it.
  virtual void observe(const std::string& driver_id, const geo::GeoPoint& point, double score,
                       bool advanced, EpochMs now) = 0;
  virtual std::vector<ScoreEntry> nearby_scores(const geo::GeoPoint& center, double half_side,
                                                const std::string& requester_id, EpochMs now,
                                                std::size_t limit) = 0;
  virtual void record_alert(const AbnormalSituation& event, EpochMs now) = 0;
  virtual std::vector<TrafficAlert> alerts(const geo::GeoRect& rect, EpochMs now) = 0;
};

class LocalService final : public Service {
 public:
  explicit LocalService(EpochMs now, ServiceConfig config = {});

  bool has_advanced(const std::string& driver_id, const geo::GeoPoint& point, double threshold,
                    EpochMs now) override;
  void observe(const std::string& driver_id, const geo::GeoPoint& point, double score, bool advanced,
               EpochMs now) override;
  std::vector<ScoreEntry> nearby_scores(const geo::GeoPoint& center, double half_side,
                                        const std::string& requester_id, EpochMs now,
                                        std::size_t limit) override;
  void record_alert(const AbnormalSituation& event, EpochMs now) override;
  std::vector<TrafficAlert> alerts(const geo::GeoRect& rect, EpochMs now) override;

  /// Rotation and eviction, driven by the caller's clock.
  void maintain(EpochMs now);

  const ServiceConfig& config() const { return config_; }
  TwoTierLocationStore& locations() { return locations_; }
  ScoreIndex& scores() { return scores_; }
  AlertWindow& alert_window() { return alerts_; }
  BusyCounter& busy() { return busy_; }

 private:
  ServiceConfig config_;
  TwoTierLocationStore locations_;
  ScoreIndex scores_;
  AlertWindow alerts_;
  BusyCounter busy_;
};

}  // namespace hermes::shortterm
