#include "hermes/shortterm.hpp"

#include <algorithm>
#include <cmath>

namespace hermes::shortterm {

// --- TwoTierLocationStore ---------------------------------------------------

TwoTierLocationStore::TwoTierLocationStore(EpochMs now, EpochMs rotation_period)
    : rotation_period_(rotation_period), last_rotation_at_(now) {}

void TwoTierLocationStore::record_location(const std::string& driver_id, const geo::GeoPoint& point,
                                           EpochMs now) {
  std::unique_lock lock(mutex_);
  current_[driver_id] = LocationFix{point, now};
}

std::optional<LocationFix> TwoTierLocationStore::last_location(const std::string& driver_id, EpochMs) const {
  std::shared_lock lock(mutex_);
  if (auto it = current_.find(driver_id); it != current_.end()) return it->second;
  if (auto it = previous_.find(driver_id); it != previous_.end()) return it->second;
  return std::nullopt;
}

bool TwoTierLocationStore::rotate(EpochMs now) {
  std::unique_lock lock(mutex_);
  if (now < last_rotation_at_ + rotation_period_) return false;
  previous_ = std::move(current_);
  current_ = Tier{};
  last_rotation_at_ = now;
  return true;
}

bool TwoTierLocationStore::has_advanced(const std::string& driver_id, const geo::GeoPoint& point,
                                        double threshold, EpochMs now) const {
  auto last = last_location(driver_id, now);
  if (!last) return true;
  return geo::haversine_distance(last->point, point) >= threshold;
}

EpochMs TwoTierLocationStore::last_rotation_at() const {
  std::shared_lock lock(mutex_);
  return last_rotation_at_;
}

std::size_t TwoTierLocationStore::size() const {
  std::shared_lock lock(mutex_);
  std::size_t n = current_.size();
  for (const auto& [id, fix] : previous_)
    if (!current_.contains(id)) ++n;
  return n;
}

// --- ScoreIndex -------------------------------------------------------------

ScoreIndex::ScoreIndex(EpochMs retention, double cell_degrees)
    : retention_(retention), cell_degrees_(cell_degrees) {}

ScoreIndex::CellKey ScoreIndex::cell_of(const geo::GeoPoint& p) const {
  const auto row = static_cast<std::int64_t>(std::floor(p.latitude / cell_degrees_));
  const auto col = static_cast<std::int64_t>(std::floor(p.longitude / cell_degrees_));
  return (static_cast<std::uint64_t>(row + (1LL << 31)) << 32) |
         static_cast<std::uint32_t>(col + (1LL << 31));
}

void ScoreIndex::erase_locked(const std::string& driver_id) {
  auto it = entries_.find(driver_id);
  if (it == entries_.end()) return;
  auto cell = cells_.find(cell_of(it->second.point));
  if (cell != cells_.end()) {
    cell->second.erase(driver_id);
    if (cell->second.empty()) cells_.erase(cell);
  }
  by_age_.erase({it->second.last_update, driver_id});
  entries_.erase(it);
}

void ScoreIndex::record_score(const std::string& driver_id, const geo::GeoPoint& point, double score,
                              EpochMs now) {
  std::unique_lock lock(mutex_);
  erase_locked(driver_id);
  entries_.emplace(driver_id, ScoreEntry{driver_id, score, point, now});
  cells_[cell_of(point)].insert(driver_id);
  by_age_.emplace(now, driver_id);
}

std::vector<ScoreEntry> ScoreIndex::nearby_scores(const geo::GeoPoint& center, double half_side,
                                                  const std::string& requester_id, EpochMs now,
                                                  std::size_t limit) const {
  const auto rect = geo::rect_around(center, half_side);
  const EpochMs oldest = now - retention_;

  std::vector<std::pair<double, const ScoreEntry*>> hits;
  auto consider = [&](const ScoreEntry& e) {
    if (e.driver_id == requester_id || e.last_update < oldest || !rect.contains(e.point)) return;
    hits.emplace_back(geo::haversine_distance(center, e.point), &e);
  };

  std::shared_lock lock(mutex_);
  const auto row0 = static_cast<std::int64_t>(std::floor(rect.min_lat / cell_degrees_));
  const auto row1 = static_cast<std::int64_t>(std::floor(rect.max_lat / cell_degrees_));
  const auto col0 = static_cast<std::int64_t>(std::floor(rect.min_lon / cell_degrees_));
  const auto col1 = static_cast<std::int64_t>(std::floor(rect.max_lon / cell_degrees_));
  const double cell_count = static_cast<double>(row1 - row0 + 1) * static_cast<double>(col1 - col0 + 1);

  if (cell_count > static_cast<double>(cells_.size())) {
    // Query covers more cells than are occupied: walk the occupied ones.
    for (const auto& [key, ids] : cells_) {
      const auto row = static_cast<std::int64_t>(key >> 32) - (1LL << 31);
      const auto col = static_cast<std::int64_t>(key & 0xFFFFFFFFULL) - (1LL << 31);
      if (row < row0 || row > row1 || col < col0 || col > col1) continue;
      for (const auto& id : ids) consider(entries_.at(id));
    }
  } else {
    for (auto row = row0; row <= row1; ++row) {
      for (auto col = col0; col <= col1; ++col) {
        const CellKey key = (static_cast<std::uint64_t>(row + (1LL << 31)) << 32) |
                            static_cast<std::uint32_t>(col + (1LL << 31));
        auto it = cells_.find(key);
        if (it == cells_.end()) continue;
        for (const auto& id : it->second) consider(entries_.at(id));
      }
    }
  }

  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second->driver_id < b.second->driver_id;
  });
  if (hits.size() > limit) hits.resize(limit);

  std::vector<ScoreEntry> out;
  out.reserve(hits.size());
  for (const auto& [d, e] : hits) out.push_back(*e);
  return out;
}

std::size_t ScoreIndex::evict_expired(EpochMs now) {
  std::unique_lock lock(mutex_);
  const EpochMs oldest = now - retention_;
  std::size_t evicted = 0;
  while (!by_age_.empty() && by_age_.begin()->first < oldest) {
    const std::string id = by_age_.begin()->second;
    erase_locked(id);
    ++evicted;
  }
  return evicted;
}

std::size_t ScoreIndex::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::vector<ScoreEntry> ScoreIndex::snapshot() const {
  std::shared_lock lock(mutex_);
  std::vector<ScoreEntry> out;
  out.reserve(entries_.size());
  for (const auto& [id, e] : entries_) out.push_back(e);
  return out;
}

// --- AlertWindow ------------------------------------------------------------

void AlertWindow::record(const AbnormalSituation& event, EpochMs now) {
  std::unique_lock lock(mutex_);
  entries_.push_back({TrafficAlert{std::string(to_string(event.kind)), {event.latitude, event.longitude},
                                   event.timestamp},
                      now});
}

std::vector<TrafficAlert> AlertWindow::query(const geo::GeoRect& rect, EpochMs now) const {
  const EpochMs oldest = now - retention_;
  std::shared_lock lock(mutex_);
  std::vector<TrafficAlert> out;
  for (const auto& e : entries_) {
    if (e.recorded_at < oldest) continue;
    if (rect.contains(e.alert.point)) out.push_back(e.alert);
  }
  return out;
}

std::size_t AlertWindow::evict_expired(EpochMs now) {
  const EpochMs oldest = now - retention_;
  std::unique_lock lock(mutex_);
  std::size_t n = 0;
  // Records arrive in clock order, so expired ones sit at the front.
  while (!entries_.empty() && entries_.front().recorded_at < oldest) {
    entries_.pop_front();
    ++n;
  }
  return n;
}

std::size_t AlertWindow::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

// --- LocalService -----------------------------------------------------------

LocalService::LocalService(EpochMs now, ServiceConfig config)
    : config_(config),
      locations_(now, config.rotation_period),
      scores_(config.retention),
      alerts_(config.alert_retention) {}

bool LocalService::has_advanced(const std::string& driver_id, const geo::GeoPoint& point, double threshold,
                                EpochMs now) {
  ScopedBusy busy(busy_);
  return locations_.has_advanced(driver_id, point, threshold, now);
}

void LocalService::observe(const std::string& driver_id, const geo::GeoPoint& point, double score,
                           bool advanced, EpochMs now) {
  ScopedBusy busy(busy_);
  locations_.record_location(driver_id, point, now);
  if (advanced || !config_.score_requires_advance) scores_.record_score(driver_id, point, score, now);
}

std::vector<ScoreEntry> LocalService::nearby_scores(const geo::GeoPoint& center, double half_side,
                                                    const std::string& requester_id, EpochMs now,
                                                    std::size_t limit) {
  ScopedBusy busy(busy_);
  return scores_.nearby_scores(center, half_side, requester_id, now, limit);
}

void LocalService::record_alert(const AbnormalSituation& event, EpochMs now) {
  ScopedBusy busy(busy_);
  alerts_.record(event, now);
}

std::vector<TrafficAlert> LocalService::alerts(const geo::GeoRect& rect, EpochMs now) {
  ScopedBusy busy(busy_);
  return alerts_.query(rect, now);
}

void LocalService::maintain(EpochMs now) {
  ScopedBusy busy(busy_);
  locations_.rotate(now);
  scores_.evict_expired(now);
  alerts_.evict_expired(now);
}

}  // namespace hermes::shortterm
