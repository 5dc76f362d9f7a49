#include "hermes/collector.hpp"

#include <chrono>

#include "http_pool.hpp"
#include "json.hpp"

namespace hermes::collector {
namespace {

using Json = nlohmann::ordered_json;

Reply error_reply(int status, Json errors) {
  return {status, Json{{"errors", std::move(errors)}}.dump(), "application/json"};
}

}  // namespace

std::string to_json(const FeedbackResponse& f) {
  Json j;
  j["road_type"] = to_string(f.road_type);
  if (f.speed_limit) j["speed_limit"] = *f.speed_limit;
  if (f.recommended_speed) j["recommended_speed"] = *f.recommended_speed;
  if (f.traffic_alerts) {
    Json alerts = Json::array();
    for (const auto& a : *f.traffic_alerts)
      alerts.push_back({{"kind", a.kind},
                        {"latitude", a.point.latitude},
                        {"longitude", a.point.longitude},
                        {"timestamp", a.timestamp}});
    j["traffic_alerts"] = std::move(alerts);
  }
  if (f.nearby_scores) {
    Json scores = Json::array();
    for (const auto& s : *f.nearby_scores)
      scores.push_back({{"driver_id", s.driver_id},
                        {"driving_score", s.score},
                        {"latitude", s.point.latitude},
                        {"longitude", s.point.longitude}});
    j["nearby_scores"] = std::move(scores);
  }
  return j.dump();
}

FeedbackResponse feedback_from_json(std::string_view text) {
  FeedbackResponse f;
  try {
    auto j = Json::parse(text.begin(), text.end());
    f.road_type = parse_road_type(j.at("road_type").get<std::string>()).value_or(RoadType::unknown);
    if (j.contains("speed_limit")) f.speed_limit = j["speed_limit"].get<double>();
    if (j.contains("recommended_speed")) f.recommended_speed = j["recommended_speed"].get<double>();
    if (j.contains("traffic_alerts")) {
      f.traffic_alerts.emplace();
      for (const auto& a : j["traffic_alerts"])
        f.traffic_alerts->push_back({a.at("kind").get<std::string>(),
                                     {a.at("latitude").get<double>(), a.at("longitude").get<double>()},
                                     a.at("timestamp").get<EpochMs>()});
    }
    if (j.contains("nearby_scores")) {
      f.nearby_scores.emplace();
      for (const auto& s : j["nearby_scores"])
        f.nearby_scores->push_back({s.at("driver_id").get<std::string>(), s.at("driving_score").get<double>(),
                                    {s.at("latitude").get<double>(), s.at("longitude").get<double>()}, 0});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(ex.what());
  }
  return f;
}

Collector::Collector(CollectorConfig config, hub::Publisher& hub, shortterm::Service& shortterm,
                     const longterm::Provider& roads)
    : config_(config), hub_(hub), shortterm_(shortterm), roads_(roads) {}

Reply Collector::handle_post(std::string_view body, EpochMs now) {
  ScopedBusy busy(busy_);
  ++requests_;

  std::vector<EventEnvelope> events;
  try {
    events = decode_batch(body);
  } catch (const ParseError& ex) {
    ++rejected_invalid_;
    return error_reply(400, Json::array({{{"index", -1}, {"code", "parse_error"}, {"detail", ex.what()}}}));
  }
  if (events.size() > config_.max_batch) {
    ++rejected_oversized_;
    return error_reply(413, Json::array({{{"index", -1},
                                          {"code", "batch_too_large"},
                                          {"detail", "batch exceeds " + std::to_string(config_.max_batch)}}}));
  }

  Json errors = Json::array();
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (auto err = validate(events[i], now, config_.thresholds)) {
      errors.push_back({{"index", i},
                        {"event_id", events[i].event_id},
                        {"code", to_string(err->code)},
                        {"detail", err->detail}});
    }
  }
  if (!errors.empty()) {
    ++rejected_invalid_;
    return error_reply(400, std::move(errors));
  }

  for (auto& e : events)
    if (!e.accepted_at) e.accepted_at = now;

  switch (hub_.publish(events)) {
    case hub::Publisher::Outcome::ok: break;
    case hub::Publisher::Outcome::saturated:
    case hub::Publisher::Outcome::unreachable:
      ++rejected_unavailable_;
      rejected_events_ += events.size();
      return {503, "stream hub unavailable", "text/plain"};
  }
  accepted_events_ += events.size();

  const EventEnvelope* newest_location = nullptr;
  for (const auto& e : events) {
    if (const auto* a = std::get_if<AbnormalSituation>(&e.body)) {
      try {
        shortterm_.record_alert(*a, now);
      } catch (const std::exception&) {
      }
    } else if (const auto* v = std::get_if<VehicleLocation>(&e.body)) {
      if (newest_location == nullptr ||
          v->timestamp >= std::get<VehicleLocation>(newest_location->body).timestamp)
        newest_location = &e;
    }
  }
  if (newest_location == nullptr) return {200, "", "text/plain"};

  auto feedback =
      build_feedback(newest_location->source_id, std::get<VehicleLocation>(newest_location->body), now);
  return {200, to_json(feedback), "application/json"};
}

FeedbackResponse Collector::build_feedback(const std::string& driver_id, const VehicleLocation& loc, EpochMs now) {
  ScopedBusy busy(busy_);
  const geo::GeoPoint point{loc.latitude, loc.longitude};
  FeedbackResponse out;

  bool advanced = true;
  try {
    advanced = shortterm_.has_advanced(driver_id, point, config_.advancement_threshold, now);
  } catch (const std::exception&) {
  }
  if (advanced) ++advanced_;

  std::optional<CacheEntry> cached;
  {
    std::lock_guard lock(cache_mutex_);
    if (auto it = road_cache_.find(driver_id); it != road_cache_.end()) cached = it->second;
  }
  std::optional<longterm::RoadAttributes> attributes;
  bool have_attributes = false;
  if (advanced || !cached) {
    try {
      ++road_lookups_;
      attributes = roads_.road_attributes(point);
      have_attributes = true;
      std::lock_guard lock(cache_mutex_);
      road_cache_[driver_id] = CacheEntry{point, attributes};
    } catch (const std::exception&) {
    }
  } else {
    attributes = cached->attributes;
    have_attributes = true;
  }
  if (have_attributes && attributes) {
    out.road_type = attributes->road_type;
    out.speed_limit = attributes->speed_limit;
    out.recommended_speed = attributes->recommended_speed;
  }

  try {
    shortterm_.observe(driver_id, point, loc.driving_score, advanced, now);
  } catch (const std::exception&) {
  }

  std::optional<geo::GeoRect> rect;
  try {
    rect = geo::rect_around(point, config_.feedback_rect_half_side);
  } catch (const geo::GeoError&) {
  }
  if (rect) {
    try {
      out.nearby_scores =
          shortterm_.nearby_scores(point, config_.feedback_rect_half_side, driver_id, now, config_.nearby_limit);
    } catch (const std::exception&) {
    }
    try {
      out.traffic_alerts = shortterm_.alerts(*rect, now);
    } catch (const std::exception&) {
    }
  }
  ++feedback_built_;
  return out;
}

Collector::Stats Collector::stats() const {
  return {requests_.load(),          accepted_events_.load(), rejected_invalid_.load(),
          rejected_oversized_.load(), rejected_unavailable_.load(), rejected_events_.load(),
          feedback_built_.load(),    road_lookups_.load(),    advanced_.load()};
}

std::size_t Collector::cached_drivers() const {
  std::lock_guard lock(cache_mutex_);
  return road_cache_.size();
}

struct CollectorServer::Impl {
  Impl(Collector& c, std::size_t threads) : collector(c), runner(threads, 30) {}

  void route() {
    auto& srv = runner.server();
    srv.Post("/v1/events", [this](const httplib::Request& req, httplib::Response& res) {
      const auto started = std::chrono::steady_clock::now();
      auto reply = collector.handle_post(req.body, now_ms());
      const auto us =
          std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - started).count();
      latency_us_sum += us;
      latency_count += 1;
      for (auto prev = latency_us_max.load(); us > prev && !latency_us_max.compare_exchange_weak(prev, us);) {
      }
      res.status = reply.status;
      res.set_header("X-Handling-Latency-Us", std::to_string(us));
      res.set_content(std::move(reply.body), reply.content_type);
    });
    srv.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
    srv.Get("/v1/metrics", [this](const httplib::Request&, httplib::Response& res) {
      auto s = collector.stats();
      res.set_content(detail::render_metrics({
                          {"busy_cpu_ns", static_cast<double>(collector.busy().total_ns())},
                          {"requests", static_cast<double>(s.requests)},
                          {"accepted_events", static_cast<double>(s.accepted_events)},
                          {"rejected_invalid", static_cast<double>(s.rejected_invalid)},
                          {"rejected_oversized", static_cast<double>(s.rejected_oversized)},
                          {"rejected_unavailable", static_cast<double>(s.rejected_unavailable)},
                          {"rejected_events", static_cast<double>(s.rejected_events)},
                          {"feedback_built", static_cast<double>(s.feedback_built)},
                          {"road_lookups", static_cast<double>(s.road_lookups)},
                          {"advanced", static_cast<double>(s.advanced)},
                          {"latency_us_sum", static_cast<double>(latency_us_sum.load())},
                          {"latency_count", static_cast<double>(latency_count.load())},
                          {"latency_us_max", static_cast<double>(latency_us_max.load())},
                      }),
                      "text/csv");
    });
  }

  Collector& collector;
  detail::ServerRunner runner;
  std::atomic<std::int64_t> latency_us_sum{0}, latency_count{0}, latency_us_max{0};
};

CollectorServer::CollectorServer(Collector& collector, std::size_t max_threads)
    : impl_(std::make_unique<Impl>(collector, max_threads)) {
  impl_->route();
}
CollectorServer::~CollectorServer() { stop(); }
bool CollectorServer::start(const std::string& host, int port) { return impl_->runner.start(host, port); }
void CollectorServer::stop() { impl_->runner.stop(); }
int CollectorServer::port() const { return impl_->runner.port(); }

}  // namespace hermes::collector
