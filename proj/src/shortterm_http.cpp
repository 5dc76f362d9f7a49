#include "hermes/shortterm_http.hpp"

#include <stdexcept>

#include "http_pool.hpp"
#include "json.hpp"

namespace hermes::shortterm {
namespace {

using Json = nlohmann::json;

Json entry_json(const ScoreEntry& e) {
  return {{"driver_id", e.driver_id},
          {"driving_score", e.score},
          {"latitude", e.point.latitude},
          {"longitude", e.point.longitude},
          {"last_update", e.last_update}};
}

Json alert_json(const TrafficAlert& a) {
  return {{"kind", a.kind},
          {"latitude", a.point.latitude},
          {"longitude", a.point.longitude},
          {"timestamp", a.timestamp}};
}

geo::GeoPoint point_of(const Json& j) { return {j.at("latitude").get<double>(), j.at("longitude").get<double>()}; }

}  // namespace

struct HttpServer::Impl {
  Impl(LocalService& s, std::size_t threads) : service(s), runner(threads) {}

  void route() {
    auto& srv = runner.server();
    auto json_handler = [this](auto fn) {
      return [this, fn](const httplib::Request& req, httplib::Response& res) {
        ScopedBusy busy(service.busy());
        try {
          auto body = Json::parse(req.body);
          res.set_content(fn(body).dump(), "application/json");
        } catch (const std::exception& ex) {
          res.status = 400;
          res.set_content(ex.what(), "text/plain");
        }
      };
    };
    srv.Post("/v1/shortterm/has_advanced", json_handler([this](const Json& b) {
               bool adv = service.has_advanced(b.at("driver_id").get<std::string>(), point_of(b),
                                               b.at("threshold").get<double>(), b.at("now").get<EpochMs>());
               return Json{{"advanced", adv}};
             }));
    srv.Post("/v1/shortterm/observe", json_handler([this](const Json& b) {
               service.observe(b.at("driver_id").get<std::string>(), point_of(b),
                               b.at("driving_score").get<double>(), b.at("advanced").get<bool>(),
                               b.at("now").get<EpochMs>());
               return Json::object();
             }));
    srv.Post("/v1/shortterm/nearby", json_handler([this](const Json& b) {
               auto entries = service.nearby_scores(point_of(b), b.at("half_side").get<double>(),
                                                    b.at("requester_id").get<std::string>(),
                                                    b.at("now").get<EpochMs>(), b.at("limit").get<std::size_t>());
               Json out = Json::array();
               for (const auto& e : entries) out.push_back(entry_json(e));
               return Json{{"entries", out}};
             }));
    srv.Post("/v1/shortterm/alerts/record", json_handler([this](const Json& b) {
               AbnormalSituation a;
               a.timestamp = b.at("timestamp").get<EpochMs>();
               a.latitude = b.at("latitude").get<double>();
               a.longitude = b.at("longitude").get<double>();
               auto kind = parse_abnormal_kind(b.at("kind").get<std::string>());
               if (!kind) throw std::invalid_argument("unknown kind");
               a.kind = *kind;
               a.magnitude = b.at("magnitude").get<double>();
               service.record_alert(a, b.at("now").get<EpochMs>());
               return Json::object();
             }));
    srv.Post("/v1/shortterm/alerts/query", json_handler([this](const Json& b) {
               geo::GeoRect r{b.at("min_lat").get<double>(), b.at("max_lat").get<double>(),
                              b.at("min_lon").get<double>(), b.at("max_lon").get<double>()};
               Json out = Json::array();
               for (const auto& a : service.alerts(r, b.at("now").get<EpochMs>())) out.push_back(alert_json(a));
               return Json{{"alerts", out}};
             }));
    srv.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
    srv.Get("/v1/metrics", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(detail::render_metrics({
                          {"busy_cpu_ns", static_cast<double>(service.busy().total_ns())},
                          {"tracked_locations", static_cast<double>(service.locations().size())},
                          {"score_entries", static_cast<double>(service.scores().size())},
                          {"alerts", static_cast<double>(service.alert_window().size())},
                      }),
                      "text/csv");
    });
  }

  LocalService& service;
  detail::ServerRunner runner;
};

HttpServer::HttpServer(LocalService& service, std::size_t max_threads)
    : impl_(std::make_unique<Impl>(service, max_threads)) {
  impl_->route();
}
HttpServer::~HttpServer() { stop(); }
bool HttpServer::start(const std::string& host, int port) { return impl_->runner.start(host, port); }
void HttpServer::stop() { impl_->runner.stop(); }
int HttpServer::port() const { return impl_->runner.port(); }

struct HttpServiceClient::Impl {
  explicit Impl(std::string address) : pool(std::move(address), 5) {}

  Json call(const char* path, const Json& body) {
    auto client = pool.lease();
    auto res = client->Post(path, body.dump(), "application/json");
    if (!res) throw std::runtime_error("short-term service unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) throw std::runtime_error("short-term service returned " + std::to_string(res->status));
    return Json::parse(res->body);
  }

  detail::ClientPool pool;
};

HttpServiceClient::HttpServiceClient(std::string address) : impl_(std::make_unique<Impl>(std::move(address))) {}
HttpServiceClient::~HttpServiceClient() = default;

bool HttpServiceClient::has_advanced(const std::string& driver_id, const geo::GeoPoint& point, double threshold,
                                     EpochMs now) {
  return impl_
      ->call("/v1/shortterm/has_advanced", {{"driver_id", driver_id},
                                             {"latitude", point.latitude},
                                             {"longitude", point.longitude},
                                             {"threshold", threshold},
                                             {"now", now}})
      .at("advanced")
      .get<bool>();
}

void HttpServiceClient::observe(const std::string& driver_id, const geo::GeoPoint& point, double score,
                                bool advanced, EpochMs now) {
  impl_->call("/v1/shortterm/observe", {{"driver_id", driver_id},
                                        {"latitude", point.latitude},
                                        {"longitude", point.longitude},
                                        {"driving_score", score},
                                        {"advanced", advanced},
                                        {"now", now}});
}

std::vector<ScoreEntry> HttpServiceClient::nearby_scores(const geo::GeoPoint& center, double half_side,
                                                         const std::string& requester_id, EpochMs now,
                                                         std::size_t limit) {
  auto j = impl_->call("/v1/shortterm/nearby", {{"latitude", center.latitude},
                                                {"longitude", center.longitude},
                                                {"half_side", half_side},
                                                {"requester_id", requester_id},
                                                {"now", now},
                                                {"limit", limit}});
  std::vector<ScoreEntry> out;
  for (const auto& e : j.at("entries")) {
    out.push_back({e.at("driver_id").get<std::string>(), e.at("driving_score").get<double>(), point_of(e),
                   e.at("last_update").get<EpochMs>()});
  }
  return out;
}

void HttpServiceClient::record_alert(const AbnormalSituation& event, EpochMs now) {
  impl_->call("/v1/shortterm/alerts/record", {{"timestamp", event.timestamp},
                                              {"latitude", event.latitude},
                                              {"longitude", event.longitude},
                                              {"kind", to_string(event.kind)},
                                              {"magnitude", event.magnitude},
                                              {"now", now}});
}

std::vector<TrafficAlert> HttpServiceClient::alerts(const geo::GeoRect& rect, EpochMs now) {
  auto j = impl_->call("/v1/shortterm/alerts/query", {{"min_lat", rect.min_lat},
                                                      {"max_lat", rect.max_lat},
                                                      {"min_lon", rect.min_lon},
                                                      {"max_lon", rect.max_lon},
                                                      {"now", now}});
  std::vector<TrafficAlert> out;
  for (const auto& a : j.at("alerts"))
    out.push_back({a.at("kind").get<std::string>(), point_of(a), a.at("timestamp").get<EpochMs>()});
  return out;
}

}  // namespace hermes::shortterm
