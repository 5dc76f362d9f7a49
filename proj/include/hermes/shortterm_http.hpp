#pragma once

#include <memory>
#include <string>

#include "hermes/shortterm.hpp"

namespace hermes::shortterm {

/// Serves a LocalService over HTTP so collectors in other processes can
/// share it: POST /v1/shortterm/{has_advanced,observe,nearby,alerts/record,
/// alerts/query}, GET /v1/health, GET /v1/metrics.
class HttpServer {
 public:
  HttpServer(LocalService& service, std::size_t max_threads = 256);
  ~HttpServer();

  bool start(const std::string& host, int port);
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Service implementation that forwards every call to an HttpServer.
/// Transport failures surface as std::runtime_error.
class HttpServiceClient final : public Service {
 public:
  explicit HttpServiceClient(std::string address);
  ~HttpServiceClient() override;

  bool has_advanced(const std::string& driver_id, const geo::GeoPoint& point, double threshold,
                    EpochMs now) override;
  void observe(const std::string& driver_id, const geo::GeoPoint& point, double score, bool advanced,
               EpochMs now) override;
  std::vector<ScoreEntry> nearby_scores(const geo::GeoPoint& center, double half_side,
                                        const std::string& requester_id, EpochMs now,
                                        std::size_t limit) override;
  void record_alert(const AbnormalSituation& event, EpochMs now) override;
  std::vector<TrafficAlert> alerts(const geo::GeoRect& rect, EpochMs now) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hermes::shortterm
