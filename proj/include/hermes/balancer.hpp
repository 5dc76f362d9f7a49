#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hermes/busy.hpp"

namespace hermes::balancer {

/// Round-robin routing state over a fixed list of backends. A backend is
/// taken out of rotation after `failure_threshold` consecutive failures and
/// returns once a probe succeeds.
class BackendPool {
 public:
  explicit BackendPool(std::size_t size, int failure_threshold = 3);

  /// Next healthy backend after the cursor; nullopt when none is healthy.
  std::optional<std::size_t> next();
  void record_failure(std::size_t backend);
  void record_success(std::size_t backend);
  void mark_healthy(std::size_t backend);

  bool healthy(std::size_t backend) const;
  std::size_t size() const { return size_; }
  std::size_t healthy_count() const;
  std::vector<std::size_t> unhealthy() const;

 private:
  std::size_t size_;
  int failure_threshold_;
  mutable std::mutex mutex_;
  std::size_t cursor_ = 0;
  std::vector<bool> healthy_;
  std::vector<int> consecutive_failures_;
};

struct BalancerConfig {
  std::vector<std::string> backends;  // "host:port"
  int failure_threshold = 3;
  std::chrono::milliseconds probe_interval{5000};
  std::size_t max_threads = 1024;
  int keep_alive_sec = 30;
};

struct BackendStats {
  std::string address;
  bool healthy = true;
  std::uint64_t connections = 0;
  std::uint64_t requests = 0;
  std::uint64_t failures = 0;
};

/// HTTP reverse proxy with connection affinity: each client connection is
/// bound to one backend on its first request and keeps a dedicated upstream
/// connection. Requests that cannot reach their backend are retried on the
/// next healthy one. Serves GET /v1/metrics and /v1/health itself.
class Balancer {
 public:
  explicit Balancer(BalancerConfig config);
  ~Balancer();

  bool start(const std::string& host, int port);
  void stop();
  int port() const;

  std::vector<BackendStats> backend_stats() const;
  std::uint64_t client_connections() const;
  std::uint64_t proxy_errors() const;
  BackendPool& pool();
  BusyCounter& busy();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hermes::balancer
