#include "hermes/balancer.hpp"

#include <atomic>
#include <condition_variable>
#include <thread>
#include <unordered_map>

#include "hermes/clock.hpp"
#include "http_pool.hpp"

namespace hermes::balancer {

BackendPool::BackendPool(std::size_t size, int failure_threshold)
    : size_(size), failure_threshold_(failure_threshold), healthy_(size, true), consecutive_failures_(size, 0) {}

std::optional<std::size_t> BackendPool::next() {
  std::lock_guard lock(mutex_);
  for (std::size_t step = 0; step < size_; ++step) {
    const std::size_t candidate = (cursor_ + step) % size_;
    if (healthy_[candidate]) {
      cursor_ = (candidate + 1) % size_;
      return candidate;
    }
  }
  return std::nullopt;
}

void BackendPool::record_failure(std::size_t backend) {
  std::lock_guard lock(mutex_);
  if (++consecutive_failures_[backend] >= failure_threshold_) healthy_[backend] = false;
}

void BackendPool::record_success(std::size_t backend) {
  std::lock_guard lock(mutex_);
  consecutive_failures_[backend] = 0;
}

void BackendPool::mark_healthy(std::size_t backend) {
  std::lock_guard lock(mutex_);
  consecutive_failures_[backend] = 0;
  healthy_[backend] = true;
}

bool BackendPool::healthy(std::size_t backend) const {
  std::lock_guard lock(mutex_);
  return healthy_[backend];
}

std::size_t BackendPool::healthy_count() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (bool h : healthy_) n += h ? 1 : 0;
  return n;
}

std::vector<std::size_t> BackendPool::unhealthy() const {
  std::lock_guard lock(mutex_);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size_; ++i)
    if (!healthy_[i]) out.push_back(i);
  return out;
}

namespace {

// Upstream state for one client connection. httplib serves a connection on
// a single worker, so requests on it never overlap.
struct ClientConnection {
  std::mutex mutex;
  std::optional<std::size_t> backend;
  std::unique_ptr<httplib::Client> upstream;
};

}  // namespace

struct Balancer::Impl {
  explicit Impl(BalancerConfig c)
      : config(std::move(c)),
        pool(config.backends.size(), config.failure_threshold),
        runner(config.max_threads, config.keep_alive_sec, [this](std::uint64_t id) { forget(id); }),
        counters(config.backends.size()) {}

  struct Counters {
    std::atomic<std::uint64_t> connections{0}, requests{0}, failures{0};
  };

  std::unique_ptr<httplib::Client> connect(std::size_t backend) {
    auto cli = std::make_unique<httplib::Client>(config.backends[backend]);
    cli->set_keep_alive(true);
    cli->set_connection_timeout(1, 0);
    cli->set_read_timeout(30, 0);
    cli->set_write_timeout(30, 0);
    cli->set_tcp_nodelay(true);
    return cli;
  }

  std::shared_ptr<ClientConnection> connection_for() {
    const auto key = detail::current_connection_id();
    std::lock_guard lock(connections_mutex);
    auto& slot = connections[key];
    if (!slot) {
      slot = std::make_shared<ClientConnection>();
      ++client_connections;
    }
    return slot;
  }

  void proxy(const httplib::Request& req, httplib::Response& res) {
    ScopedBusy scope(busy);
    auto conn = connection_for();
    std::lock_guard lock(conn->mutex);

    httplib::Request upstream_req;
    upstream_req.method = req.method;
    upstream_req.path = req.target.empty() ? req.path : req.target;
    upstream_req.body = req.body;
    if (req.has_header("Content-Type")) upstream_req.set_header("Content-Type", req.get_header_value("Content-Type"));
    upstream_req.set_header("X-Forwarded-For", req.remote_addr);

    const std::size_t max_attempts = pool.size() * static_cast<std::size_t>(config.failure_threshold) + 1;
    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
      if (!conn->backend) {
        auto b = pool.next();
        if (!b) break;
        conn->backend = *b;
        conn->upstream = connect(*b);
        ++counters[*b].connections;
      }
      const auto b = *conn->backend;
      auto result = conn->upstream->send(upstream_req);
      if (result) {
        pool.record_success(b);
        ++counters[b].requests;
        res.status = result->status;
        if (result->has_header("X-Handling-Latency-Us"))
          res.set_header("X-Handling-Latency-Us", result->get_header_value("X-Handling-Latency-Us"));
        res.set_content(std::move(result->body), result->get_header_value("Content-Type"));
        return;
      }
      // The backend cannot be reached; the hub drops duplicate event ids,
      // so resending on another backend is safe.
      ++counters[b].failures;
      pool.record_failure(b);
      conn->backend.reset();
      conn->upstream.reset();
    }
    ++proxy_errors;
    res.status = 502;
    res.set_content("no healthy backend", "text/plain");
  }

  void maintenance() {
    std::unique_lock lock(maintenance_mutex);
    while (!stopping) {
      maintenance_cv.wait_for(lock, config.probe_interval, [&] { return stopping.load(); });
      if (stopping) break;
      lock.unlock();
      for (auto b : pool.unhealthy()) {
        httplib::Client probe(config.backends[b]);
        probe.set_connection_timeout(1, 0);
        probe.set_read_timeout(1, 0);
        if (auto r = probe.Get("/v1/health"); r && r->status == 200) pool.mark_healthy(b);
      }
      lock.lock();
    }
  }

  void forget(std::uint64_t connection_id) {
    std::lock_guard lock(connections_mutex);
    connections.erase(connection_id);
  }

  void route() {
    auto& srv = runner.server();
    srv.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
    srv.Get("/v1/metrics", [this](const httplib::Request&, httplib::Response& res) {
      std::vector<std::pair<std::string, double>> m{
          {"busy_cpu_ns", static_cast<double>(busy.total_ns())},
          {"client_connections", static_cast<double>(client_connections.load())},
          {"healthy_backends", static_cast<double>(pool.healthy_count())},
          {"proxy_errors", static_cast<double>(proxy_errors.load())},
      };
      for (std::size_t i = 0; i < counters.size(); ++i) {
        const auto p = "backend_" + std::to_string(i) + "_";
        m.emplace_back(p + "connections", static_cast<double>(counters[i].connections.load()));
        m.emplace_back(p + "requests", static_cast<double>(counters[i].requests.load()));
        m.emplace_back(p + "failures", static_cast<double>(counters[i].failures.load()));
        m.emplace_back(p + "healthy", pool.healthy(i) ? 1.0 : 0.0);
      }
      res.set_content(detail::render_metrics(m), "text/csv");
    });
    auto handler = [this](const httplib::Request& req, httplib::Response& res) { proxy(req, res); };
    srv.Post(".*", handler);
    srv.Put(".*", handler);
    srv.Get(".*", handler);
    srv.Delete(".*", handler);
  }

  BalancerConfig config;
  BackendPool pool;
  detail::ServerRunner runner;
  std::vector<Counters> counters;
  BusyCounter busy;
  std::atomic<std::uint64_t> client_connections{0}, proxy_errors{0};

  std::mutex connections_mutex;
  std::unordered_map<std::uint64_t, std::shared_ptr<ClientConnection>> connections;

  std::atomic<bool> stopping{false};
  std::mutex maintenance_mutex;
  std::condition_variable maintenance_cv;
  std::thread maintenance_thread;
};

Balancer::Balancer(BalancerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) { impl_->route(); }

Balancer::~Balancer() { stop(); }

bool Balancer::start(const std::string& host, int port) {
  if (impl_->config.backends.empty()) return false;
  if (!impl_->runner.start(host, port)) return false;
  impl_->maintenance_thread = std::thread([this] { impl_->maintenance(); });
  return true;
}

void Balancer::stop() {
  {
    std::lock_guard lock(impl_->maintenance_mutex);
    impl_->stopping = true;
  }
  impl_->maintenance_cv.notify_all();
  if (impl_->maintenance_thread.joinable()) impl_->maintenance_thread.join();
  impl_->runner.stop();
}

int Balancer::port() const { return impl_->runner.port(); }

std::vector<BackendStats> Balancer::backend_stats() const {
  std::vector<BackendStats> out;
  for (std::size_t i = 0; i < impl_->counters.size(); ++i) {
    out.push_back({impl_->config.backends[i], impl_->pool.healthy(i), impl_->counters[i].connections.load(),
                   impl_->counters[i].requests.load(), impl_->counters[i].failures.load()});
  }
  return out;
}

std::uint64_t Balancer::client_connections() const { return impl_->client_connections.load(); }
std::uint64_t Balancer::proxy_errors() const { return impl_->proxy_errors.load(); }
BackendPool& Balancer::pool() { return impl_->pool; }
BusyCounter& Balancer::busy() { return impl_->busy; }

}  // namespace hermes::balancer
