#include <gtest/gtest.h>

#include <httplib.h>

#include <map>
#include <set>
#include <thread>

#include "hermes/balancer.hpp"

using namespace hermes::balancer;
using namespace std::chrono_literals;

namespace {

/// Minimal upstream that answers with its own name.
class EchoBackend {
 public:
  explicit EchoBackend(std::string name) : name_(std::move(name)) {
    server_.Post("/v1/events", [this](const httplib::Request& req, httplib::Response& res) {
      res.set_content(name_ + ":" + req.body, "text/plain");
    });
    server_.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~EchoBackend() { stop(); }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }
  std::string address() const { return "127.0.0.1:" + std::to_string(port_); }

 private:
  std::string name_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(BackendPool, RoundRobinSkipsUnhealthy) {
  BackendPool pool(3, 2);
  EXPECT_EQ(pool.next(), 0u);
  EXPECT_EQ(pool.next(), 1u);
  EXPECT_EQ(pool.next(), 2u);
  EXPECT_EQ(pool.next(), 0u);
  pool.record_failure(1);
  EXPECT_TRUE(pool.healthy(1));
  pool.record_failure(1);
  EXPECT_FALSE(pool.healthy(1));
  EXPECT_EQ(pool.healthy_count(), 2u);
  for (int i = 0; i < 10; ++i) EXPECT_NE(pool.next(), 1u);
  pool.mark_healthy(1);
  EXPECT_EQ(pool.unhealthy(), std::vector<std::size_t>{});
}

TEST(BackendPool, SuccessResetsFailureCount) {
  BackendPool pool(2, 3);
  pool.record_failure(0);
  pool.record_failure(0);
  pool.record_success(0);
  pool.record_failure(0);
  pool.record_failure(0);
  EXPECT_TRUE(pool.healthy(0));
  pool.record_failure(0);
  EXPECT_FALSE(pool.healthy(0));
}

TEST(BackendPool, NoHealthyBackend) {
  BackendPool pool(2, 1);
  pool.record_failure(0);
  pool.record_failure(1);
  EXPECT_FALSE(pool.next());
}

TEST(Balancer, SequentialConnectionsAreSpreadEvenly) {
  std::vector<std::unique_ptr<EchoBackend>> backends;
  BalancerConfig config;
  for (int i = 0; i < 4; ++i) {
    backends.push_back(std::make_unique<EchoBackend>("b" + std::to_string(i)));
    config.backends.push_back(backends.back()->address());
  }
  Balancer lb(config);
  ASSERT_TRUE(lb.start("127.0.0.1", 0));

  std::map<std::string, int> served;
  for (int i = 0; i < 41; ++i) {
    httplib::Client cli("127.0.0.1", lb.port());
    auto res = cli.Post("/v1/events", "x", "text/plain");
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200);
    ++served[res->body.substr(0, 2)];
  }
  int lo = 1000, hi = 0;
  for (const auto& [name, n] : served) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  EXPECT_EQ(served.size(), 4u);
  EXPECT_LE(hi - lo, 1);
  EXPECT_EQ(lb.client_connections(), 41u);
  lb.stop();
}

TEST(Balancer, ConnectionKeepsItsBackend) {
  std::vector<std::unique_ptr<EchoBackend>> backends;
  BalancerConfig config;
  for (int i = 0; i < 3; ++i) {
    backends.push_back(std::make_unique<EchoBackend>("b" + std::to_string(i)));
    config.backends.push_back(backends.back()->address());
  }
  Balancer lb(config);
  ASSERT_TRUE(lb.start("127.0.0.1", 0));
  httplib::Client cli("127.0.0.1", lb.port());
  cli.set_keep_alive(true);
  std::set<std::string> seen;
  for (int i = 0; i < 20; ++i) {
    auto res = cli.Post("/v1/events", std::to_string(i), "text/plain");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->body.substr(3), std::to_string(i));
    seen.insert(res->body.substr(0, 2));
  }
  EXPECT_EQ(seen.size(), 1u);
  lb.stop();
}

TEST(Balancer, FailsOverWithoutClientErrors) {
  std::vector<std::unique_ptr<EchoBackend>> backends;
  BalancerConfig config;
  config.probe_interval = 200ms;
  for (int i = 0; i < 3; ++i) {
    backends.push_back(std::make_unique<EchoBackend>("b" + std::to_string(i)));
    config.backends.push_back(backends.back()->address());
  }
  Balancer lb(config);
  ASSERT_TRUE(lb.start("127.0.0.1", 0));

  std::vector<std::unique_ptr<httplib::Client>> clients;
  for (int i = 0; i < 6; ++i) {
    clients.push_back(std::make_unique<httplib::Client>("127.0.0.1", lb.port()));
    clients.back()->set_keep_alive(true);
    ASSERT_EQ(clients.back()->Post("/v1/events", "warm", "text/plain")->status, 200);
  }
  backends[1]->stop();
  int errors = 0;
  std::map<std::string, int> served;
  for (int round = 0; round < 5; ++round) {
    for (auto& c : clients) {
      auto res = c->Post("/v1/events", "after", "text/plain");
      if (!res || res->status != 200) {
        ++errors;
        continue;
      }
      ++served[res->body.substr(0, 2)];
    }
  }
  EXPECT_EQ(errors, 0);
  EXPECT_EQ(served.count("b1"), 0u);
  EXPECT_EQ(served["b0"] + served["b2"], 30);
  EXPECT_FALSE(lb.pool().healthy(1));
  lb.stop();
}

TEST(Balancer, AllBackendsDownIs502) {
  auto b = std::make_unique<EchoBackend>("b0");
  BalancerConfig config;
  config.backends = {b->address()};
  config.failure_threshold = 1;
  Balancer lb(config);
  ASSERT_TRUE(lb.start("127.0.0.1", 0));
  b->stop();
  httplib::Client cli("127.0.0.1", lb.port());
  auto res = cli.Post("/v1/events", "x", "text/plain");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 502);
  EXPECT_EQ(lb.proxy_errors(), 1u);
  EXPECT_EQ(cli.Get("/v1/health")->status, 200);
  lb.stop();
}

TEST(Balancer, ProbeRestoresRecoveredBackend) {
  auto b0 = std::make_unique<EchoBackend>("b0");
  auto b1 = std::make_unique<EchoBackend>("b1");
  BalancerConfig config;
  config.backends = {b0->address(), b1->address()};
  config.probe_interval = 100ms;
  config.failure_threshold = 1;
  Balancer lb(config);
  ASSERT_TRUE(lb.start("127.0.0.1", 0));
  lb.pool().record_failure(0);
  ASSERT_FALSE(lb.pool().healthy(0));
  for (int i = 0; i < 50 && !lb.pool().healthy(0); ++i) std::this_thread::sleep_for(50ms);
  EXPECT_TRUE(lb.pool().healthy(0));
  lb.stop();
}
