#pragma once

// Internal HTTP plumbing shared by the servers. Not installed.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"

namespace hermes::detail {

/// Task queue that starts workers on demand up to `max_threads` and lets idle
/// ones linger. A keep-alive connection holds its worker until it closes.
///
/// Each task is one accepted connection. The worker carries a connection id
/// for the task's duration and the pool reports when the connection ends.
class ElasticPool final : public httplib::TaskQueue {
 public:
  using CloseHook = std::function<void(std::uint64_t connection_id)>;

  explicit ElasticPool(std::size_t max_threads, CloseHook on_close = {});
  ~ElasticPool() override;

  bool enqueue(std::function<void()> fn) override;
  void shutdown() override;

 private:
  void work();

  std::size_t max_threads_;
  CloseHook on_close_;
  std::mutex mutex_;
  std::condition_variable cond_;
  std::deque<std::function<void()>> jobs_;
  std::vector<std::thread> threads_;
  std::size_t idle_ = 0;
  bool shutdown_ = false;
};

/// Id of the connection the calling worker is serving; 0 outside one.
std::uint64_t current_connection_id();

/// Shuts down the read side of every connection accepted on `port` in this
/// process. Idle keep-alive connections then end at once; responses in
/// flight are still written.
void shut_down_accepted(int port);

/// Owns an httplib::Server and the thread running its accept loop.
class ServerRunner {
 public:
  ServerRunner(std::size_t max_threads, time_t keep_alive_sec = 30, ElasticPool::CloseHook on_close = {});
  ~ServerRunner();

  httplib::Server& server() { return *server_; }

  /// Binds and starts serving. Port 0 picks a free port. Returns false when
  /// the address cannot be bound.
  bool start(const std::string& host, int port);
  void stop();
  int port() const { return port_; }
  bool running() const { return thread_.joinable(); }

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

std::string render_metrics(const std::vector<std::pair<std::string, double>>& metrics);
std::map<std::string, double> parse_metrics(const std::string& body);

/// Splits "http://host:port" (scheme optional) into host and port.
std::pair<std::string, int> split_address(const std::string& url);

}  // namespace hermes::detail

namespace hermes::detail {

/// Keep-alive clients to one address, checked out one per concurrent caller.
class ClientPool {
 public:
  explicit ClientPool(std::string address, time_t timeout_sec = 10);

  class Lease {
   public:
    Lease(ClientPool& pool, std::unique_ptr<httplib::Client> client)
        : pool_(&pool), client_(std::move(client)) {}
    Lease(Lease&&) = default;
    ~Lease() {
      if (client_) pool_->give_back(std::move(client_));
    }
    httplib::Client* operator->() { return client_.get(); }

   private:
    ClientPool* pool_;
    std::unique_ptr<httplib::Client> client_;
  };

  Lease lease();
  const std::string& address() const { return address_; }

 private:
  void give_back(std::unique_ptr<httplib::Client> client);

  std::string address_;
  time_t timeout_sec_;
  std::mutex mutex_;
  std::vector<std::unique_ptr<httplib::Client>> idle_;
};

}  // namespace hermes::detail
