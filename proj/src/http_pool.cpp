#include "http_pool.hpp"

#include <arpa/inet.h>
#include <dirent.h>
#include <netinet/in.h>
#include <sys/socket.h>

#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace hermes::detail {

namespace {
std::atomic<std::uint64_t> next_connection_id{1};
thread_local std::uint64_t serving_connection = 0;
}  // namespace

std::uint64_t current_connection_id() { return serving_connection; }

namespace {

int local_port(int fd, bool want_peer) {
  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  if (getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) return -1;
  if (want_peer) {
    sockaddr_storage peer{};
    socklen_t plen = sizeof peer;
    if (getpeername(fd, reinterpret_cast<sockaddr*>(&peer), &plen) != 0) return -1;
  }
  if (addr.ss_family == AF_INET) return ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  if (addr.ss_family == AF_INET6) return ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
  return -1;
}

}  // namespace

void shut_down_accepted(int port) {
  DIR* dir = opendir("/proc/self/fd");
  if (!dir) return;
  const int own = dirfd(dir);
  while (dirent* entry = readdir(dir)) {
    char* end = nullptr;
    const long fd = std::strtol(entry->d_name, &end, 10);
    if (*end != '\0' || fd == own) continue;
    if (local_port(static_cast<int>(fd), true) == port) shutdown(static_cast<int>(fd), SHUT_RD);
  }
  closedir(dir);
}

ElasticPool::ElasticPool(std::size_t max_threads, CloseHook on_close)
    : max_threads_(max_threads), on_close_(std::move(on_close)) {}

ElasticPool::~ElasticPool() { shutdown(); }

bool ElasticPool::enqueue(std::function<void()> fn) {
  std::unique_lock lock(mutex_);
  if (shutdown_) return false;
  jobs_.push_back([this, fn = std::move(fn)] {
    const auto id = next_connection_id.fetch_add(1);
    serving_connection = id;
    fn();
    serving_connection = 0;
    if (on_close_) on_close_(id);
  });
  if (idle_ < jobs_.size() && threads_.size() < max_threads_) {
    threads_.emplace_back([this] { work(); });
  } else {
    cond_.notify_one();
  }
  return true;
}

void ElasticPool::shutdown() {
  std::vector<std::thread> threads;
  {
    std::unique_lock lock(mutex_);
    shutdown_ = true;
    threads.swap(threads_);
  }
  cond_.notify_all();
  for (auto& t : threads) t.join();
}

void ElasticPool::work() {
  for (;;) {
    std::function<void()> fn;
    {
      std::unique_lock lock(mutex_);
      ++idle_;
      cond_.wait(lock, [&] { return !jobs_.empty() || shutdown_; });
      --idle_;
      if (jobs_.empty()) return;
      fn = std::move(jobs_.front());
      jobs_.pop_front();
    }
    fn();
  }
}

ServerRunner::ServerRunner(std::size_t max_threads, time_t keep_alive_sec, ElasticPool::CloseHook on_close)
    : server_(std::make_unique<httplib::Server>()) {
  server_->new_task_queue = [max_threads, on_close] { return new ElasticPool(max_threads, on_close); };
  server_->set_keep_alive_max_count(1'000'000);
  server_->set_keep_alive_timeout(keep_alive_sec);
  server_->set_read_timeout(keep_alive_sec, 0);
  server_->set_write_timeout(30, 0);
  server_->set_tcp_nodelay(true);
}

ServerRunner::~ServerRunner() { stop(); }

bool ServerRunner::start(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
    if (port_ < 0) return false;
  } else {
    if (!server_->bind_to_port(host, port)) return false;
    port_ = port;
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return true;
}

void ServerRunner::stop() {
  if (!thread_.joinable()) return;
  server_->stop();
  shut_down_accepted(port_);
  thread_.join();
}

std::string render_metrics(const std::vector<std::pair<std::string, double>>& metrics) {
  std::string out;
  char buf[64];
  for (const auto& [name, value] : metrics) {
    std::snprintf(buf, sizeof buf, "%.17g", value);
    out += name;
    out += ',';
    out += buf;
    out += '\n';
  }
  return out;
}

std::map<std::string, double> parse_metrics(const std::string& body) {
  std::map<std::string, double> out;
  std::istringstream in(body);
  std::string line;
  while (std::getline(in, line)) {
    auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    try {
      out[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
    }
  }
  return out;
}

std::pair<std::string, int> split_address(const std::string& url) {
  std::string rest = url;
  if (auto p = rest.find("://"); p != std::string::npos) rest = rest.substr(p + 3);
  if (auto slash = rest.find('/'); slash != std::string::npos) rest = rest.substr(0, slash);
  auto colon = rest.rfind(':');
  if (colon == std::string::npos) return {rest, 80};
  return {rest.substr(0, colon), std::stoi(rest.substr(colon + 1))};
}

}  // namespace hermes::detail

namespace hermes::detail {

ClientPool::ClientPool(std::string address, time_t timeout_sec)
    : address_(std::move(address)), timeout_sec_(timeout_sec) {}

ClientPool::Lease ClientPool::lease() {
  {
    std::unique_lock lock(mutex_);
    if (!idle_.empty()) {
      auto c = std::move(idle_.back());
      idle_.pop_back();
      return Lease(*this, std::move(c));
    }
  }
  auto c = std::make_unique<httplib::Client>(address_);
  c->set_keep_alive(true);
  c->set_connection_timeout(2, 0);
  c->set_read_timeout(timeout_sec_, 0);
  c->set_write_timeout(timeout_sec_, 0);
  c->set_tcp_nodelay(true);
  return Lease(*this, std::move(c));
}

void ClientPool::give_back(std::unique_ptr<httplib::Client> client) {
  std::unique_lock lock(mutex_);
  idle_.push_back(std::move(client));
}

}  // namespace hermes::detail
