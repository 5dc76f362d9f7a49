#include "hermes/topology.hpp"

#include <httplib.h>
#include "json.hpp"
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "hermes/shortterm_http.hpp"

extern char** environ;

namespace hermes::topology {

using json = nlohmann::ordered_json;

namespace {

std::string_view to_string(Mode m) { return m == Mode::in_process ? "in_process" : "multi_process"; }

// Reads known keys from `obj`; any other key is a ConfigError.
class Reader {
 public:
  Reader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.contains(it.key())) throw ConfigError("unknown setting " + where_ + "." + it.key());
    }
  }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

void TopologyConfig::validate() const {
  static const std::set<std::string> known{"balancer", "collectors", "hub", "shortterm"};
  for (const auto& c : components) {
    if (!known.contains(c)) throw ConfigError("unknown component " + c);
  }
  if (host.empty()) throw ConfigError("host is empty");
  if (collectors.replicas == 0) throw ConfigError("collectors.replicas must be at least 1");
  if (hub.capacity == 0) throw ConfigError("hub.capacity must be at least 1");
  if (shortterm.config.rotation_period <= 0) throw ConfigError("shortterm.rotation_period_ms must be positive");
  if (shortterm.config.retention <= 0) throw ConfigError("shortterm.retention_ms must be positive");
  if (shortterm.maintenance_interval_ms <= 0) throw ConfigError("shortterm.maintenance_interval_ms must be positive");
  if (graph.file.empty() && (graph.radius_m < 1000.0 || graph.radius_m > 30000.0)) {
    throw ConfigError("graph.radius_m must be within [1000, 30000]");
  }

  std::map<int, std::string> used;
  auto claim = [&](int port, const std::string& who) {
    if (port < 0 || port > 65535) throw ConfigError(who + " port out of range");
    if (port == 0) {
      if (mode == Mode::multi_process) throw ConfigError(who + ": port 0 is only allowed in_process");
      return;
    }
    auto [it, fresh] = used.emplace(port, who);
    if (!fresh) throw ConfigError("port " + std::to_string(port) + " used by both " + it->second + " and " + who);
  };
  claim(balancer.port, "balancer");
  for (std::size_t i = 0; i < collectors.replicas; ++i) {
    claim(collectors.base_port == 0 ? 0 : collectors.base_port + static_cast<int>(i), "collector-" + std::to_string(i));
  }
  claim(hub.port, "hub");
  claim(shortterm.port, "shortterm");
}

TopologyConfig TopologyConfig::from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("topology config is not valid JSON: ") + e.what());
  }
  TopologyConfig c;
  Reader r(root, "config");

  std::string mode = std::string(to_string(c.mode));
  r.get("mode", mode);
  if (mode == "in_process") c.mode = Mode::in_process;
  else if (mode == "multi_process") c.mode = Mode::multi_process;
  else throw ConfigError("mode must be in_process or multi_process");
  r.get("host", c.host);
  if (const json* comps = r.child("components")) {
    std::vector<std::string> list;
    try {
      list = comps->get<std::vector<std::string>>();
    } catch (const json::exception&) {
      throw ConfigError("components must be a list of names");
    }
    c.components = {list.begin(), list.end()};
  }
  r.get("executable", c.executable);
  std::int64_t health_ms = c.health_timeout.count(), drain_ms = c.drain_timeout.count();
  r.get("health_timeout_ms", health_ms);
  r.get("drain_timeout_ms", drain_ms);
  c.health_timeout = std::chrono::milliseconds(health_ms);
  c.drain_timeout = std::chrono::milliseconds(drain_ms);

  if (const json* b = r.child("balancer")) {
    Reader br(*b, "balancer");
    br.get("port", c.balancer.port);
    br.get("threads", c.balancer.threads);
    br.get("failure_threshold", c.balancer.failure_threshold);
    br.get("probe_interval_ms", c.balancer.probe_interval_ms);
    br.finish();
  }
  if (const json* col = r.child("collectors")) {
    Reader cr(*col, "collectors");
    cr.get("replicas", c.collectors.replicas);
    cr.get("base_port", c.collectors.base_port);
    cr.get("threads", c.collectors.threads);
    cr.get("advancement_threshold_m", c.collectors.config.advancement_threshold);
    cr.get("feedback_rect_half_side_m", c.collectors.config.feedback_rect_half_side);
    cr.get("max_batch", c.collectors.config.max_batch);
    cr.get("nearby_limit", c.collectors.config.nearby_limit);
    cr.finish();
  }
  if (const json* h = r.child("hub")) {
    Reader hr(*h, "hub");
    hr.get("port", c.hub.port);
    hr.get("capacity", c.hub.capacity);
    hr.get("threads", c.hub.threads);
    if (const json* types = hr.child("storage_types")) {
      c.hub.storage_types.clear();
      if (!types->is_array()) throw ConfigError("hub.storage_types must be a list");
      for (const auto& t : *types) {
        auto parsed = t.is_string() ? parse_event_type(t.get<std::string>()) : std::nullopt;
        if (!parsed) throw ConfigError("hub.storage_types has an unknown event type");
        c.hub.storage_types.insert(*parsed);
      }
    }
    hr.finish();
  }
  if (const json* s = r.child("shortterm")) {
    Reader sr(*s, "shortterm");
    sr.get("port", c.shortterm.port);
    sr.get("threads", c.shortterm.threads);
    sr.get("rotation_period_ms", c.shortterm.config.rotation_period);
    sr.get("retention_ms", c.shortterm.config.retention);
    sr.get("alert_retention_ms", c.shortterm.config.alert_retention);
    sr.get("score_requires_advance", c.shortterm.config.score_requires_advance);
    sr.get("maintenance_interval_ms", c.shortterm.maintenance_interval_ms);
    sr.finish();
  }
  if (const json* g = r.child("graph")) {
    Reader gr(*g, "graph");
    std::vector<double> center{c.graph.center.latitude, c.graph.center.longitude};
    gr.get("center", center);
    if (center.size() != 2) throw ConfigError("graph.center must be [latitude, longitude]");
    c.graph.center = {center[0], center[1]};
    gr.get("radius_m", c.graph.radius_m);
    gr.get("seed", c.graph.seed);
    gr.get("file", c.graph.file);
    gr.finish();
  }
  r.finish();
  c.validate();
  return c;
}

TopologyConfig TopologyConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string TopologyConfig::to_json() const {
  json storage = json::array();
  for (auto t : hub.storage_types) storage.push_back(std::string(hermes::to_string(t)));
  json j{
      {"mode", std::string(to_string(mode))},
      {"host", host},
      {"components", std::vector<std::string>(components.begin(), components.end())},
      {"balancer",
       {{"port", balancer.port},
        {"threads", balancer.threads},
        {"failure_threshold", balancer.failure_threshold},
        {"probe_interval_ms", balancer.probe_interval_ms}}},
      {"collectors",
       {{"replicas", collectors.replicas},
        {"base_port", collectors.base_port},
        {"threads", collectors.threads},
        {"advancement_threshold_m", collectors.config.advancement_threshold},
        {"feedback_rect_half_side_m", collectors.config.feedback_rect_half_side},
        {"max_batch", collectors.config.max_batch},
        {"nearby_limit", collectors.config.nearby_limit}}},
      {"hub", {{"port", hub.port}, {"capacity", hub.capacity}, {"storage_types", storage}, {"threads", hub.threads}}},
      {"shortterm",
       {{"port", shortterm.port},
        {"threads", shortterm.threads},
        {"rotation_period_ms", shortterm.config.rotation_period},
        {"retention_ms", shortterm.config.retention},
        {"alert_retention_ms", shortterm.config.alert_retention},
        {"score_requires_advance", shortterm.config.score_requires_advance},
        {"maintenance_interval_ms", shortterm.maintenance_interval_ms}}},
      {"graph",
       {{"center", {graph.center.latitude, graph.center.longitude}},
        {"radius_m", graph.radius_m},
        {"seed", graph.seed},
        {"file", graph.file}}},
      {"executable", executable},
      {"health_timeout_ms", health_timeout.count()},
      {"drain_timeout_ms", drain_timeout.count()},
  };
  return j.dump(2) + "\n";
}

sim::RoadGraph load_graph(const GraphSpec& spec) {
  if (spec.file.empty()) return sim::generate_graph(spec.center, spec.radius_m, spec.seed);
  std::ifstream in(spec.file);
  if (!in) throw ConfigError("cannot read graph file " + spec.file);
  std::stringstream ss;
  ss << in.rdbuf();
  return sim::RoadGraph::from_json(ss.str());
}

bool check_health(const std::string& address, std::chrono::milliseconds timeout) {
  httplib::Client client(address);
  const auto us = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
  client.set_connection_timeout(us);
  client.set_read_timeout(us);
  auto res = client.Get("/v1/health");
  return res && res->status == 200;
}

struct Topology::Impl {
  TopologyConfig config;

  std::unique_ptr<hub::StreamHub> hub;
  std::unique_ptr<hub::HubServer> hub_server;

  std::unique_ptr<shortterm::LocalService> service;
  std::unique_ptr<shortterm::HttpServer> service_server;
  std::thread maintenance;
  std::mutex maintenance_mutex;
  std::condition_variable maintenance_cv;
  bool maintenance_stop = false;

  std::unique_ptr<sim::RoadGraph> graph;
  std::unique_ptr<longterm::RoadStub> stub;
  std::unique_ptr<hub::Publisher> publisher;
  std::unique_ptr<shortterm::Service> remote_service;
  std::vector<std::unique_ptr<collector::Collector>> collectors;
  std::vector<std::unique_ptr<collector::CollectorServer>> collector_servers;

  std::unique_ptr<balancer::Balancer> balancer;

  std::vector<Endpoint> endpoints;
  std::vector<std::pair<std::string, pid_t>> children;
  std::string child_config_path;

  mutable std::mutex lifecycle;
  bool shut_down = false;

  std::string address(int port) const { return config.host + ":" + std::to_string(port); }

  int collector_port(std::size_t i) const {
    if (i < collector_servers.size() && collector_servers[i]) return collector_servers[i]->port();
    return config.collectors.base_port + static_cast<int>(i);
  }

  std::string hub_address() const { return address(hub_server ? hub_server->port() : config.hub.port); }
  std::string shortterm_address() const {
    return address(service_server ? service_server->port() : config.shortterm.port);
  }

  void start_hub() {
    hub::HubConfig hc;
    hc.capacity = config.hub.capacity;
    hc.storage_types = config.hub.storage_types;
    hub = std::make_unique<hub::StreamHub>(hc);
    hub_server = std::make_unique<hub::HubServer>(*hub, config.hub.threads);
    if (!hub_server->start(config.host, config.hub.port)) {
      throw LaunchError("hub: cannot listen on " + address(config.hub.port));
    }
    endpoints.push_back({"hub", hub_address()});
  }

  void start_shortterm() {
    service = std::make_unique<shortterm::LocalService>(now_ms(), config.shortterm.config);
    service_server = std::make_unique<shortterm::HttpServer>(*service, config.shortterm.threads);
    if (!service_server->start(config.host, config.shortterm.port)) {
      throw LaunchError("shortterm: cannot listen on " + address(config.shortterm.port));
    }
    maintenance = std::thread([this] {
      const auto interval = std::chrono::milliseconds(config.shortterm.maintenance_interval_ms);
      std::unique_lock lock(maintenance_mutex);
      while (!maintenance_cv.wait_for(lock, interval, [&] { return maintenance_stop; })) {
        service->maintain(now_ms());
      }
    });
    endpoints.push_back({"shortterm", shortterm_address()});
  }

  void start_collectors(const std::vector<std::size_t>& which) {
    try {
      graph = std::make_unique<sim::RoadGraph>(load_graph(config.graph));
    } catch (const std::exception& e) {
      throw LaunchError(std::string("collectors: cannot load the road graph: ") + e.what());
    }
    stub = std::make_unique<longterm::RoadStub>(*graph);
    if (hub) publisher = std::make_unique<hub::LocalPublisher>(*hub);
    else publisher = std::make_unique<hub::HttpPublisher>(hub_address());
    shortterm::Service* svc = service.get();
    if (!svc) {
      remote_service = std::make_unique<shortterm::HttpServiceClient>(shortterm_address());
      svc = remote_service.get();
    }
    collectors.resize(config.collectors.replicas);
    collector_servers.resize(config.collectors.replicas);
    for (auto i : which) {
      const std::string name = "collector-" + std::to_string(i);
      collectors[i] = std::make_unique<collector::Collector>(config.collectors.config, *publisher, *svc, *stub);
      collector_servers[i] = std::make_unique<collector::CollectorServer>(*collectors[i], config.collectors.threads);
      const int port = config.collectors.base_port == 0 ? 0 : config.collectors.base_port + static_cast<int>(i);
      if (!collector_servers[i]->start(config.host, port)) {
        throw LaunchError(name + ": cannot listen on " + address(port));
      }
      endpoints.push_back({name, address(collector_servers[i]->port())});
    }
  }

  void start_balancer() {
    balancer::BalancerConfig bc;
    for (std::size_t i = 0; i < config.collectors.replicas; ++i) bc.backends.push_back(address(collector_port(i)));
    bc.failure_threshold = config.balancer.failure_threshold;
    bc.probe_interval = std::chrono::milliseconds(config.balancer.probe_interval_ms);
    bc.max_threads = config.balancer.threads;
    balancer = std::make_unique<balancer::Balancer>(bc);
    if (!balancer->start(config.host, config.balancer.port)) {
      throw LaunchError("balancer: cannot listen on " + address(config.balancer.port));
    }
    endpoints.push_back({"balancer", address(balancer->port())});
  }

  void start_local(const std::set<std::string>& which, const std::vector<std::size_t>& collector_ids) {
    if (which.contains("hub")) start_hub();
    if (which.contains("shortterm")) start_shortterm();
    if (!collector_ids.empty()) start_collectors(collector_ids);
    if (which.contains("balancer")) start_balancer();
  }

  std::string child_executable() const {
    if (!config.executable.empty()) return config.executable;
    std::error_code ec;
    auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
    if (ec) throw LaunchError("cannot locate the city executable");
    return (self.parent_path() / "city").string();
  }

  void spawn(const std::string& exe, const std::string& component) {
    std::vector<std::string> args{exe, "serve", "--config", child_config_path, "--component", component};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    if (posix_spawn(&pid, exe.c_str(), nullptr, nullptr, argv.data(), environ) != 0) {
      throw LaunchError(component + ": cannot start " + exe);
    }
    children.emplace_back(component, pid);
  }

  void start_children() {
    const std::string exe = child_executable();
    char path[] = "/tmp/hermes-topology-XXXXXX";
    int fd = mkstemp(path);
    if (fd < 0) throw LaunchError("cannot create a temporary config file");
    close(fd);
    child_config_path = path;
    {
      std::ofstream out(child_config_path);
      out << config.to_json();
    }
    auto wanted = [&](const char* c) { return config.components.contains(c); };
    if (wanted("hub")) {
      spawn(exe, "hub");
      endpoints.push_back({"hub", address(config.hub.port)});
    }
    if (wanted("shortterm")) {
      spawn(exe, "shortterm");
      endpoints.push_back({"shortterm", address(config.shortterm.port)});
    }
    if (wanted("collectors")) {
      for (std::size_t i = 0; i < config.collectors.replicas; ++i) {
        const std::string name = "collector-" + std::to_string(i);
        spawn(exe, name);
        endpoints.push_back({name, address(collector_port(i))});
      }
    }
    if (wanted("balancer")) {
      spawn(exe, "balancer");
      endpoints.push_back({"balancer", address(config.balancer.port)});
    }
  }

  void wait_healthy() {
    const auto deadline = std::chrono::steady_clock::now() + config.health_timeout;
    std::vector<bool> ok(endpoints.size(), false);
    for (;;) {
      bool all = true;
      for (std::size_t i = 0; i < endpoints.size(); ++i) {
        if (!ok[i]) ok[i] = check_health(endpoints[i].address, std::chrono::milliseconds(500));
        all = all && ok[i];
      }
      if (all) return;
      for (auto& [name, pid] : children) {
        int status = 0;
        if (pid > 0 && waitpid(pid, &status, WNOHANG) == pid) {
          pid = -1;
          throw LaunchError(name + ": process exited during startup");
        }
      }
      if (std::chrono::steady_clock::now() >= deadline) {
        std::string failed;
        for (std::size_t i = 0; i < endpoints.size(); ++i) {
          if (!ok[i]) failed += (failed.empty() ? "" : ", ") + endpoints[i].component;
        }
        throw LaunchError("not healthy within the startup timeout: " + failed);
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
  }

  static void terminate(pid_t pid, std::chrono::milliseconds grace) {
    if (pid <= 0) return;
    kill(pid, SIGTERM);
    const auto deadline = std::chrono::steady_clock::now() + grace;
    int status = 0;
    while (waitpid(pid, &status, WNOHANG) == 0) {
      if (std::chrono::steady_clock::now() >= deadline) {
        kill(pid, SIGKILL);
        waitpid(pid, &status, 0);
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  }

  void drain_hub() {
    if (!hub) return;
    hub->shutdown();
    const auto deadline = std::chrono::steady_clock::now() + config.drain_timeout;
    while (hub->stats().backlog > 0 && std::chrono::steady_clock::now() < deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  }

  void stop_all() {
    if (balancer) balancer->stop();
    for (auto& s : collector_servers) {
      if (s) s->stop();
    }
    drain_hub();
    if (hub_server) hub_server->stop();
    if (maintenance.joinable()) {
      {
        std::lock_guard lock(maintenance_mutex);
        maintenance_stop = true;
      }
      maintenance_cv.notify_all();
      maintenance.join();
    }
    if (service_server) service_server->stop();

    // Children stop in dependency order: ingress first, then the hub, then shortterm.
    const auto grace = config.drain_timeout + std::chrono::milliseconds(5000);
    for (const char* prefix : {"balancer", "collector-", "hub", "shortterm"}) {
      for (auto& [name, pid] : children) {
        if (name.rfind(prefix, 0) == 0) {
          terminate(pid, grace);
          pid = -1;
        }
      }
    }
    if (!child_config_path.empty()) std::remove(child_config_path.c_str());
  }
};

Topology::Topology() : impl_(std::make_unique<Impl>()) {}

Topology::~Topology() { shutdown(); }

std::unique_ptr<Topology> Topology::launch(const TopologyConfig& config) {
  config.validate();
  std::unique_ptr<Topology> t(new Topology());
  auto& impl = *t->impl_;
  impl.config = config;
  try {
    if (config.mode == Mode::in_process) {
      std::vector<std::size_t> ids;
      if (config.components.contains("collectors")) {
        for (std::size_t i = 0; i < config.collectors.replicas; ++i) ids.push_back(i);
      }
      impl.start_local(config.components, ids);
    } else {
      impl.start_children();
    }
    impl.wait_healthy();
  } catch (...) {
    t->shutdown();
    throw;
  }
  return t;
}

void Topology::shutdown() {
  std::lock_guard lock(impl_->lifecycle);
  if (impl_->shut_down) return;
  impl_->shut_down = true;
  impl_->stop_all();
}

bool Topology::is_shut_down() const {
  std::lock_guard lock(impl_->lifecycle);
  return impl_->shut_down;
}

bool Topology::healthy() const {
  if (is_shut_down()) return false;
  for (const auto& e : impl_->endpoints) {
    if (!check_health(e.address)) return false;
  }
  return true;
}

const TopologyConfig& Topology::config() const { return impl_->config; }
std::vector<Endpoint> Topology::endpoints() const { return impl_->endpoints; }

std::string Topology::address_of(const std::string& component) const {
  for (const auto& e : impl_->endpoints) {
    if (e.component == component) return e.address;
  }
  return {};
}

std::string Topology::balancer_url() const { return "http://" + address_of("balancer"); }

hub::StreamHub* Topology::hub() { return impl_->hub.get(); }
shortterm::LocalService* Topology::shortterm() { return impl_->service.get(); }

std::vector<collector::Collector*> Topology::collectors() {
  std::vector<collector::Collector*> out;
  for (auto& c : impl_->collectors) {
    if (c) out.push_back(c.get());
  }
  return out;
}

balancer::Balancer* Topology::balancer() { return impl_->balancer.get(); }
const longterm::RoadStub* Topology::road_stub() const { return impl_->stub.get(); }

void serve_component(const TopologyConfig& config, const std::string& component, const std::atomic<bool>& stop) {
  Topology t;
  auto& impl = *t.impl_;
  impl.config = config;
  std::set<std::string> which;
  std::vector<std::size_t> ids;
  if (component.rfind("collector-", 0) == 0) {
    std::size_t i = 0;
    try {
      i = std::stoul(component.substr(10));
    } catch (const std::exception&) {
      throw ConfigError("bad component name " + component);
    }
    if (i >= config.collectors.replicas) throw ConfigError("no such collector: " + component);
    ids.push_back(i);
  } else if (component == "hub" || component == "shortterm" || component == "balancer") {
    which.insert(component);
  } else {
    throw ConfigError("unknown component " + component);
  }
  impl.start_local(which, ids);
  while (!stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  t.shutdown();
}

}  // namespace hermes::topology
