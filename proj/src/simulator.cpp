#include "hermes/simulator.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <fstream>
#include <memory>
#include <mutex>
#include <queue>
#include <thread>

namespace hermes::sim {

World build_world(const SimulationConfig& config) {
  RoadGraph graph = generate_graph(config.center, config.radius_m, config.seed, config.grid);
  auto paths = generate_paths(graph, config.paths, config.seed, config.center, config.endpoint_distance_m);
  return build_world(config, std::move(graph), std::move(paths));
}

World build_world(const SimulationConfig& config, RoadGraph graph, std::vector<PathSpec> paths) {
  if (config.drivers == 0 || paths.empty()) throw std::invalid_argument("need at least one driver and one path");
  World w;
  w.graph = std::move(graph);
  w.paths = std::move(paths);
  for (const auto& p : w.paths) {
    w.routes.push_back({build_route(w.graph, p, config.model, false), build_route(w.graph, p, config.model, true)});
  }
  w.profiles = make_profiles(config.drivers, w.paths.size(), config.seed);
  return w;
}

void run_offline(const World& world, const SimulationConfig& config, EpochMs start,
                 const std::function<void(const TimedEvent&)>& sink) {
  const EpochMs end = start + static_cast<EpochMs>(config.duration_s * 1000.0);
  std::vector<DriverState> states;
  states.reserve(world.profiles.size());
  for (const auto& p : world.profiles) {
    states.push_back(start_driver(p, world.routes[p.path_index].forward, start, config.model));
  }
  std::vector<TimedEvent> batch;
  for (EpochMs t = start + config.tick_ms; t <= end; t += config.tick_ms) {
    batch.clear();
    for (std::size_t i = 0; i < states.size(); ++i) {
      const auto& profile = world.profiles[i];
      while (states[i].clock + config.tick_ms <= t) {
        for (auto& e : step_driver(states[i], profile, world.routes[profile.path_index], config.tick_ms, config.model)) {
          batch.push_back({i, std::move(e)});
        }
      }
    }
    std::stable_sort(batch.begin(), batch.end(),
                     [](const TimedEvent& a, const TimedEvent& b) { return a.event.created_at < b.event.created_at; });
    for (const auto& e : batch) sink(e);
  }
}

namespace {

// Outgoing queue of one driver. Only one sender works a lane at a time, so
// the driver's connection is never shared.
struct Lane {
  std::deque<EventEnvelope> pending;
  bool scheduled = false;
  std::unique_ptr<httplib::Client> client;
};

class Runner {
 public:
  Runner(const World& world, const SimulationConfig& config, const std::atomic<bool>* stop)
      : world_(world), config_(config), stop_(stop), lanes_(world.profiles.size()) {}

  SimulationResult run() {
    const EpochMs start = now_ms();
    result_.started_at = start;
    const EpochMs end = start + static_cast<EpochMs>(config_.duration_s * 1000.0);

    const std::size_t threads = std::max<std::size_t>(1, std::min(config_.sender_threads, lanes_.size()));
    for (std::size_t i = 0; i < threads; ++i) senders_.emplace_back([this] { send_loop(); });

    std::vector<DriverState> states;
    using Due = std::pair<EpochMs, std::size_t>;
    std::priority_queue<Due, std::vector<Due>, std::greater<>> due;
    for (std::size_t i = 0; i < world_.profiles.size(); ++i) {
      const auto& p = world_.profiles[i];
      states.push_back(start_driver(p, world_.routes[p.path_index].forward, start, config_.model));
      due.push({states.back().clock + config_.tick_ms, i});
      result_.all_started_at = std::max(result_.all_started_at, states.back().clock);
    }

    EpochMs next_check = start + 1000;
    while (!due.empty() && !aborted_ && !(stop_ && stop_->load())) {
      auto [when, i] = due.top();
      if (when > end) break;
      const EpochMs wake = std::min(when, next_check);
      sleep_until_epoch(wake);
      if (now_ms() >= next_check) {
        check_abort();
        next_check += 1000;
        continue;
      }
      due.pop();
      const auto& profile = world_.profiles[i];
      auto events = step_driver(states[i], profile, world_.routes[profile.path_index], config_.tick_ms, config_.model);
      if (!events.empty()) enqueue(i, std::move(events));
      due.push({states[i].clock + config_.tick_ms, i});
    }

    drain();
    result_.finished_at = now_ms();
    result_.aborted = aborted_;
    result_.requests = requests_;
    result_.failures = failures_;
    result_.connections = connections_;
    return std::move(result_);
  }

 private:
  static void sleep_until_epoch(EpochMs t) {
    const EpochMs d = t - now_ms();
    if (d > 0) std::this_thread::sleep_for(std::chrono::milliseconds(d));
  }

  void enqueue(std::size_t lane, std::vector<EventEnvelope> events) {
    std::lock_guard lock(mutex_);
    auto& l = lanes_[lane];
    for (auto& e : events) l.pending.push_back(std::move(e));
    if (!l.scheduled) {
      l.scheduled = true;
      ready_.push_back(lane);
      cv_.notify_one();
    }
  }

  void send_loop() {
    std::unique_lock lock(mutex_);
    for (;;) {
      cv_.wait(lock, [&] { return closing_ || !ready_.empty(); });
      if (ready_.empty()) return;
      const std::size_t idx = ready_.front();
      ready_.pop_front();
      ++busy_;
      Lane& lane = lanes_[idx];
      while (!lane.pending.empty() && !aborted_ && !dropping_) {
        EventEnvelope e = std::move(lane.pending.front());
        lane.pending.pop_front();
        lock.unlock();
        post(lane, e);
        lock.lock();
      }
      lane.pending.clear();
      lane.scheduled = false;
      --busy_;
      idle_cv_.notify_all();
    }
  }

  void post(Lane& lane, const EventEnvelope& e) {
    if (!lane.client) {
      lane.client = std::make_unique<httplib::Client>(config_.target);
      lane.client->set_keep_alive(true);
      lane.client->set_connection_timeout(2, 0);
      const auto timeout = std::chrono::duration<double>(config_.request_timeout_s);
      lane.client->set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      lane.client->set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      ++connections_;
    }
    ClientRecord rec;
    rec.event_id = e.event_id;
    rec.type = e.type();
    rec.created_at = e.created_at;
    rec.sent_at = now_ms();
    const auto t0 = std::chrono::steady_clock::now();
    auto res = lane.client->Post("/v1/events", encode(e) + "\n", "application/x-ndjson");
    rec.response_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    rec.response_code = res ? res->status : 0;
    ++requests_;
    if (rec.response_code != 200) ++failures_;
    std::lock_guard lock(records_mutex_);
    result_.records.push_back(std::move(rec));
  }

  // Abort once more than half of the requests completed in each of 30
  // consecutive seconds have failed.
  void check_abort() {
    const std::size_t req = requests_, fail = failures_;
    const std::size_t dr = req - last_requests_, df = fail - last_failures_;
    last_requests_ = req;
    last_failures_ = fail;
    if (dr == 0) return;
    bad_streak_ = 2 * df > dr ? bad_streak_ + 1 : 0;
    if (bad_streak_ >= 30) {
      std::fprintf(stderr, "simulate: aborting, more than half of the requests failed for 30 s\n");
      aborted_ = true;
    }
  }

  void drain() {
    std::unique_lock lock(mutex_);
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(config_.drain_s);
    idle_cv_.wait_until(lock, deadline, [&] { return ready_.empty() && busy_ == 0; });
    closing_ = true;
    dropping_ = true;  // anything still queued past the drain window is dropped
    cv_.notify_all();
    lock.unlock();
    for (auto& t : senders_) t.join();
  }

  const World& world_;
  const SimulationConfig& config_;
  const std::atomic<bool>* stop_;

  std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::vector<Lane> lanes_;
  std::deque<std::size_t> ready_;
  std::size_t busy_ = 0;
  bool closing_ = false;
  std::atomic<bool> aborted_{false};
  std::atomic<bool> dropping_{false};
  std::vector<std::thread> senders_;

  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> failures_{0};
  std::atomic<std::size_t> connections_{0};
  std::size_t last_requests_ = 0;
  std::size_t last_failures_ = 0;
  int bad_streak_ = 0;

  std::mutex records_mutex_;
  SimulationResult result_;
};

}  // namespace

SimulationResult run_simulation(const World& world, const SimulationConfig& config, const std::atomic<bool>* stop) {
  Runner runner(world, config, stop);
  return runner.run();
}

void write_client_metrics(const std::string& path, const std::vector<ClientRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "event_id,type,created_at,response_code,response_ms\n";
  char ms[32];
  for (const auto& r : records) {
    std::snprintf(ms, sizeof ms, "%.3f", r.response_ms);
    out << r.event_id << ',' << to_string(r.type) << ',' << r.created_at << ',' << r.response_code << ',' << ms
        << '\n';
  }
}

double post_rate(const std::vector<ClientRecord>& records, EpochMs from, EpochMs to) {
  if (to <= from) return 0.0;
  const auto n = std::count_if(records.begin(), records.end(),
                               [&](const ClientRecord& r) { return r.sent_at >= from && r.sent_at < to; });
  return static_cast<double>(n) * 1000.0 / static_cast<double>(to - from);
}

}  // namespace hermes::sim
