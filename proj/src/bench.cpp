#include "hermes/bench.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "http_pool.hpp"

namespace hermes::bench {

namespace {

std::optional<std::map<std::string, double>> fetch_metrics(const std::string& address) {
  httplib::Client client(address);
  client.set_connection_timeout(2, 0);
  client.set_read_timeout(5, 0);
  auto res = client.Get("/v1/metrics");
  if (!res || res->status != 200) return std::nullopt;
  return detail::parse_metrics(res->body);
}

std::int64_t steady_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void log_line(const Logger& log, const std::string& line) {
  if (log) log(line);
}

}  // namespace

double utilization(std::int64_t busy_before_ns, std::int64_t busy_after_ns, std::int64_t window_ns) {
  if (window_ns <= 0) return 0.0;
  return static_cast<double>(std::max<std::int64_t>(0, busy_after_ns - busy_before_ns)) /
         static_cast<double>(window_ns);
}

std::vector<CounterSource> topology_counters(const topology::Topology& t) {
  std::vector<CounterSource> out;
  for (const auto& e : t.endpoints()) {
    if (e.component == "hub") {
      out.push_back({"hub_main", e.address, "busy_cpu_ns"});
      out.push_back({"hub_storage", e.address, "storage_busy_cpu_ns"});
    } else {
      out.push_back({e.component, e.address, "busy_cpu_ns"});
    }
  }
  return out;
}

UtilizationSampler::UtilizationSampler(std::vector<CounterSource> sources) : sources_(std::move(sources)) {}

std::vector<UtilizationSample> UtilizationSampler::sample(int minute) {
  std::vector<UtilizationSample> out;
  std::map<std::string, std::optional<std::map<std::string, double>>> cache;
  for (const auto& src : sources_) {
    auto it = cache.find(src.address);
    if (it == cache.end()) it = cache.emplace(src.address, fetch_metrics(src.address)).first;
    const std::int64_t at = steady_ns();
    const auto& metrics = it->second;
    auto value = metrics ? metrics->find(src.metric) : std::map<std::string, double>::const_iterator{};
    if (!metrics || value == metrics->end()) {
      ++skipped_;
      std::fprintf(stderr, "bench: no %s counter from %s (%s), sample skipped\n", src.metric.c_str(),
                   src.component.c_str(), src.address.c_str());
      continue;
    }
    const auto ns = static_cast<std::int64_t>(value->second);
    if (auto prev = last_ns_.find(src.component); prev != last_ns_.end()) {
      out.push_back({src.component, minute, utilization(prev->second, ns, at - last_at_[src.component])});
    }
    last_ns_[src.component] = ns;
    last_at_[src.component] = at;
  }
  return out;
}

void add_collector_aggregates(std::vector<UtilizationSample>& samples) {
  std::map<int, std::pair<double, int>> per_minute;
  for (const auto& s : samples) {
    if (s.component.rfind("collector-", 0) != 0) continue;
    auto& [sum, count] = per_minute[s.minute];
    sum += s.utilization;
    ++count;
  }
  for (const auto& [minute, agg] : per_minute) {
    samples.push_back({"collectors_sum", minute, agg.first});
    samples.push_back({"collectors_mean", minute, agg.first / agg.second});
  }
}

std::map<std::string, double> mean_utilization(const std::vector<UtilizationSample>& samples, int first_minute,
                                               int last_minute) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& s : samples) {
    if (s.minute < first_minute || s.minute > last_minute) continue;
    acc[s.component].first += s.utilization;
    ++acc[s.component].second;
  }
  std::map<std::string, double> out;
  for (const auto& [name, a] : acc) out[name] = a.first / a.second;
  return out;
}

DelayJoin measure_delays(const std::vector<sim::ClientRecord>& records,
                         const std::map<std::string, MainObservation>& main,
                         const std::map<std::string, EpochMs>& storage_received, double sample_rate,
                         std::mt19937_64& rng) {
  DelayJoin out;
  std::bernoulli_distribution keep(std::clamp(sample_rate, 0.0, 1.0));
  for (const auto& r : records) {
    if (r.response_code != 200) continue;
    auto m = main.find(r.event_id);
    if (m == main.end()) {
      ++out.lost;
      continue;
    }
    if (!keep(rng)) continue;
    DelaySample d;
    d.event_id = r.event_id;
    d.type = r.type;
    d.created_at = r.created_at;
    d.collector_at = m->second.accepted_at;
    if (auto s = storage_received.find(r.event_id); s != storage_received.end()) d.storage_at = s->second;
    out.samples.push_back(std::move(d));
  }
  return out;
}

LoadReport run_load(const SuiteConfig& config, std::size_t drivers, const Logger& log) {
  LoadReport report;
  report.drivers = drivers;
  report.duration_s = config.duration_s;

  sim::SimulationConfig sc = config.simulation;
  sc.drivers = drivers;
  sc.duration_s = config.duration_s;
  sc.center = config.topology.graph.center;
  sc.radius_m = config.topology.graph.radius_m;
  sc.seed = config.topology.graph.seed;
  auto graph = topology::load_graph(config.topology.graph);
  auto paths = sim::generate_paths(graph, sc.paths, sc.seed, sc.center, sc.endpoint_distance_m);
  const sim::World world = sim::build_world(sc, std::move(graph), std::move(paths));
  report.r_min = sc.r_min();

  auto topo = topology::Topology::launch(config.topology);
  sc.target = topo->balancer_url();
  const std::string hub_address = topo->address_of("hub");

  std::mutex mutex;
  std::map<std::string, MainObservation> main;
  std::vector<std::uint64_t> main_storage_seqs;  // main seqs whose type the storage stream keeps
  std::map<std::string, EpochMs> storage;
  std::vector<std::uint64_t> storage_seqs;
  const auto storage_types = config.topology.hub.storage_types;

  hub::StreamClient main_client(
      hub_address, hub::StreamName::main,
      [&](const StreamItem& item, EpochMs received) {
        std::lock_guard lock(mutex);
        const auto type = item.event.type();
        main[item.event.event_id] = {item.seq, type, item.event.accepted_at.value_or(0), received};
        if (storage_types.contains(type)) main_storage_seqs.push_back(item.seq);
      },
      0);
  hub::StreamClient storage_client(
      hub_address, hub::StreamName::storage,
      [&](const StreamItem& item, EpochMs received) {
        std::lock_guard lock(mutex);
        storage.emplace(item.event.event_id, received);
        storage_seqs.push_back(item.seq);
      },
      0);
  main_client.start();
  storage_client.start();

  UtilizationSampler sampler(topology_counters(*topo));
  std::mutex sampler_mutex;
  std::condition_variable sampler_cv;
  bool sampler_stop = false;
  std::vector<UtilizationSample> util;
  sampler.sample(-1);
  const auto run_start = std::chrono::steady_clock::now();
  std::thread sampler_thread([&] {
    std::unique_lock lock(sampler_mutex);
    for (int minute = 0;; ++minute) {
      const auto at = run_start + std::chrono::seconds(60 * (minute + 1));
      if (sampler_cv.wait_until(lock, at, [&] { return sampler_stop; })) return;
      auto rows = sampler.sample(minute);
      util.insert(util.end(), rows.begin(), rows.end());
      log_line(log, "n=" + std::to_string(drivers) + " minute " + std::to_string(minute) + " sampled");
    }
  });

  log_line(log, "n=" + std::to_string(drivers) + ": simulating for " + std::to_string(config.duration_s) + " s");
  sim::SimulationResult result = sim::run_simulation(world, sc);
  {
    std::lock_guard lock(sampler_mutex);
    sampler_stop = true;
  }
  sampler_cv.notify_all();
  sampler_thread.join();
  report.aborted = result.aborted;

  if (auto m = fetch_metrics(hub_address)) {
    const auto head = static_cast<std::uint64_t>((*m)["head_seq"]);
    const auto wait = std::chrono::milliseconds(static_cast<std::int64_t>(config.drain_s * 1000));
    main_client.wait_for_seq(head, wait);
    storage_client.wait_for_seq(head, wait);
    if (auto after = fetch_metrics(hub_address)) m = after;
    report.hub_admitted = static_cast<std::uint64_t>((*m)["admitted"]);
    report.hub_saturated_batches = static_cast<std::uint64_t>((*m)["saturated_batches"]);
  } else {
    report.error = "hub metrics unavailable after the run";
  }
  main_client.stop();
  storage_client.stop();
  topo->shutdown();

  // Rates per minute of the run.
  const EpochMs t0 = result.started_at;
  const int minutes = static_cast<int>(std::ceil(config.duration_s / 60.0));
  report.rates.resize(static_cast<std::size_t>(std::max(minutes, 0)));
  for (int i = 0; i < minutes; ++i) report.rates[static_cast<std::size_t>(i)].minute = i;
  auto bucket = [&](EpochMs t) -> RateRow* {
    if (t < t0) return nullptr;
    const auto m = static_cast<std::size_t>((t - t0) / 60'000);
    return m < report.rates.size() ? &report.rates[m] : nullptr;
  };
  for (const auto& [id, obs] : main) {
    if (auto* row = bucket(obs.accepted_at)) ++row->events_main;
  }
  for (const auto& [id, at] : storage) {
    if (auto* row = bucket(at)) ++row->events_storage;
  }
  for (const auto& r : result.records) {
    if (r.response_code == 200) {
      ++report.acknowledged;
    } else {
      ++report.rejected;
      if (r.response_code == 503) report.saturated = true;
      if (auto* row = bucket(r.sent_at)) ++row->rejected;
    }
  }
  report.saturated = report.saturated || report.hub_saturated_batches > 0;

  const int full_minutes = static_cast<int>(config.duration_s / 60.0);
  const int first = std::min(config.warmup_minutes, std::max(full_minutes - 1, 0));
  double sum = 0.0;
  int counted = 0;
  for (int m = first; m < full_minutes; ++m) {
    sum += static_cast<double>(report.rates[static_cast<std::size_t>(m)].events_main);
    ++counted;
  }
  report.events_per_minute = counted > 0 ? sum / counted : 0.0;
  report.post_rate = sim::post_rate(result.records, result.all_started_at, t0 + static_cast<EpochMs>(config.duration_s * 1000));
  report.client_connections = result.connections;

  report.main_events = main.size();
  report.storage_events = storage.size();
  std::sort(main_storage_seqs.begin(), main_storage_seqs.end());
  report.storage_is_filtered_main = storage_seqs == main_storage_seqs;

  std::mt19937_64 rng(sc.seed ^ drivers);
  auto join = measure_delays(result.records, main, storage, config.delay_sample_rate, rng);
  report.lost = join.lost;
  report.delays = std::move(join.samples);
  std::vector<double> dc, ds;
  for (const auto& d : report.delays) {
    dc.push_back(d.d_collector_ms());
    if (auto s = d.d_storage_ms()) ds.push_back(*s);
  }
  report.d_collector = stats::summarize(dc);
  report.d_storage = stats::summarize(ds);

  add_collector_aggregates(util);
  report.utilization = std::move(util);
  report.mean_utilization = mean_utilization(report.utilization, first, full_minutes - 1);

  if (!config.out_dir.empty()) {
    const auto dir = std::filesystem::path(config.out_dir) / ("n_" + std::to_string(drivers));
    std::filesystem::create_directories(dir);
    sim::write_client_metrics((dir / "client_metrics.csv").string(), result.records);
  }
  return report;
}

void fit_suite(SuiteReport& report) {
  std::vector<double> n, rate, hub_util;
  report.first_saturated_load.reset();
  for (const auto& l : report.loads) {
    if (l.saturated && !report.first_saturated_load) report.first_saturated_load = l.drivers;
    if (l.aborted || l.saturated || !l.error.empty()) continue;
    n.push_back(static_cast<double>(l.drivers));
    rate.push_back(l.events_per_minute);
    auto it = l.mean_utilization.find("hub_main");
    hub_util.push_back(it == l.mean_utilization.end() ? 0.0 : it->second);
  }
  std::set<double> distinct(n.begin(), n.end());
  if (distinct.size() >= 2) {
    report.rate_fit = stats::linear_fit(n, rate);
    std::set<double> distinct_rates(rate.begin(), rate.end());
    if (distinct_rates.size() >= 2) report.hub_utilization = stats::linear_fit(rate, hub_util);
  }
}

SuiteReport run_suite(const SuiteConfig& config, const Logger& log) {
  SuiteReport report;
  for (auto n : config.loads) {
    LoadReport load;
    try {
      load = run_load(config, n, log);
    } catch (const std::exception& e) {
      load.drivers = n;
      load.duration_s = config.duration_s;
      load.error = e.what();
      log_line(log, "n=" + std::to_string(n) + " failed: " + e.what());
    }
    if (!config.out_dir.empty()) {
      write_load_csvs((std::filesystem::path(config.out_dir) / ("n_" + std::to_string(n))).string(), load);
    }
    report.loads.push_back(std::move(load));
    fit_suite(report);
    if (!config.out_dir.empty()) {
      write_summary_csv((std::filesystem::path(config.out_dir) / "summary.csv").string(), report);
    }
  }
  return report;
}

void write_load_csvs(const std::string& dir, const LoadReport& report) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  char buf[64];
  {
    std::ofstream out(d / "utilization.csv");
    out << "component,minute,utilization\n";
    for (const auto& s : report.utilization) {
      std::snprintf(buf, sizeof buf, "%.6f", s.utilization);
      out << s.component << ',' << s.minute << ',' << buf << '\n';
    }
  }
  {
    std::ofstream out(d / "delays.csv");
    out << "event_id,type,d_collector_ms,d_storage_ms\n";
    for (const auto& s : report.delays) {
      out << s.event_id << ',' << to_string(s.type) << ',' << s.d_collector_ms() << ',';
      if (auto st = s.d_storage_ms()) out << *st;
      out << '\n';
    }
  }
  {
    std::ofstream out(d / "rates.csv");
    out << "minute,events_main,events_storage,rejected\n";
    for (const auto& r : report.rates) {
      out << r.minute << ',' << r.events_main << ',' << r.events_storage << ',' << r.rejected << '\n';
    }
  }
}

namespace {

const std::vector<std::string> kSummaryComponents{"balancer", "collectors_sum", "collectors_mean",
                                                  "shortterm", "hub_main",       "hub_storage"};

}  // namespace

void write_summary_csv(const std::string& path, const SuiteReport& report) {
  std::ofstream out(path);
  out << "drivers,events_per_minute,post_rate,r_min,connections,acknowledged,rejected,main_events,storage_events,"
         "hub_admitted,lost,storage_matches,saturated,aborted,"
         "d_collector_mean,d_collector_ci_low,d_collector_ci_high,d_collector_n,"
         "d_storage_mean,d_storage_ci_low,d_storage_ci_high,d_storage_n";
  for (const auto& c : kSummaryComponents) out << ",util_" << c;
  out << ",error\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  for (const auto& l : report.loads) {
    out << l.drivers << ',' << num(l.events_per_minute) << ',' << num(l.post_rate) << ',' << num(l.r_min) << ','
        << l.client_connections << ',' << l.acknowledged << ',' << l.rejected << ',' << l.main_events << ','
        << l.storage_events << ',' << l.hub_admitted << ',' << l.lost << ',' << l.storage_is_filtered_main << ','
        << l.saturated << ',' << l.aborted << ',' << num(l.d_collector.mean) << ',' << num(l.d_collector.ci95_low)
        << ',' << num(l.d_collector.ci95_high) << ',' << l.d_collector.count << ',' << num(l.d_storage.mean) << ','
        << num(l.d_storage.ci95_low) << ',' << num(l.d_storage.ci95_high) << ',' << l.d_storage.count;
    for (const auto& c : kSummaryComponents) {
      auto it = l.mean_utilization.find(c);
      out << ',' << (it == l.mean_utilization.end() ? std::string() : num(it->second));
    }
    std::string err = l.error;
    std::replace(err.begin(), err.end(), ',', ';');
    out << ',' << err << '\n';
  }
  if (report.rate_fit || report.hub_utilization) {
    std::ofstream fits(std::filesystem::path(path).parent_path() / "fits.csv");
    fits << "fit,slope,intercept,r_squared\n";
    if (report.rate_fit) {
      fits << "events_per_minute_vs_drivers," << num(report.rate_fit->slope) << ','
           << num(report.rate_fit->intercept) << ',' << num(report.rate_fit->r_squared) << '\n';
    }
    if (report.hub_utilization) {
      fits << "hub_utilization_vs_events_per_minute," << num(report.hub_utilization->slope) << ','
           << num(report.hub_utilization->intercept) << ',' << num(report.hub_utilization->r_squared) << '\n';
    }
  }
}

}  // namespace hermes::bench
