// bench: multi-load experiments and their charts.
//
//   bench suite --loads 50,100,200 --duration 300 --topology FILE --out DIR
//   bench plot --in DIR

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "common.hpp"
#include "hermes/bench.hpp"

int main(int argc, char** argv) {
  hermes::tools::raise_fd_limit();
  CLI::App app{"Run load experiments against a deployment and chart the results"};
  app.require_subcommand(1);

  hermes::bench::SuiteConfig suite;
  std::string topology_file;
  std::string out_dir = "bench-out";

  auto* run = app.add_subcommand("suite", "Run one experiment per load level");
  run->add_option("--loads", suite.loads, "Driver counts, comma separated")->delimiter(',')->capture_default_str();
  run->add_option("--duration", suite.duration_s, "Seconds per load level")->capture_default_str();
  run->add_option("--topology", topology_file, "Topology JSON file (defaults apply when omitted)");
  run->add_option("--out", out_dir, "Output directory")->capture_default_str();
  run->add_option("--paths", suite.simulation.paths, "Number of distinct driver paths")->capture_default_str();
  run->add_option("--sample-rate", suite.delay_sample_rate, "Share of events used for delay statistics")
      ->capture_default_str();

  std::string plot_dir;
  auto* plot = app.add_subcommand("plot", "Render SVG charts from a suite output directory");
  plot->add_option("--in,dir", plot_dir, "Suite output directory")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*plot) {
      for (const auto& f : hermes::bench::plot_suite(plot_dir)) std::cout << f << '\n';
      return 0;
    }
    if (!topology_file.empty()) suite.topology = hermes::topology::TopologyConfig::load(topology_file);
    suite.out_dir = out_dir;
    std::filesystem::create_directories(out_dir);
    auto report = hermes::bench::run_suite(suite, [](const std::string& line) { std::cerr << line << std::endl; });

    for (const auto& l : report.loads) {
      std::printf("n=%zu events/min=%.1f post_rate=%.2f/s (r_min %.1f) acked=%llu main=%llu admitted=%llu lost=%llu "
                  "saturated=%d d_collector=%.2f ms [%.2f, %.2f] d_storage=%.2f ms%s%s\n",
                  l.drivers, l.events_per_minute, l.post_rate, l.r_min,
                  static_cast<unsigned long long>(l.acknowledged), static_cast<unsigned long long>(l.main_events),
                  static_cast<unsigned long long>(l.hub_admitted), static_cast<unsigned long long>(l.lost),
                  l.saturated, l.d_collector.mean, l.d_collector.ci95_low, l.d_collector.ci95_high, l.d_storage.mean,
                  l.error.empty() ? "" : " error: ", l.error.c_str());
    }
    if (report.rate_fit) {
      std::printf("rate fit: slope %.3f events/min per driver, R^2 %.4f\n", report.rate_fit->slope,
                  report.rate_fit->r_squared);
    }
    if (report.hub_utilization) {
      std::printf("hub utilization fit: R^2 %.4f\n", report.hub_utilization->r_squared);
    }
    if (report.first_saturated_load) std::printf("first saturated load: n=%zu\n", *report.first_saturated_load);
    hermes::bench::plot_suite(out_dir);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "bench: " << e.what() << '\n';
    return 1;
  }
}
