// simulate: synthetic driver load against a collector endpoint.
//
//   simulate --drivers N --paths P --center LAT,LON --radius M --seed S
//            --duration SECS --target URL --out DIR [--offline]

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "common.hpp"
#include "hermes/simulator.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

hermes::geo::GeoPoint parse_center(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw CLI::ValidationError("--center", "expected LAT,LON");
  return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
}

}  // namespace

int main(int argc, char** argv) {
  hermes::tools::raise_fd_limit();
  CLI::App app{"Simulate drivers posting events to a collector endpoint"};

  hermes::sim::SimulationConfig config;
  std::string center = "37.3891,-5.9845";
  std::string out_dir = "sim-out";
  std::string graph_file, paths_file;
  bool offline = false;

  app.add_option("--drivers", config.drivers, "Number of drivers")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--paths", config.paths, "Number of distinct paths")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--center", center, "City center as LAT,LON")->capture_default_str();
  app.add_option("--radius", config.radius_m, "City radius in meters")->capture_default_str();
  app.add_option("--endpoint-distance", config.endpoint_distance_m,
                 "Maximum distance of path endpoints from the center, meters (0: anywhere)");
  app.add_option("--seed", config.seed, "Random seed")->capture_default_str();
  app.add_option("--duration", config.duration_s, "Seconds to simulate")->capture_default_str();
  app.add_option("--tick", config.tick_ms, "Simulation step in milliseconds")->capture_default_str();
  app.add_option("--target", config.target, "Collector or balancer URL")->capture_default_str();
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--graph", graph_file, "Reuse a road graph JSON file instead of generating one");
  app.add_option("--paths-file", paths_file, "Reuse a paths JSON file (requires --graph)");
  app.add_flag("--offline", offline, "Run as fast as possible without a network target; write events.ndjson");
  CLI11_PARSE(app, argc, argv);

  try {
    config.center = parse_center(center);
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path out(out_dir);

    hermes::sim::World world;
    if (!graph_file.empty()) {
      auto graph = hermes::sim::RoadGraph::from_json(read_file(graph_file));
      auto paths = paths_file.empty() ? hermes::sim::generate_paths(graph, config.paths, config.seed, config.center,
                                                                    config.endpoint_distance_m)
                                      : hermes::sim::paths_from_json(read_file(paths_file), graph);
      world = hermes::sim::build_world(config, std::move(graph), std::move(paths));
    } else {
      world = hermes::sim::build_world(config);
    }
    std::ofstream(out / "graph.json") << world.graph.to_json();
    std::ofstream(out / "paths.json") << hermes::sim::paths_to_json(world.paths);
    std::cerr << "graph: " << world.graph.nodes().size() << " nodes, " << world.graph.edges().size()
              << " edges; " << world.paths.size() << " paths; " << world.profiles.size() << " drivers\n";

    if (offline) {
      std::ofstream events(out / "events.ndjson");
      std::size_t count = 0;
      hermes::sim::run_offline(world, config, hermes::now_ms(), [&](const hermes::sim::TimedEvent& e) {
        events << hermes::encode(e.event) << '\n';
        ++count;
      });
      std::cerr << count << " events written to " << (out / "events.ndjson").string() << '\n';
      return 0;
    }

    hermes::tools::install_signal_handlers();
    auto result = hermes::sim::run_simulation(world, config, &hermes::tools::g_stop);
    hermes::sim::write_client_metrics((out / "client_metrics.csv").string(), result.records);
    const double rate = hermes::sim::post_rate(result.records, result.all_started_at,
                                                  result.started_at + static_cast<hermes::EpochMs>(config.duration_s * 1000));
    std::fprintf(stderr, "%zu requests, %zu failed, %zu connections, %.2f req/s after ramp-up (r_min %.2f)%s\n",
                 result.requests, result.failures, result.connections, rate, config.r_min(),
                 result.aborted ? ", ABORTED" : "");
    return result.aborted ? 2 : 0;
  } catch (const std::exception& e) {
    std::cerr << "simulate: " << e.what() << '\n';
    return 1;
  }
}
