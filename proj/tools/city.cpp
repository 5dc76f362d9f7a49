// city: launch and stop a deployment.
//
//   city up --config topology.json [--pidfile FILE] [--detach]
//   city down [--pidfile FILE]
//   city serve --config topology.json --component NAME
//   city default-config

#include <signal.h>
#include <sys/stat.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "common.hpp"
#include "hermes/topology.hpp"

namespace {

using hermes::topology::TopologyConfig;

constexpr const char* kDefaultPidfile = "/tmp/hermes-city.pid";

TopologyConfig load_config(const std::string& path) {
  return path.empty() ? TopologyConfig{} : TopologyConfig::load(path);
}

void detach() {
  if (pid_t pid = fork(); pid < 0) {
    throw std::runtime_error("fork failed");
  } else if (pid > 0) {
    std::_Exit(0);
  }
  setsid();
  if (FILE* f = std::freopen("/dev/null", "r", stdin); f == nullptr) std::perror("stdin");
}

int cmd_up(const std::string& config_path, const std::string& pidfile, bool background) {
  auto config = load_config(config_path);
  if (background) detach();
  hermes::tools::install_signal_handlers();
  auto topo = hermes::topology::Topology::launch(config);
  std::ofstream(pidfile) << getpid() << '\n';
  for (const auto& e : topo->endpoints()) std::cout << e.component << ' ' << e.address << '\n';
  std::cout << "healthy; stop with `city down` or Ctrl-C" << std::endl;
  while (!hermes::tools::g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  topo->shutdown();
  std::remove(pidfile.c_str());
  std::cout << "stopped" << std::endl;
  return 0;
}

int cmd_down(const std::string& pidfile, double timeout_s) {
  std::ifstream in(pidfile);
  pid_t pid = 0;
  if (!(in >> pid) || pid <= 0) {
    std::cerr << "no running deployment (" << pidfile << " missing)\n";
    return 0;
  }
  if (kill(pid, SIGTERM) != 0) {
    std::cerr << "process " << pid << " is gone\n";
    std::remove(pidfile.c_str());
    return 0;
  }
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
  while (kill(pid, 0) == 0) {
    if (std::chrono::steady_clock::now() >= deadline) {
      std::cerr << "process " << pid << " did not stop in time; killing\n";
      kill(pid, SIGKILL);
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  std::remove(pidfile.c_str());
  return 0;
}

int cmd_serve(const std::string& config_path, const std::string& component) {
  hermes::tools::install_signal_handlers();
  hermes::topology::serve_component(load_config(config_path), component, hermes::tools::g_stop);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  hermes::tools::raise_fd_limit();
  CLI::App app{"Launch and stop a streaming deployment"};
  app.require_subcommand(1);

  std::string config_path, pidfile = kDefaultPidfile, component;
  bool background = false;
  double timeout_s = 30.0;

  auto* up = app.add_subcommand("up", "Start every configured component and wait until stopped");
  up->add_option("--config", config_path, "Topology JSON file (defaults apply when omitted)");
  up->add_option("--pidfile", pidfile, "Where to record the process id")->capture_default_str();
  up->add_flag("--detach", background, "Run in the background");

  auto* down = app.add_subcommand("down", "Stop a deployment started with `up`");
  down->add_option("--pidfile", pidfile, "Process id file written by `up`")->capture_default_str();
  down->add_option("--timeout", timeout_s, "Seconds to wait before killing")->capture_default_str();

  auto* serve = app.add_subcommand("serve", "Run a single component (used for multi-process mode)");
  serve->add_option("--config", config_path, "Topology JSON file")->required();
  serve->add_option("--component", component, "balancer, hub, shortterm or collector-<i>")->required();

  auto* defaults = app.add_subcommand("default-config", "Print the default topology configuration");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*up) return cmd_up(config_path, pidfile, background);
    if (*down) return cmd_down(pidfile, timeout_s);
    if (*serve) return cmd_serve(config_path, component);
    if (*defaults) {
      std::cout << TopologyConfig{}.to_json();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "city: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
