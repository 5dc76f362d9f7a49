#pragma once

#include <signal.h>
#include <sys/resource.h>

#include <atomic>

namespace hermes::tools {

inline std::atomic<bool> g_stop{false};

inline void on_signal(int) { g_stop = true; }

inline void install_signal_handlers() {
  struct sigaction sa {};
  sa.sa_handler = on_signal;
  sigemptyset(&sa.sa_mask);
  sigaction(SIGINT, &sa, nullptr);
  sigaction(SIGTERM, &sa, nullptr);
  signal(SIGPIPE, SIG_IGN);
}

/// Every driver and proxied connection holds a descriptor; lift the soft
/// limit to the hard one.
inline void raise_fd_limit() {
  rlimit rl{};
  if (getrlimit(RLIMIT_NOFILE, &rl) == 0 && rl.rlim_cur < rl.rlim_max) {
    rl.rlim_cur = rl.rlim_max;
    setrlimit(RLIMIT_NOFILE, &rl);
  }
}

}  // namespace hermes::tools
