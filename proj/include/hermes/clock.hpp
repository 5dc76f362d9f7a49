#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>

namespace hermes {

/// Milliseconds since the Unix epoch. Every timestamp on the wire uses it.
using EpochMs = std::int64_t;

inline EpochMs now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

/// CPU time consumed by the calling thread, in nanoseconds.
inline std::int64_t thread_cpu_ns() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<std::int64_t>(ts.tv_sec) * 1'000'000'000 + ts.tv_nsec;
}

}  // namespace hermes
