#pragma once

#include <atomic>
#include <cstdint>

namespace hermes {

/// Cumulative CPU time a component spent handling work.
class BusyCounter {
 public:
  void add(std::int64_t ns) { ns_.fetch_add(ns, std::memory_order_relaxed); }
  std::int64_t total_ns() const { return ns_.load(std::memory_order_relaxed); }

 private:
  std::atomic<std::int64_t> ns_{0};
};

/// Charges the calling thread's CPU time to a counter for the scope's
/// lifetime. Scopes nest exclusively: while an inner scope is open, the outer
/// one is paused, so co-located components are not double-charged.
class ScopedBusy {
 public:
  explicit ScopedBusy(BusyCounter& counter);
  ~ScopedBusy();

  ScopedBusy(const ScopedBusy&) = delete;
  ScopedBusy& operator=(const ScopedBusy&) = delete;

 private:
  void pause(std::int64_t now);
  void resume(std::int64_t now);

  BusyCounter& counter_;
  ScopedBusy* parent_;
  std::int64_t started_;
};

}  // namespace hermes
