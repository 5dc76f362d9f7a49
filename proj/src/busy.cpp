#include "hermes/busy.hpp"

#include "hermes/clock.hpp"

namespace hermes {
namespace {
thread_local ScopedBusy* active_scope = nullptr;
}

ScopedBusy::ScopedBusy(BusyCounter& counter) : counter_(counter), parent_(active_scope) {
  const auto now = thread_cpu_ns();
  if (parent_ != nullptr) parent_->pause(now);
  started_ = now;
  active_scope = this;
}

ScopedBusy::~ScopedBusy() {
  const auto now = thread_cpu_ns();
  pause(now);
  active_scope = parent_;
  if (parent_ != nullptr) parent_->resume(now);
}

void ScopedBusy::pause(std::int64_t now) { counter_.add(now - started_); }

void ScopedBusy::resume(std::int64_t now) { started_ = now; }

}  // namespace hermes
