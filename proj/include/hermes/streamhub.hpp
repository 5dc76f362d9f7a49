#pragma once

#include <condition_variable>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "hermes/busy.hpp"
#include "hermes/events.hpp"

namespace hermes::hub {

inline constexpr std::size_t kDefaultCapacity = 65'536;

enum class StreamName { main, storage };
std::string_view to_string(StreamName s);
std::optional<StreamName> parse_stream(std::string_view s);

struct HubConfig {
  /// Ring size and the largest admitted-but-undelivered backlog tolerated.
  std::size_t capacity = kDefaultCapacity;
  /// Event types kept by the storage stream.
  std::set<EventType> storage_types{EventType::driving_section, EventType::abnormal_situation};
};

/// An admitted event as stored in the ring. `line` is its stream line
/// (envelope plus "seq"), without the trailing newline.
struct Record {
  std::uint64_t seq = 0;
  EventType type = EventType::vehicle_location;
  std::string event_id;
  std::string line;
};

struct PublishResult {
  enum class Status { ok, saturated, closed };
  Status status = Status::ok;
  std::size_t accepted = 0;
  std::size_t duplicates = 0;
};

/// from_seq no longer (or never) retained by the ring.
class Gone : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StreamHub;

/// Independent cursor over one stream. Not thread-safe: one reader each.
class Subscription {
 public:
  ~Subscription();
  Subscription(const Subscription&) = delete;
  Subscription& operator=(const Subscription&) = delete;

  /// Waits up to `timeout` for events past the cursor and returns the ones
  /// matching this stream's filter, in sequence order. An empty result
  /// means timeout, or end of stream when closed() is true.
  std::vector<std::shared_ptr<const Record>> fetch(std::chrono::milliseconds timeout,
                                                   std::size_t max_scan = 1024);

  /// The hub shut down and everything admitted before that was delivered.
  bool closed() const { return closed_; }
  std::uint64_t cursor() const;
  StreamName stream() const;

 private:
  friend class StreamHub;
  struct State;
  Subscription(StreamHub& hub, std::shared_ptr<State> state);

  StreamHub& hub_;
  std::shared_ptr<State> state_;
  bool closed_ = false;
};

/// Main stream plus the filtered storage stream over one ring buffer.
/// Publishes are serialized through a single admission point; each
/// subscriber advances its own cursor. Admission is refused while the
/// slowest subscriber lags more than `capacity` events behind.
class StreamHub {
 public:
  explicit StreamHub(HubConfig config = {});
  ~StreamHub();

  PublishResult publish(const std::vector<EventEnvelope>& events);

  /// Delivers events with seq > from_seq (default: only new events).
  /// Throws Gone when from_seq has been evicted or is ahead of the head.
  std::unique_ptr<Subscription> subscribe(StreamName stream, std::optional<std::uint64_t> from_seq = {});

  bool accepts(StreamName stream, EventType type) const;

  /// Refuses further publishes and lets subscribers drain, then close.
  void shutdown();
  bool is_shut_down() const;

  struct Stats {
    std::uint64_t head_seq = 0;
    std::uint64_t oldest_seq = 0;
    std::uint64_t admitted = 0;
    std::uint64_t duplicates = 0;
    std::uint64_t saturated_batches = 0;
    std::uint64_t saturated_events = 0;
    std::uint64_t backlog = 0;
    std::size_t subscribers = 0;
  };
  Stats stats() const;
  const HubConfig& config() const { return config_; }
  BusyCounter& busy(StreamName stream) { return stream == StreamName::main ? busy_main_ : busy_storage_; }

 private:
  friend class Subscription;

  std::uint64_t min_cursor_locked() const;
  void unsubscribe(const Subscription::State* state);

  HubConfig config_;
  mutable std::mutex mutex_;
  std::condition_variable arrived_;
  std::deque<std::shared_ptr<const Record>> ring_;
  std::uint64_t head_seq_ = 0;
  std::unordered_set<std::string> seen_ids_;
  std::deque<std::string> seen_order_;
  std::vector<std::shared_ptr<Subscription::State>> subscribers_;
  bool shut_down_ = false;
  Stats counters_;
  BusyCounter busy_main_;
  BusyCounter busy_storage_;
};

/// Where collectors send admitted events.
class Publisher {
 public:
  enum class Outcome { ok, saturated, unreachable };
  virtual ~Publisher() = default;
  virtual Outcome publish(const std::vector<EventEnvelope>& events) = 0;
};

class LocalPublisher final : public Publisher {
 public:
  explicit LocalPublisher(StreamHub& hub) : hub_(hub) {}
  Outcome publish(const std::vector<EventEnvelope>& events) override;

 private:
  StreamHub& hub_;
};

/// POSTs batches to a hub's /v1/publish endpoint.
class HttpPublisher final : public Publisher {
 public:
  explicit HttpPublisher(std::string address);
  ~HttpPublisher() override;
  Outcome publish(const std::vector<EventEnvelope>& events) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// HTTP face of a StreamHub: POST /v1/publish, GET /v1/streams/{main,storage}
/// (chunked NDJSON, ?from_seq=N), GET /v1/health, GET /v1/metrics.
class HubServer {
 public:
  explicit HubServer(StreamHub& hub, std::size_t max_threads = 128);
  ~HubServer();

  bool start(const std::string& host, int port);
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Long-lived HTTP subscription on a background thread. Reconnects with
/// from_seq after a dropped connection.
class StreamClient {
 public:
  using Handler = std::function<void(const StreamItem& item, EpochMs received_at)>;

  StreamClient(std::string address, StreamName stream, Handler handler,
               std::optional<std::uint64_t> from_seq = {});
  ~StreamClient();

  void start();
  /// Disconnects and joins the reader thread.
  void stop();
  std::uint64_t last_seq() const;
  std::uint64_t received() const;
  std::uint64_t reconnects() const;
  /// Blocks until last_seq() >= seq or the timeout passes.
  bool wait_for_seq(std::uint64_t seq, std::chrono::milliseconds timeout) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hermes::hub
