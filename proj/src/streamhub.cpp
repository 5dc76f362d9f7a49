#include "hermes/streamhub.hpp"

#include <algorithm>

namespace hermes::hub {

std::string_view to_string(StreamName s) { return s == StreamName::main ? "main" : "storage"; }

std::optional<StreamName> parse_stream(std::string_view s) {
  if (s == "main") return StreamName::main;
  if (s == "storage") return StreamName::storage;
  return std::nullopt;
}

struct Subscription::State {
  StreamName stream;
  std::uint64_t cursor;  // last seq scanned; guarded by the hub mutex
};

Subscription::Subscription(StreamHub& hub, std::shared_ptr<State> state) : hub_(hub), state_(std::move(state)) {}

Subscription::~Subscription() { hub_.unsubscribe(state_.get()); }

StreamName Subscription::stream() const { return state_->stream; }

std::uint64_t Subscription::cursor() const {
  std::lock_guard lock(hub_.mutex_);
  return state_->cursor;
}

std::vector<std::shared_ptr<const Record>> Subscription::fetch(std::chrono::milliseconds timeout,
                                                               std::size_t max_scan) {
  ScopedBusy busy(hub_.busy(state_->stream));
  std::vector<std::shared_ptr<const Record>> out;
  std::unique_lock lock(hub_.mutex_);
  hub_.arrived_.wait_for(lock, timeout, [&] { return hub_.head_seq_ > state_->cursor || hub_.shut_down_; });
  if (hub_.head_seq_ == state_->cursor) {
    closed_ = hub_.shut_down_;
    return out;
  }
  const std::uint64_t oldest = hub_.ring_.front()->seq;
  // Backpressure keeps every undelivered event inside the ring.
  std::size_t index = static_cast<std::size_t>(std::max(state_->cursor + 1, oldest) - oldest);
  std::size_t scanned = 0;
  while (index < hub_.ring_.size() && scanned < max_scan) {
    const auto& rec = hub_.ring_[index];
    if (hub_.accepts(state_->stream, rec->type)) out.push_back(rec);
    state_->cursor = rec->seq;
    ++index;
    ++scanned;
  }
  return out;
}

StreamHub::StreamHub(HubConfig config) : config_(std::move(config)) {}

StreamHub::~StreamHub() { shutdown(); }

bool StreamHub::accepts(StreamName stream, EventType type) const {
  return stream == StreamName::main || config_.storage_types.contains(type);
}

std::uint64_t StreamHub::min_cursor_locked() const {
  std::uint64_t m = head_seq_;
  for (const auto& s : subscribers_) m = std::min(m, s->cursor);
  return m;
}

PublishResult StreamHub::publish(const std::vector<EventEnvelope>& events) {
  ScopedBusy busy(busy_main_);
  PublishResult result;

  // Encoding happens before taking the lock; the seq field is patched in
  // once the sequence number is known.
  std::vector<std::string> lines;
  lines.reserve(events.size());
  for (const auto& e : events) lines.push_back(encode_stream_line(0, e));

  {
    std::lock_guard lock(mutex_);
    if (shut_down_) {
      result.status = PublishResult::Status::closed;
      return result;
    }
    std::vector<std::size_t> fresh;
    std::unordered_set<std::string_view> in_batch;
    for (std::size_t i = 0; i < events.size(); ++i) {
      const auto& id = events[i].event_id;
      if (seen_ids_.contains(id) || !in_batch.insert(id).second) {
        ++result.duplicates;
        continue;
      }
      fresh.push_back(i);
    }
    const std::uint64_t backlog = head_seq_ - min_cursor_locked();
    if (backlog + fresh.size() > config_.capacity) {
      ++counters_.saturated_batches;
      counters_.saturated_events += events.size();
      result.status = PublishResult::Status::saturated;
      result.duplicates = 0;
      return result;
    }
    for (auto i : fresh) {
      auto rec = std::make_shared<Record>();
      rec->seq = ++head_seq_;
      rec->type = events[i].type();
      rec->event_id = events[i].event_id;
      // encode_stream_line(0, ...) starts with {"seq":0,
      rec->line = "{\"seq\":" + std::to_string(rec->seq) + lines[i].substr(8);
      ring_.push_back(std::move(rec));
      if (ring_.size() > config_.capacity) ring_.pop_front();

      seen_ids_.insert(events[i].event_id);
      seen_order_.push_back(events[i].event_id);
      if (seen_order_.size() > 2 * config_.capacity) {
        seen_ids_.erase(seen_order_.front());
        seen_order_.pop_front();
      }
    }
    result.accepted = fresh.size();
    counters_.admitted += fresh.size();
    counters_.duplicates += result.duplicates;
  }
  if (result.accepted > 0) arrived_.notify_all();
  return result;
}

std::unique_ptr<Subscription> StreamHub::subscribe(StreamName stream, std::optional<std::uint64_t> from_seq) {
  std::lock_guard lock(mutex_);
  std::uint64_t cursor = head_seq_;
  if (from_seq) {
    const std::uint64_t oldest = ring_.empty() ? head_seq_ + 1 : ring_.front()->seq;
    if (*from_seq > head_seq_ || *from_seq + 1 < oldest)
      throw Gone("from_seq " + std::to_string(*from_seq) + " is not retained");
    cursor = *from_seq;
  }
  auto state = std::make_shared<Subscription::State>(Subscription::State{stream, cursor});
  subscribers_.push_back(state);
  return std::unique_ptr<Subscription>(new Subscription(*this, std::move(state)));
}

void StreamHub::unsubscribe(const Subscription::State* state) {
  std::lock_guard lock(mutex_);
  std::erase_if(subscribers_, [&](const auto& s) { return s.get() == state; });
}

void StreamHub::shutdown() {
  {
    std::lock_guard lock(mutex_);
    shut_down_ = true;
  }
  arrived_.notify_all();
}

bool StreamHub::is_shut_down() const {
  std::lock_guard lock(mutex_);
  return shut_down_;
}

StreamHub::Stats StreamHub::stats() const {
  std::lock_guard lock(mutex_);
  Stats s = counters_;
  s.head_seq = head_seq_;
  s.oldest_seq = ring_.empty() ? head_seq_ + 1 : ring_.front()->seq;
  s.backlog = head_seq_ - min_cursor_locked();
  s.subscribers = subscribers_.size();
  return s;
}

Publisher::Outcome LocalPublisher::publish(const std::vector<EventEnvelope>& events) {
  switch (hub_.publish(events).status) {
    case PublishResult::Status::ok: return Outcome::ok;
    case PublishResult::Status::saturated: return Outcome::saturated;
    case PublishResult::Status::closed: return Outcome::unreachable;
  }
  return Outcome::unreachable;
}

}  // namespace hermes::hub
