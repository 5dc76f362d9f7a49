#include <atomic>
#include <thread>

#include "hermes/streamhub.hpp"
#include "http_pool.hpp"

namespace hermes::hub {

// --- HttpPublisher ----------------------------------------------------------

struct HttpPublisher::Impl {
  explicit Impl(std::string address) : pool(std::move(address), 10) {}
  detail::ClientPool pool;
};

HttpPublisher::HttpPublisher(std::string address) : impl_(std::make_unique<Impl>(std::move(address))) {}
HttpPublisher::~HttpPublisher() = default;

Publisher::Outcome HttpPublisher::publish(const std::vector<EventEnvelope>& events) {
  auto client = impl_->pool.lease();
  auto res = client->Post("/v1/publish", encode_batch(events), "application/x-ndjson");
  if (!res) return Outcome::unreachable;
  if (res->status == 200) return Outcome::ok;
  if (res->status == 503) return Outcome::saturated;
  return Outcome::unreachable;
}

// --- HubServer --------------------------------------------------------------

namespace {
constexpr auto kPollSlice = std::chrono::milliseconds(250);
constexpr auto kKeepAliveInterval = std::chrono::seconds(15);
constexpr std::string_view kKeepAliveLine = ": keep-alive";
}  // namespace

struct HubServer::Impl {
  Impl(StreamHub& h, std::size_t threads) : hub(h), runner(threads, 30) {}

  void route() {
    auto& srv = runner.server();
    srv.Post("/v1/publish", [this](const httplib::Request& req, httplib::Response& res) {
      ScopedBusy busy(hub.busy(StreamName::main));
      std::vector<EventEnvelope> events;
      try {
        events = decode_batch(req.body);
      } catch (const ParseError& ex) {
        res.status = 400;
        res.set_content(ex.what(), "text/plain");
        return;
      }
      auto r = hub.publish(events);
      if (r.status != PublishResult::Status::ok) {
        res.status = 503;
        res.set_content(r.status == PublishResult::Status::saturated ? "saturated" : "closed", "text/plain");
        return;
      }
      res.set_content("{\"accepted\":" + std::to_string(r.accepted) +
                          ",\"duplicates\":" + std::to_string(r.duplicates) + "}",
                      "application/json");
    });

    srv.Get(R"(/v1/streams/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto stream = parse_stream(std::string(req.matches[1]));
      if (!stream) {
        res.status = 404;
        res.set_content("unknown stream", "text/plain");
        return;
      }
      std::optional<std::uint64_t> from;
      if (req.has_param("from_seq")) {
        try {
          from = std::stoull(req.get_param_value("from_seq"));
        } catch (const std::exception&) {
          res.status = 400;
          res.set_content("bad from_seq", "text/plain");
          return;
        }
      }
      std::shared_ptr<Subscription> sub;
      try {
        sub = hub.subscribe(*stream, from);
      } catch (const Gone& ex) {
        res.status = 410;
        res.set_content(ex.what(), "text/plain");
        return;
      }
      // Comment lines (": cursor N") report the subscription position, so
      // clients learn progress through stretches the filter skips.
      auto idle = std::make_shared<std::chrono::milliseconds>(0);
      auto reported = std::make_shared<std::optional<std::uint64_t>>();
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "application/x-ndjson",
          [this, sub, idle, reported, stream = *stream](std::size_t, httplib::DataSink& sink) {
            std::string buf;
            if (!reported->has_value()) {
              **reported = sub->cursor();
              buf = ": cursor " + std::to_string(**reported) + "\n";
              if (!sink.write(buf.data(), buf.size())) return false;
              buf.clear();
            }
            auto items = sub->fetch(kPollSlice);
            const auto cursor = sub->cursor();
            if (items.empty() && cursor == **reported) {
              if (sub->closed() || stopping.load()) {
                sink.done();
                return true;
              }
              *idle += kPollSlice;
              if (*idle < kKeepAliveInterval) return true;
              *idle = std::chrono::milliseconds(0);
              buf = std::string(kKeepAliveLine) + " " + std::to_string(cursor) + "\n";
              return sink.write(buf.data(), buf.size());
            }
            *idle = std::chrono::milliseconds(0);
            ScopedBusy busy(hub.busy(stream));
            for (const auto& rec : items) {
              buf += rec->line;
              buf += '\n';
            }
            if (items.empty() || items.back()->seq != cursor) buf += ": cursor " + std::to_string(cursor) + "\n";
            **reported = cursor;
            return sink.write(buf.data(), buf.size());
          });
    });

    srv.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
    srv.Get("/v1/metrics", [this](const httplib::Request&, httplib::Response& res) {
      auto s = hub.stats();
      res.set_content(detail::render_metrics({
                          {"busy_cpu_ns", static_cast<double>(hub.busy(StreamName::main).total_ns())},
                          {"storage_busy_cpu_ns", static_cast<double>(hub.busy(StreamName::storage).total_ns())},
                          {"head_seq", static_cast<double>(s.head_seq)},
                          {"admitted", static_cast<double>(s.admitted)},
                          {"duplicates", static_cast<double>(s.duplicates)},
                          {"saturated_batches", static_cast<double>(s.saturated_batches)},
                          {"saturated_events", static_cast<double>(s.saturated_events)},
                          {"backlog", static_cast<double>(s.backlog)},
                          {"subscribers", static_cast<double>(s.subscribers)},
                      }),
                      "text/csv");
    });
  }

  StreamHub& hub;
  detail::ServerRunner runner;
  std::atomic<bool> stopping{false};
};

HubServer::HubServer(StreamHub& hub, std::size_t max_threads) : impl_(std::make_unique<Impl>(hub, max_threads)) {
  impl_->route();
}
HubServer::~HubServer() { stop(); }
bool HubServer::start(const std::string& host, int port) { return impl_->runner.start(host, port); }
void HubServer::stop() {
  impl_->stopping = true;
  impl_->runner.stop();
}
int HubServer::port() const { return impl_->runner.port(); }

// --- StreamClient -----------------------------------------------------------

struct StreamClient::Impl {
  std::string address;
  StreamName stream;
  Handler handler;
  std::optional<std::uint64_t> from_seq;

  std::thread thread;
  std::atomic<bool> stopping{false};
  std::mutex client_mutex;
  httplib::Client* active = nullptr;

  mutable std::mutex progress_mutex;
  mutable std::condition_variable progress;
  std::uint64_t last_seq = 0;
  std::uint64_t received = 0;
  std::uint64_t reconnects = 0;
  bool positioned = false;

  void run() {
    std::string pending;
    bool first = true;
    while (!stopping) {
      httplib::Client cli(address);
      cli.set_connection_timeout(2, 0);
      cli.set_read_timeout(60, 0);
      {
        std::lock_guard lock(client_mutex);
        if (stopping) break;
        active = &cli;
      }
      std::string path = "/v1/streams/" + std::string(to_string(stream));
      std::optional<std::uint64_t> resume;
      {
        std::lock_guard lock(progress_mutex);
        if (positioned) resume = last_seq;
        if (!first) ++reconnects;
      }
      if (resume) path += "?from_seq=" + std::to_string(*resume);
      first = false;
      pending.clear();

      bool gone = false;
      cli.Get(
          path,
          [&](const httplib::Response& r) {
            gone = r.status == 410;
            return r.status == 200;
          },
          [&](const char* data, std::size_t len) {
            pending.append(data, len);
            std::size_t pos = 0;
            for (auto nl = pending.find('\n'); nl != std::string::npos; nl = pending.find('\n', pos)) {
              std::string_view line(pending.data() + pos, nl - pos);
              pos = nl + 1;
              if (line.empty()) continue;
              if (line.front() == ':') {
                // ": cursor N" / ": keep-alive N"
                auto sp = line.rfind(' ');
                if (sp != std::string_view::npos) {
                  try {
                    auto seq = std::stoull(std::string(line.substr(sp + 1)));
                    std::lock_guard lock(progress_mutex);
                    last_seq = std::max(last_seq, static_cast<std::uint64_t>(seq));
                    positioned = true;
                  } catch (const std::exception&) {
                  }
                  progress.notify_all();
                }
                continue;
              }
              StreamItem item;
              try {
                item = decode_stream_line(line);
              } catch (const ParseError&) {
                continue;
              }
              const auto at = now_ms();
              handler(item, at);
              {
                std::lock_guard lock(progress_mutex);
                last_seq = item.seq;
                positioned = true;
                ++received;
              }
              progress.notify_all();
            }
            pending.erase(0, pos);
            return !stopping.load();
          });
      {
        std::lock_guard lock(client_mutex);
        active = nullptr;
      }
      if (gone) {
        // Our position fell out of the ring; there is nothing to resume.
        std::lock_guard lock(progress_mutex);
        positioned = false;
      }
      if (!stopping) std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
  }
};

StreamClient::StreamClient(std::string address, StreamName stream, Handler handler,
                           std::optional<std::uint64_t> from_seq)
    : impl_(std::make_unique<Impl>()) {
  impl_->address = std::move(address);
  impl_->stream = stream;
  impl_->handler = std::move(handler);
  impl_->from_seq = from_seq;
  if (from_seq) {
    impl_->last_seq = *from_seq;
    impl_->positioned = true;
  }
}

StreamClient::~StreamClient() { stop(); }

void StreamClient::start() {
  impl_->thread = std::thread([this] { impl_->run(); });
}

void StreamClient::stop() {
  {
    std::lock_guard lock(impl_->client_mutex);
    impl_->stopping = true;
    if (impl_->active != nullptr) impl_->active->stop();
  }
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::uint64_t StreamClient::last_seq() const {
  std::lock_guard lock(impl_->progress_mutex);
  return impl_->last_seq;
}

std::uint64_t StreamClient::received() const {
  std::lock_guard lock(impl_->progress_mutex);
  return impl_->received;
}

std::uint64_t StreamClient::reconnects() const {
  std::lock_guard lock(impl_->progress_mutex);
  return impl_->reconnects;
}

bool StreamClient::wait_for_seq(std::uint64_t seq, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(impl_->progress_mutex);
  return impl_->progress.wait_for(lock, timeout, [&] { return impl_->last_seq >= seq; });
}

}  // namespace hermes::hub
