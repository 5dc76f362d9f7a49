#include <gtest/gtest.h>

#include <httplib.h>

#include <random>

#include "hermes/collector.hpp"
#include "hermes/road_graph.hpp"

using namespace hermes;
using namespace hermes::collector;
using namespace std::chrono_literals;

namespace {

const geo::GeoPoint kCenter{37.3891, -5.9845};

const sim::RoadGraph& city() {
  static const sim::RoadGraph g = sim::generate_graph(kCenter, 2000.0, 3);
  return g;
}

EventEnvelope location(const std::string& driver, const geo::GeoPoint& p, EpochMs at, double score = 80.0) {
  static std::mt19937_64 rng(71);
  return {make_uuid(rng), driver, at, std::nullopt, VehicleLocation{at, p.latitude, p.longitude, 5.0, 40.0, score}};
}

EventEnvelope abnormal(const std::string& driver, const geo::GeoPoint& p, EpochMs at) {
  static std::mt19937_64 rng(72);
  return {make_uuid(rng), driver, at, std::nullopt,
          AbnormalSituation{at, p.latitude, p.longitude, AbnormalKind::high_deceleration, 5.0}};
}

struct Fixture {
  explicit Fixture(hub::HubConfig hc = {}) : hub(hc), publisher(hub), service(now_ms()), stub(city()) {}
  hub::StreamHub hub;
  hub::LocalPublisher publisher;
  shortterm::LocalService service;
  longterm::RoadStub stub;
  Collector collector{CollectorConfig{}, publisher, service, stub};
};

/// Road point on the first edge, so lookups resolve to a known road.
geo::GeoPoint on_road() {
  const auto& e = city().edges().front();
  return geo::interpolate(city().point(e.a), city().point(e.b), 0.5);
}

}  // namespace

TEST(Collector, LocationGetsFeedbackAndIsPublished) {
  Fixture f;
  auto sub = f.hub.subscribe(hub::StreamName::main, 0);
  const EpochMs now = now_ms();
  const auto reply = f.collector.handle_post(encode(location("a", on_road(), now)), now);
  ASSERT_EQ(reply.status, 200);
  EXPECT_EQ(reply.content_type, "application/json");
  const auto fb = feedback_from_json(reply.body);
  EXPECT_NE(fb.road_type, RoadType::unknown);
  EXPECT_TRUE(fb.speed_limit);
  EXPECT_LE(*fb.recommended_speed, *fb.speed_limit);
  ASSERT_TRUE(fb.nearby_scores);
  EXPECT_TRUE(fb.nearby_scores->empty());
  ASSERT_TRUE(fb.traffic_alerts);

  const auto recs = sub->fetch(0ms);
  ASSERT_EQ(recs.size(), 1u);
  const auto item = decode_stream_line(recs[0]->line);
  EXPECT_EQ(item.event.accepted_at, now);
}

TEST(Collector, FeedbackCarriesNeighboursAndAlertsButNotSelf) {
  Fixture f;
  const EpochMs now = now_ms();
  const auto here = on_road();
  f.collector.handle_post(encode(location("b", geo::destination(here, 90.0, 100.0), now, 55.0)), now);
  f.collector.handle_post(encode(location("c", geo::destination(here, 0.0, 5000.0), now, 65.0)), now);
  f.collector.handle_post(encode(abnormal("b", geo::destination(here, 180.0, 50.0), now)), now);
  const auto fb = feedback_from_json(f.collector.handle_post(encode(location("a", here, now)), now).body);
  ASSERT_EQ(fb.nearby_scores->size(), 1u);
  EXPECT_EQ(fb.nearby_scores->front().driver_id, "b");
  EXPECT_EQ(fb.nearby_scores->front().score, 55.0);
  ASSERT_EQ(fb.traffic_alerts->size(), 1u);
  EXPECT_EQ(fb.traffic_alerts->front().kind, "high_deceleration");

  const auto again = feedback_from_json(f.collector.handle_post(encode(location("b", here, now)), now).body);
  for (const auto& s : *again.nearby_scores) EXPECT_NE(s.driver_id, "b");
}

TEST(Collector, InvalidEventRejectsTheWholeBatch) {
  Fixture f;
  const EpochMs now = now_ms();
  auto good = location("a", on_road(), now);
  auto bad = location("a", on_road(), now);
  std::get<VehicleLocation>(bad.body).latitude = 120.0;
  const auto reply = f.collector.handle_post(encode_batch({good, bad}), now);
  EXPECT_EQ(reply.status, 400);
  EXPECT_NE(reply.body.find("bad_coords"), std::string::npos);
  EXPECT_EQ(f.hub.stats().admitted, 0u);
  EXPECT_EQ(f.collector.handle_post("{not json", now).status, 400);
  EXPECT_EQ(f.collector.stats().rejected_invalid, 2u);
}

TEST(Collector, OversizedBatchIs413) {
  Fixture f;
  const EpochMs now = now_ms();
  std::vector<EventEnvelope> batch;
  for (int i = 0; i < 101; ++i) batch.push_back(location("a", on_road(), now));
  EXPECT_EQ(f.collector.handle_post(encode_batch(batch), now).status, 413);
  batch.pop_back();
  EXPECT_EQ(f.collector.handle_post(encode_batch(batch), now).status, 200);
  EXPECT_EQ(f.hub.stats().admitted, 100u);
}

TEST(Collector, SaturatedHubIs503) {
  Fixture f(hub::HubConfig{.capacity = 4});
  auto paused = f.hub.subscribe(hub::StreamName::storage, 0);
  const EpochMs now = now_ms();
  int ok = 0, unavailable = 0;
  for (int i = 0; i < 10; ++i) {
    const auto status = f.collector.handle_post(encode(abnormal("a", on_road(), now)), now).status;
    ok += status == 200;
    unavailable += status == 503;
  }
  EXPECT_EQ(ok, 4);
  EXPECT_EQ(unavailable, 6);
  EXPECT_EQ(f.collector.stats().rejected_unavailable, 6u);
}

TEST(Collector, BatchWithoutLocationHasEmptyBody) {
  Fixture f;
  const EpochMs now = now_ms();
  const auto reply = f.collector.handle_post(encode(abnormal("a", on_road(), now)), now);
  EXPECT_EQ(reply.status, 200);
  EXPECT_TRUE(reply.body.empty());
}

TEST(Collector, BatchFeedbackUsesNewestLocation) {
  Fixture f;
  const EpochMs now = now_ms();
  const auto far = geo::destination(kCenter, 0.0, 20'000.0);
  auto newer = location("a", far, now);
  auto older = location("a", on_road(), now - 5000);
  const auto fb = feedback_from_json(f.collector.handle_post(encode_batch({newer, older}), now).body);
  EXPECT_EQ(fb.road_type, RoadType::unknown);
  EXPECT_FALSE(fb.speed_limit);
}

TEST(Collector, TenMetreRuleSuppressesLookups) {
  for (const auto& [spacing, expected] : {std::pair{3.0, 1u}, std::pair{15.0, 20u}}) {
    Fixture f;
    const EpochMs t0 = now_ms();
    geo::GeoPoint p = on_road();
    for (int i = 0; i < 20; ++i) {
      ASSERT_EQ(f.collector.handle_post(encode(location("a", p, t0 + i * 1000)), t0 + i * 1000).status, 200);
      p = geo::destination(p, 90.0, spacing);
    }
    EXPECT_EQ(f.stub.call_count(), expected) << "spacing " << spacing;
    EXPECT_LE(f.stub.call_count(), f.collector.stats().advanced);
  }
}

TEST(Collector, LookupsNeverExceedAdvancedCount) {
  Fixture f;
  std::mt19937_64 rng(73);
  std::uniform_real_distribution<double> step(0.0, 25.0), brg(0.0, 360.0);
  const EpochMs t0 = now_ms();
  std::vector<geo::GeoPoint> pos(10, on_road());
  for (int i = 0; i < 400; ++i) {
    const auto d = i % 10;
    pos[d] = geo::destination(pos[d], brg(rng), step(rng));
    f.collector.handle_post(encode(location("d" + std::to_string(d), pos[d], t0 + i * 100)), t0 + i * 100);
  }
  EXPECT_LE(f.stub.call_count(), f.collector.stats().advanced);
  EXPECT_GT(f.stub.call_count(), 0u);
}

TEST(CollectorServer, ServesEventsHealthAndMetrics) {
  Fixture f;
  CollectorServer server(f.collector, 8);
  ASSERT_TRUE(server.start("127.0.0.1", 0));
  httplib::Client cli("127.0.0.1", server.port());
  const EpochMs now = now_ms();
  auto res = cli.Post("/v1/events", encode(location("a", on_road(), now)), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  ASSERT_TRUE(res->has_header("X-Handling-Latency-Us"));
  EXPECT_GE(std::stoll(res->get_header_value("X-Handling-Latency-Us")), 0);
  EXPECT_EQ(cli.Get("/v1/health")->status, 200);
  auto metrics = cli.Get("/v1/metrics");
  ASSERT_TRUE(metrics);
  EXPECT_NE(metrics->body.find("requests,1"), std::string::npos);
  EXPECT_NE(metrics->body.find("busy_cpu_ns,"), std::string::npos);
  server.stop();
}
