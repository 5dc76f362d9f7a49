#include <gtest/gtest.h>

#include <random>

#include "hermes/geo.hpp"
#include "hermes/shortterm.hpp"
#include "hermes/shortterm_http.hpp"
#include "oracles.hpp"

using namespace hermes;
using namespace hermes::shortterm;

namespace {

constexpr EpochMs kT0 = 1'700'000'000'000;
const geo::GeoPoint kCenter{37.3891, -5.9845};

geo::GeoPoint around(std::mt19937_64& rng, double radius_m) {
  std::uniform_real_distribution<double> brg(0.0, 360.0), frac(0.0, 1.0);
  return geo::destination(kCenter, brg(rng), radius_m * std::sqrt(frac(rng)));
}

}  // namespace

// Writes at every offset inside a rotation period, with rotation attempted
// every 100 ms, and checks when the entry stops being retrievable.
TEST(TwoTierStore, RetentionSandwich) {
  constexpr EpochMs kPeriod = 30'000;
  for (EpochMs offset = 0; offset < kPeriod; offset += 700) {
    TwoTierLocationStore store(kT0, kPeriod);
    EpochMs now = kT0;
    while (now < kT0 + kPeriod + offset) {
      now += 100;
      store.rotate(now);
    }
    const EpochMs written = now;
    store.record_location("d", kCenter, written);
    EpochMs gone_at = 0;
    while (gone_at == 0 && now < written + 3 * kPeriod) {
      now += 100;
      store.rotate(now);
      if (!store.last_location("d", now)) gone_at = now;
    }
    ASSERT_NE(gone_at, 0) << "offset " << offset;
    const EpochMs lifetime = gone_at - written;
    EXPECT_GE(lifetime, kPeriod) << "offset " << offset;
    EXPECT_LE(lifetime, 2 * kPeriod) << "offset " << offset;
  }
}

TEST(TwoTierStore, RefreshKeepsEntryAlive) {
  TwoTierLocationStore store(kT0, 30'000);
  for (EpochMs t = kT0; t < kT0 + 300'000; t += 1000) {
    store.rotate(t);
    if ((t - kT0) % 20'000 == 0) store.record_location("d", kCenter, t);
    ASSERT_TRUE(store.last_location("d", t));
  }
}

TEST(TwoTierStore, RotationIsRateLimited) {
  TwoTierLocationStore store(kT0, 30'000);
  EXPECT_FALSE(store.rotate(kT0 + 29'999));
  EXPECT_TRUE(store.rotate(kT0 + 30'000));
  EXPECT_FALSE(store.rotate(kT0 + 30'001));
  EXPECT_EQ(store.last_rotation_at(), kT0 + 30'000);
}

TEST(TwoTierStore, CurrentTierShadowsPrevious) {
  TwoTierLocationStore store(kT0, 30'000);
  store.record_location("d", {1.0, 1.0}, kT0);
  store.rotate(kT0 + 30'000);
  store.record_location("d", {2.0, 2.0}, kT0 + 31'000);
  EXPECT_EQ(store.last_location("d", kT0 + 31'000)->point, (geo::GeoPoint{2.0, 2.0}));
  EXPECT_EQ(store.size(), 1u);
}

TEST(TwoTierStore, HasAdvancedIsMonotoneInThreshold) {
  std::mt19937_64 rng(31);
  TwoTierLocationStore store(kT0, 30'000);
  std::uniform_real_distribution<double> t(0.0, 100.0);
  for (int i = 0; i < 2'000; ++i) {
    const auto prev = around(rng, 2000.0);
    store.record_location("d", prev, kT0);
    const auto p = geo::destination(prev, t(rng) * 3.6, t(rng));
    const double hi = t(rng), lo = t(rng) * hi / 100.0;
    if (store.has_advanced("d", p, hi, kT0)) EXPECT_TRUE(store.has_advanced("d", p, lo, kT0));
  }
  EXPECT_TRUE(store.has_advanced("unknown", kCenter, 1e9, kT0));
}

TEST(ScoreIndex, MatchesLinearScanOracle) {
  std::mt19937_64 rng(32);
  constexpr EpochMs kRetention = 600'000;
  ScoreIndex index(kRetention);
  std::vector<ScoreEntry> reference;
  std::uniform_real_distribution<double> score(0.0, 100.0), half(50.0, 3000.0);
  std::uniform_int_distribution<EpochMs> age(0, 2 * kRetention);
  const EpochMs now = kT0 + 2 * kRetention;
  for (int i = 0; i < 3'000; ++i) {
    const std::string id = "driver-" + std::to_string(i % 2'500);
    const auto p = around(rng, 6000.0);
    const double s = score(rng);
    const EpochMs at = kT0 + age(rng);
    index.record_score(id, p, s, at);
    std::erase_if(reference, [&](const ScoreEntry& e) { return e.driver_id == id; });
    reference.push_back({id, s, p, at});
  }
  // Duplicate a position so distance ties are exercised.
  index.record_score("tie-a", reference[0].point, 1.0, now);
  index.record_score("tie-b", reference[0].point, 2.0, now);
  reference.push_back({"tie-a", 1.0, reference[0].point, now});
  reference.push_back({"tie-b", 2.0, reference[0].point, now});

  for (int q = 0; q < 500; ++q) {
    const auto c = q == 0 ? reference[0].point : around(rng, 6000.0);
    const double h = half(rng);
    const std::string requester = reference[rng() % reference.size()].driver_id;
    const std::size_t limit = 1 + rng() % 80;
    const auto got = index.nearby_scores(c, h, requester, now, limit);
    const auto want = oracle::nearby_oracle(reference, c, h, requester, now, kRetention, limit);
    ASSERT_EQ(got, want) << "query " << q;
    const auto rect = geo::rect_around(c, h);
    for (const auto& e : got) {
      EXPECT_NE(e.driver_id, requester);
      EXPECT_GE(e.last_update, now - kRetention);
      EXPECT_TRUE(rect.contains(e.point));
    }
  }
}

TEST(ScoreIndex, EvictionRemovesOnlyExpired) {
  ScoreIndex index(1'000);
  index.record_score("old", kCenter, 50.0, kT0);
  index.record_score("edge", kCenter, 50.0, kT0 + 500);
  index.record_score("new", kCenter, 50.0, kT0 + 1'400);
  EXPECT_EQ(index.evict_expired(kT0 + 1'500), 1u);
  EXPECT_EQ(index.size(), 2u);
  EXPECT_EQ(index.nearby_scores(kCenter, 100.0, "x", kT0 + 1'500, 10).size(), 2u);
}

TEST(ScoreIndex, OneEntryPerDriver) {
  ScoreIndex index;
  for (int i = 0; i < 10; ++i) index.record_score("d", {kCenter.latitude + i * 1e-3, kCenter.longitude}, i, kT0 + i);
  EXPECT_EQ(index.size(), 1u);
  EXPECT_EQ(index.snapshot().front().score, 9.0);
}

TEST(AlertWindow, ServesRecentAlertsInsideRectangle) {
  AlertWindow w(600'000);
  w.record({kT0, kCenter.latitude, kCenter.longitude, AbnormalKind::high_speed, 80.0}, kT0);
  w.record({kT0, 40.0, 0.0, AbnormalKind::high_speed, 80.0}, kT0);
  const auto rect = geo::rect_around(kCenter, 500.0);
  auto hits = w.query(rect, kT0 + 1);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].kind, "high_speed");
  EXPECT_TRUE(w.query(rect, kT0 + 600'001).empty());
  EXPECT_EQ(w.evict_expired(kT0 + 600'001), 2u);
}

TEST(LocalService, ScoreWritesFollowAdvancementRule) {
  LocalService svc(kT0);
  svc.observe("a", kCenter, 70.0, true, kT0);
  svc.observe("a", kCenter, 10.0, false, kT0 + 1);
  EXPECT_EQ(svc.scores().snapshot().front().score, 70.0);

  LocalService always(kT0, ServiceConfig{.score_requires_advance = false});
  always.observe("a", kCenter, 70.0, true, kT0);
  always.observe("a", kCenter, 10.0, false, kT0 + 1);
  EXPECT_EQ(always.scores().snapshot().front().score, 10.0);
}

TEST(ShorttermHttp, RemoteClientMatchesLocalService) {
  LocalService svc(now_ms());
  HttpServer server(svc, 8);
  ASSERT_TRUE(server.start("127.0.0.1", 0));
  HttpServiceClient client("127.0.0.1:" + std::to_string(server.port()));

  std::mt19937_64 rng(33);
  const EpochMs now = now_ms();
  for (int i = 0; i < 200; ++i) client.observe("d" + std::to_string(i), around(rng, 1000.0), i % 100, true, now);
  EXPECT_EQ(svc.scores().size(), 200u);
  EXPECT_FALSE(client.has_advanced("d1", svc.locations().last_location("d1", now)->point, 10.0, now));
  EXPECT_TRUE(client.has_advanced("nobody", kCenter, 10.0, now));
  EXPECT_EQ(client.nearby_scores(kCenter, 600.0, "d3", now, 25), svc.nearby_scores(kCenter, 600.0, "d3", now, 25));

  client.record_alert({now, kCenter.latitude, kCenter.longitude, AbnormalKind::high_heart_rate, 130.0}, now);
  const auto rect = geo::rect_around(kCenter, 100.0);
  EXPECT_EQ(client.alerts(rect, now), svc.alerts(rect, now));
  EXPECT_EQ(client.alerts(rect, now).size(), 1u);
  server.stop();
}
