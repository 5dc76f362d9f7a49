#include <gtest/gtest.h>

#include <random>

#include "hermes/longterm_stub.hpp"
#include "oracles.hpp"

using namespace hermes;

namespace {

const geo::GeoPoint kCenter{37.3891, -5.9845};

const sim::RoadGraph& city() {
  static const sim::RoadGraph g = sim::generate_graph(kCenter, 3000.0, 7);
  return g;
}

}  // namespace

TEST(RoadStub, NearestEdgeMatchesBruteForce) {
  const auto& g = city();
  longterm::RoadStub stub(g);
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> brg(0.0, 360.0), dist(0.0, 3300.0), near(0.0, 80.0), frac(0.0, 1.0);
  for (int i = 0; i < 3'000; ++i) {
    geo::GeoPoint p;
    if (i % 2 == 0) {
      p = geo::destination(kCenter, brg(rng), dist(rng));
    } else {
      // Close to a random edge, to exercise the snapping boundary.
      const auto& e = g.edges()[rng() % g.edges().size()];
      p = geo::destination(geo::interpolate(g.point(e.a), g.point(e.b), frac(rng)), brg(rng), near(rng));
    }
    const auto want = oracle::nearest_edge_oracle(g, p, longterm::kSnapDistanceM);
    ASSERT_EQ(stub.nearest_edge(p), want) << p.latitude << "," << p.longitude;
    if (want) {
      const auto& e = g.edges()[*want];
      EXPECT_LE(geo::distance_to_segment(p, g.point(e.a), g.point(e.b)), longterm::kSnapDistanceM);
    }
  }
}

TEST(RoadStub, AttributesComeFromTheSnappedEdge) {
  const auto& g = city();
  longterm::RoadStub stub(g);
  for (std::size_t i = 0; i < g.edges().size(); i += 7) {
    const auto& e = g.edges()[i];
    const auto mid = geo::interpolate(g.point(e.a), g.point(e.b), 0.5);
    const auto a = stub.road_attributes(mid);
    ASSERT_TRUE(a);
    const auto& snapped = g.edges()[*stub.nearest_edge(mid)];
    EXPECT_EQ(a->speed_limit, snapped.speed_limit_kmh);
    EXPECT_EQ(a->road_type, snapped.road_type);
    EXPECT_LE(a->recommended_speed, a->speed_limit);
    EXPECT_EQ(std::fmod(a->recommended_speed, 5.0), 0.0);
  }
}

TEST(RoadStub, DeterministicAndCounted) {
  const auto& g = city();
  longterm::RoadStub a(g), b(g);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> brg(0.0, 360.0), dist(0.0, 3000.0);
  for (int i = 0; i < 200; ++i) {
    const auto p = geo::destination(kCenter, brg(rng), dist(rng));
    EXPECT_EQ(a.road_attributes(p), b.road_attributes(p));
    EXPECT_EQ(a.road_attributes(p), a.road_attributes(p));
  }
  EXPECT_EQ(a.call_count(), 600u);
  EXPECT_EQ(b.call_count(), 200u);
}

TEST(RoadStub, FarAwayIsUnknown) {
  longterm::RoadStub stub(city());
  EXPECT_FALSE(stub.road_attributes({0.0, 0.0}));
  EXPECT_FALSE(stub.road_attributes(geo::destination(kCenter, 45.0, 20'000.0)));
}

TEST(RoadStub, RecommendedSpeedRounding) {
  EXPECT_EQ(longterm::recommended_speed_for(50.0), 45.0);
  EXPECT_EQ(longterm::recommended_speed_for(30.0), 25.0);
  EXPECT_EQ(longterm::recommended_speed_for(90.0), 80.0);
  EXPECT_EQ(longterm::recommended_speed_for(120.0), 110.0);
  for (double limit = 10.0; limit <= 130.0; limit += 10.0) EXPECT_LE(longterm::recommended_speed_for(limit), limit);
}
