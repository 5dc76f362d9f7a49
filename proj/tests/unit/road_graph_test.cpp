#include <gtest/gtest.h>

#include <random>

#include "hermes/road_graph.hpp"
#include "oracles.hpp"

using namespace hermes;
using namespace hermes::sim;

namespace {

const geo::GeoPoint kCenter{37.3891, -5.9845};

}  // namespace

TEST(RoadGraph, GeneratedGraphIsConnectedWithConsistentEdges) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto g = generate_graph(kCenter, 4000.0, seed);
    ASSERT_GT(g.nodes().size(), 100u);
    EXPECT_EQ(oracle::component_count(g), 1u);
    for (const auto& e : g.edges()) {
      const double d = geo::haversine_distance(g.point(e.a), g.point(e.b));
      EXPECT_NEAR(e.length_m, d, 0.01 * d);
      EXPECT_TRUE(e.speed_limit_kmh == 30.0 || e.speed_limit_kmh == 50.0 || e.speed_limit_kmh == 90.0);
      EXPECT_NE(e.a, e.b);
    }
    for (const auto& n : g.nodes()) EXPECT_LE(geo::haversine_distance(kCenter, n.point), 4000.0 * 1.01);
  }
}

TEST(RoadGraph, GenerationIsDeterministic) {
  const auto a = generate_graph(kCenter, 3000.0, 9), b = generate_graph(kCenter, 3000.0, 9);
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_NE(a.to_json(), generate_graph(kCenter, 3000.0, 10).to_json());
}

TEST(RoadGraph, RadiusOutOfRangeIsRejected) {
  EXPECT_THROW(generate_graph(kCenter, 500.0, 1), std::invalid_argument);
  EXPECT_THROW(generate_graph(kCenter, 31'000.0, 1), std::invalid_argument);
}

TEST(RoadGraph, JsonRoundTrip) {
  const auto g = generate_graph(kCenter, 2000.0, 4);
  const auto back = RoadGraph::from_json(g.to_json());
  ASSERT_EQ(back.nodes().size(), g.nodes().size());
  ASSERT_EQ(back.edges().size(), g.edges().size());
  EXPECT_EQ(back.to_json(), g.to_json());
}

TEST(RoadGraph, ShortestPathsMatchBellmanFord) {
  const auto g = generate_graph(kCenter, 2500.0, 5);
  std::mt19937_64 rng(51);
  for (int i = 0; i < 8; ++i) {
    const std::size_t from = rng() % g.nodes().size();
    const auto oracle = oracle::travel_times_oracle(g, from);
    for (int k = 0; k < 25; ++k) {
      const std::size_t to = rng() % g.nodes().size();
      const auto p = shortest_path(g, from, to);
      ASSERT_TRUE(p);
      EXPECT_NEAR(p->travel_time_s, oracle[to], 1e-6 * std::max(1.0, oracle[to]));
      EXPECT_EQ(p->nodes.front(), from);
      EXPECT_EQ(p->nodes.back(), to);
      double t = 0.0, len = 0.0;
      for (std::size_t j = 1; j < p->nodes.size(); ++j) {
        const auto e = g.edge_between(p->nodes[j - 1], p->nodes[j]);
        ASSERT_TRUE(e);
        t += g.edges()[*e].travel_time_s();
        len += g.edges()[*e].length_m;
      }
      EXPECT_NEAR(t, p->travel_time_s, 1e-6 * std::max(1.0, t));
      EXPECT_NEAR(len, p->length_m, 1e-6 * std::max(1.0, len));
    }
  }
}

TEST(RoadGraph, PathsRespectEndpointRadiusAndRoundTrip) {
  const auto g = generate_graph(kCenter, 5000.0, 6);
  const auto paths = generate_paths(g, 30, 6, kCenter, 2000.0);
  ASSERT_EQ(paths.size(), 30u);
  for (const auto& p : paths) {
    EXPECT_GE(p.nodes.size(), 2u);
    EXPECT_LE(geo::haversine_distance(kCenter, g.point(p.nodes.front())), 2000.0);
    EXPECT_LE(geo::haversine_distance(kCenter, g.point(p.nodes.back())), 2000.0);
  }
  const auto back = paths_from_json(paths_to_json(paths), g);
  ASSERT_EQ(back.size(), paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    EXPECT_EQ(back[i].nodes, paths[i].nodes);
    EXPECT_NEAR(back[i].travel_time_s, paths[i].travel_time_s, 1e-6);
  }
  EXPECT_EQ(generate_paths(g, 30, 6, kCenter, 2000.0), paths);
}

TEST(RoadGraph, HandBuiltGraphPrefersFasterRoad) {
  RoadGraph g;
  const auto a = g.add_node(kCenter);
  const auto b = g.add_node(geo::destination(kCenter, 90.0, 1000.0));
  const auto c = g.add_node(geo::destination(kCenter, 45.0, 800.0));
  g.add_edge(a, b, 30.0, RoadType::urban);
  g.add_edge(a, c, 90.0, RoadType::highway);
  g.add_edge(c, b, 90.0, RoadType::highway);
  const auto p = shortest_path(g, a, b);
  ASSERT_TRUE(p);
  EXPECT_EQ(p->nodes, (std::vector<std::size_t>{a, c, b}));
  EXPECT_FALSE(shortest_path(g, a, 99));
}
