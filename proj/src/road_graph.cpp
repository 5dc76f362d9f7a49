#include "hermes/road_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace hermes::sim {

using Json = nlohmann::ordered_json;

std::size_t RoadGraph::add_node(const geo::GeoPoint& point) {
  nodes_.push_back({point});
  adjacency_.emplace_back();
  return nodes_.size() - 1;
}

std::size_t RoadGraph::add_edge(std::size_t a, std::size_t b, double speed_limit_kmh, RoadType type) {
  if (a >= nodes_.size() || b >= nodes_.size() || a == b) throw std::invalid_argument("bad edge endpoints");
  RoadEdge e{a, b, geo::haversine_distance(nodes_[a].point, nodes_[b].point), speed_limit_kmh, type};
  edges_.push_back(e);
  const auto id = edges_.size() - 1;
  adjacency_[a].push_back({b, id});
  adjacency_[b].push_back({a, id});
  return id;
}

std::optional<std::size_t> RoadGraph::edge_between(std::size_t a, std::size_t b) const {
  for (const auto& adj : adjacency_[a])
    if (adj.node == b) return adj.edge;
  return std::nullopt;
}

std::string RoadGraph::to_json() const {
  Json nodes = Json::array();
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    nodes.push_back({{"id", i}, {"latitude", nodes_[i].point.latitude}, {"longitude", nodes_[i].point.longitude}});
  Json edges = Json::array();
  for (const auto& e : edges_)
    edges.push_back({{"a", e.a},
                     {"b", e.b},
                     {"length_m", e.length_m},
                     {"speed_limit", e.speed_limit_kmh},
                     {"road_type", to_string(e.road_type)}});
  return Json{{"nodes", nodes}, {"edges", edges}}.dump();
}

RoadGraph RoadGraph::from_json(const std::string& text) {
  auto j = Json::parse(text);
  RoadGraph g;
  for (const auto& n : j.at("nodes")) {
    if (n.at("id").get<std::size_t>() != g.nodes_.size()) throw std::invalid_argument("node ids must be dense");
    g.add_node({n.at("latitude").get<double>(), n.at("longitude").get<double>()});
  }
  for (const auto& e : j.at("edges")) {
    auto type = parse_road_type(e.at("road_type").get<std::string>());
    if (!type) throw std::invalid_argument("unknown road type");
    auto id = g.add_edge(e.at("a").get<std::size_t>(), e.at("b").get<std::size_t>(),
                         e.at("speed_limit").get<double>(), *type);
    // Keep the recorded length so imported cartography can carry real
    // (non straight-line) road lengths.
    g.edges_[id].length_m = e.at("length_m").get<double>();
  }
  return g;
}

namespace {

struct UnionFind {
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
  std::vector<std::size_t> parent;
};

}  // namespace

RoadGraph generate_graph(const geo::GeoPoint& center, double radius_m, std::uint64_t seed,
                         const GridOptions& options) {
  if (!(radius_m >= 1000.0 && radius_m <= 30000.0)) throw std::invalid_argument("radius must be within [1, 30] km");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-options.jitter_fraction, options.jitter_fraction);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int k = static_cast<int>(std::ceil(radius_m / options.spacing_m)) + 1;
  const double m_per_deg_lon = geo::kMetersPerDegree * std::cos(center.latitude * geo::kPi / 180.0);

  // Grid cell (i, j) -> candidate node index, or -1 when clipped away.
  const int width = 2 * k + 1;
  std::vector<long> cell(static_cast<std::size_t>(width) * width, -1);
  std::vector<geo::GeoPoint> points;
  for (int j = -k; j <= k; ++j) {
    for (int i = -k; i <= k; ++i) {
      const double x = (i + jitter(rng)) * options.spacing_m;
      const double y = (j + jitter(rng)) * options.spacing_m;
      geo::GeoPoint p{center.latitude + y / geo::kMetersPerDegree, center.longitude + x / m_per_deg_lon};
      if (geo::haversine_distance(center, p) > radius_m) continue;
      cell[static_cast<std::size_t>(j + k) * width + (i + k)] = static_cast<long>(points.size());
      points.push_back(p);
    }
  }

  struct Candidate {
    std::size_t a, b;
    double limit;
    RoadType type;
  };
  std::vector<Candidate> candidates;
  auto at = [&](int i, int j) { return cell[static_cast<std::size_t>(j + k) * width + (i + k)]; };
  auto street = [&](bool arterial) -> std::pair<double, RoadType> {
    // One draw per line, arterial or not.
    const double u = unit(rng);
    if (arterial) return {90.0, RoadType::secondary};
    return {u < options.slow_street_share ? 30.0 : 50.0, RoadType::urban};
  };
  for (int j = -k; j <= k; ++j) {
    for (int i = -k; i <= k; ++i) {
      const long here = at(i, j);
      if (i < k) {
        auto [limit, type] = street(j % options.arterial_every == 0);
        const long east = at(i + 1, j);
        if (here >= 0 && east >= 0)
          candidates.push_back({static_cast<std::size_t>(here), static_cast<std::size_t>(east), limit, type});
      }
      if (j < k) {
        auto [limit, type] = street(i % options.arterial_every == 0);
        const long north = at(i, j + 1);
        if (here >= 0 && north >= 0)
          candidates.push_back({static_cast<std::size_t>(here), static_cast<std::size_t>(north), limit, type});
      }
    }
  }

  UnionFind uf(points.size());
  for (const auto& c : candidates) uf.unite(c.a, c.b);
  std::map<std::size_t, std::size_t> component_size;
  for (std::size_t n = 0; n < points.size(); ++n) ++component_size[uf.find(n)];
  std::size_t largest = 0, best = 0;
  for (const auto& [root, size] : component_size)
    if (size > best) best = size, largest = root;

  RoadGraph g;
  std::vector<long> remap(points.size(), -1);
  for (std::size_t n = 0; n < points.size(); ++n)
    if (uf.find(n) == largest) remap[n] = static_cast<long>(g.add_node(points[n]));
  for (const auto& c : candidates) {
    if (remap[c.a] < 0 || remap[c.b] < 0) continue;
    g.add_edge(static_cast<std::size_t>(remap[c.a]), static_cast<std::size_t>(remap[c.b]), c.limit, c.type);
  }
  return g;
}

std::optional<PathSpec> shortest_path(const RoadGraph& graph, std::size_t from, std::size_t to) {
  const auto n = graph.nodes().size();
  if (from >= n || to >= n) return std::nullopt;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(n, kInf);
  std::vector<long> via_edge(n, -1);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> frontier;
  cost[from] = 0.0;
  frontier.push({0.0, from});
  while (!frontier.empty()) {
    auto [c, node] = frontier.top();
    frontier.pop();
    if (c > cost[node]) continue;
    if (node == to) break;
    for (const auto& adj : graph.neighbors(node)) {
      const double next = c + graph.edges()[adj.edge].travel_time_s();
      if (next < cost[adj.node]) {
        cost[adj.node] = next;
        via_edge[adj.node] = static_cast<long>(adj.edge);
        frontier.push({next, adj.node});
      }
    }
  }
  if (cost[to] == kInf) return std::nullopt;

  PathSpec path;
  path.travel_time_s = cost[to];
  for (std::size_t node = to;;) {
    path.nodes.push_back(node);
    if (node == from) break;
    const auto& e = graph.edges()[static_cast<std::size_t>(via_edge[node])];
    path.length_m += e.length_m;
    node = e.a == node ? e.b : e.a;
  }
  std::reverse(path.nodes.begin(), path.nodes.end());
  return path;
}

std::vector<PathSpec> generate_paths(const RoadGraph& graph, std::size_t count, std::uint64_t seed,
                                     const geo::GeoPoint& center, double max_endpoint_distance_m) {
  std::vector<std::size_t> eligible;
  for (std::size_t n = 0; n < graph.nodes().size(); ++n) {
    if (max_endpoint_distance_m <= 0.0 ||
        geo::haversine_distance(center, graph.point(n)) <= max_endpoint_distance_m)
      eligible.push_back(n);
  }
  if (eligible.size() < 2) throw std::invalid_argument("need at least two eligible path endpoints");

  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  std::vector<PathSpec> paths;
  while (paths.size() < count) {
    const auto a = eligible[pick(rng)];
    const auto b = eligible[pick(rng)];
    if (a == b) continue;
    if (auto p = shortest_path(graph, a, b)) paths.push_back(std::move(*p));
  }
  return paths;
}

std::string paths_to_json(const std::vector<PathSpec>& paths) {
  Json out = Json::array();
  for (const auto& p : paths)
    out.push_back({{"nodes", p.nodes}, {"length_m", p.length_m}, {"travel_time_s", p.travel_time_s}});
  return Json{{"paths", out}}.dump();
}

std::vector<PathSpec> paths_from_json(const std::string& text, const RoadGraph& graph) {
  std::vector<PathSpec> out;
  const Json doc = Json::parse(text);
  for (const auto& p : doc.at("paths")) {
    PathSpec spec;
    spec.nodes = p.at("nodes").get<std::vector<std::size_t>>();
    for (std::size_t i = 1; i < spec.nodes.size(); ++i) {
      auto e = graph.edge_between(spec.nodes[i - 1], spec.nodes[i]);
      if (!e) throw std::invalid_argument("path uses a missing edge");
      spec.length_m += graph.edges()[*e].length_m;
      spec.travel_time_s += graph.edges()[*e].travel_time_s();
    }
    out.push_back(std::move(spec));
  }
  return out;
}

}  // namespace hermes::sim
