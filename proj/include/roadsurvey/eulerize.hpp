#pragma once

#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <vector>

#include "roadsurvey/graph.hpp"

namespace roadsurvey {

/// A road graph plus the number of extra copies of each edge that make every
/// node balanced (in-degree == out-degree with multiplicity).
struct EulerizedGraph {
  RoadGraph base;
  std::vector<int> copies;  // indexed like base.edges()
  double original_length_m = 0.0;
  double added_length_m = 0.0;

  int duplications(EdgeId id) const { return copies[base.edge_index(id)]; }
  double total_length_m() const noexcept { return original_length_m + added_length_m; }
  double overhead_ratio() const noexcept {
    return original_length_m > 0.0 ? added_length_m / original_length_m : 0.0;
  }
  /// Non-zero duplication counts keyed by edge id.
  std::map<EdgeId, int> duplication_map() const {
    std::map<EdgeId, int> m;
    for (std::size_t i = 0; i < copies.size(); ++i)
      if (copies[i] > 0) m.emplace(base.edges()[i].id, copies[i]);
    return m;
  }
};

/// in - out for every node, counting `copies` extra instances per edge.
inline std::vector<long long> node_imbalance(const RoadGraph& g, std::span<const int> copies = {}) {
  std::vector<long long> d(g.node_count(), 0);
  for (std::size_t i = 0; i < g.edge_count(); ++i) {
    const auto& e = g.edges()[i];
    const long long mult = 1 + (copies.empty() ? 0 : copies[i]);
    d[g.to_index(e)] += mult;
    d[g.from_index(e)] -= mult;
  }
  return d;
}

namespace detail {

/// Successive-shortest-paths min-cost flow with Johnson potentials.
/// Arc costs must be non-negative on input.
class MinCostFlow {
 public:
  explicit MinCostFlow(std::size_t n) : adj_(n) {}

  std::size_t add_arc(std::size_t from, std::size_t to, long long cap, double cost) {
    const std::size_t fwd = adj_[from].size();
    const std::size_t rev = adj_[to].size() + (from == to ? 1 : 0);
    adj_[from].push_back({to, cap, cost, rev});
    adj_[to].push_back({from, 0, -cost, fwd});
    return fwd;
  }

  long long flow_on(std::size_t from, std::size_t arc) const {
    const auto& a = adj_[from][arc];
    return adj_[a.to][a.rev].cap;
  }

  /// Pushes up to `want` units from s to t; returns the amount pushed.
  long long run(std::size_t s, std::size_t t, long long want) {
    const std::size_t n = adj_.size();
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> pot(n, 0.0), dist(n);
    std::vector<std::size_t> prev_node(n), prev_arc(n);
    long long pushed = 0;
    while (pushed < want) {
      std::fill(dist.begin(), dist.end(), kInf);
      dist[s] = 0.0;
      using Item = std::pair<double, std::size_t>;
      std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
      pq.emplace(0.0, s);
      while (!pq.empty()) {
        auto [d, v] = pq.top();
        pq.pop();
        if (d > dist[v]) continue;
        for (std::size_t k = 0; k < adj_[v].size(); ++k) {
          const auto& a = adj_[v][k];
          if (a.cap <= 0) continue;
          // Rounding can make reduced costs marginally negative.
          const double rc = std::max(0.0, a.cost + pot[v] - pot[a.to]);
          if (d + rc < dist[a.to]) {
            dist[a.to] = d + rc;
            prev_node[a.to] = v;
            prev_arc[a.to] = k;
            pq.emplace(dist[a.to], a.to);
          }
        }
      }
      if (dist[t] == kInf) break;
      for (std::size_t v = 0; v < n; ++v)
        if (dist[v] < kInf) pot[v] += dist[v];
      long long bottleneck = want - pushed;
      for (std::size_t v = t; v != s; v = prev_node[v])
        bottleneck = std::min(bottleneck, adj_[prev_node[v]][prev_arc[v]].cap);
      for (std::size_t v = t; v != s; v = prev_node[v]) {
        auto& a = adj_[prev_node[v]][prev_arc[v]];
        a.cap -= bottleneck;
        adj_[v][a.rev].cap += bottleneck;
      }
      pushed += bottleneck;
    }
    return pushed;
  }

 private:
  struct Arc {
    std::size_t to;
    long long cap;
    double cost;
    std::size_t rev;
  };
  std::vector<std::vector<Arc>> adj_;
};

}  // namespace detail

/// Minimum-length eulerization of a strongly connected digraph.
///
/// Nodes with more incoming than outgoing edges must start extra walks that
/// end at nodes with the opposite surplus. Those walks are routed as a
/// min-cost flow over the road edges themselves (cost = edge length,
/// unbounded capacity); the flow on each edge is its duplication count. The
/// transportation polytope is integral, so the result is optimal.
inline EulerizedGraph eulerize(const RoadGraph& g) {
  if (g.edge_count() == 0) throw EmptyGraph();
  require_strongly_connected(g);

  const std::size_t n = g.node_count();
  const std::size_t source = n, sink = n + 1;
  detail::MinCostFlow mcf(n + 2);
  std::vector<std::size_t> edge_arc(g.edge_count());
  const auto imbalance = node_imbalance(g);
  long long supply = 0;
  for (std::size_t v = 0; v < n; ++v) {
    if (imbalance[v] > 0) {
      mcf.add_arc(source, v, imbalance[v], 0.0);
      supply += imbalance[v];
    } else if (imbalance[v] < 0) {
      mcf.add_arc(v, sink, -imbalance[v], 0.0);
    }
  }
  for (std::size_t i = 0; i < g.edge_count(); ++i) {
    const auto& e = g.edges()[i];
    edge_arc[i] = mcf.add_arc(g.from_index(e), g.to_index(e), supply, e.distance_m);
  }
  if (mcf.run(source, sink, supply) != supply)
    throw UnbalancedGraph("could not route all surplus; graph is not strongly connected");

  EulerizedGraph out{g, std::vector<int>(g.edge_count(), 0), total_length_m(g), 0.0};
  for (std::size_t i = 0; i < g.edge_count(); ++i) {
    const auto& e = g.edges()[i];
    out.copies[i] = static_cast<int>(mcf.flow_on(g.from_index(e), edge_arc[i]));
    out.added_length_m += out.copies[i] * e.distance_m;
  }
  return out;
}

/// Subgraph induced by the largest strongly connected component (ties: the
/// component containing the smallest node index). Useful for OSM extracts
/// whose boundary cuts streets into dead ends.
inline RoadGraph largest_strong_component(const RoadGraph& g) {
  const auto comps = strongly_connected_components(g);
  if (comps.empty()) return {};
  const auto* best = &comps.front();
  for (const auto& c : comps)
    if (c.size() > best->size()) best = &c;
  std::vector<bool> keep(g.node_count(), false);
  for (auto idx : *best) keep[idx] = true;
  RoadGraph sub;
  for (std::size_t i = 0; i < g.node_count(); ++i)
    if (keep[i]) sub.add_node(g.nodes()[i]);
  for (const auto& e : g.edges())
    if (keep[g.from_index(e)] && keep[g.to_index(e)]) sub.add_edge(e);
  return sub;
}

}  // namespace roadsurvey
