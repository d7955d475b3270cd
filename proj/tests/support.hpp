#pragma once

// Test-only generators and brute-force oracles. Nothing here calls the
// algorithms it is used to check.

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "roadsurvey/graph.hpp"

namespace roadsurvey::oracle {

/// Nodes laid out on a small lat/lon grid so straight edges have real
/// headings. Node ids are 0..n-1.
inline RoadGraph grid_nodes(int n, double lat0 = 35.0, double lon0 = 135.0) {
  RoadGraph g;
  for (int i = 0; i < n; ++i) g.add_node({i, {lat0 + 0.001 * (i / 3), lon0 + 0.001 * (i % 3)}});
  return g;
}

/// Random strongly connected multigraph: a Hamiltonian cycle in random order
/// plus random extra edges, integer lengths in [1, 20].
inline RoadGraph random_strong_digraph(std::mt19937_64& rng, int min_nodes = 3, int max_nodes = 6,
                                       int max_edges = 8) {
  const int n = std::uniform_int_distribution<int>(min_nodes, max_nodes)(rng);
  auto g = grid_nodes(n);
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::uniform_int_distribution<int> len(1, 20);
  EdgeId id = 0;
  for (int i = 0; i < n; ++i) g.add_straight_edge(id++, perm[i], perm[(i + 1) % n], len(rng));
  const int extra = std::uniform_int_distribution<int>(0, max_edges - n)(rng);
  std::uniform_int_distribution<int> node(0, n - 1);
  for (int k = 0; k < extra; ++k) g.add_straight_edge(id++, node(rng), node(rng), len(rng));
  return g;
}

/// Minimum added length over all duplication vectors. Each edge's copy count
/// is bounded by the total positive imbalance: an optimal duplication set
/// decomposes into that many simple paths, each using an edge at most once.
inline double brute_force_min_added_length(const RoadGraph& g) {
  const std::size_t m = g.edge_count();
  std::map<NodeId, long long> base;
  for (const auto& e : g.edges()) {
    base[e.to] += 1;
    base[e.from] -= 1;
  }
  long long supply = 0;
  for (const auto& [_, d] : base) supply += std::max(0LL, d);
  const int cap = static_cast<int>(std::min<long long>(supply, static_cast<long long>(m)));

  double best = std::numeric_limits<double>::infinity();
  std::vector<int> counts(m, 0);
  std::function<void(std::size_t, double)> rec = [&](std::size_t i, double cost) {
    if (cost >= best) return;
    if (i == m) {
      auto bal = base;
      for (std::size_t k = 0; k < m; ++k) {
        bal[g.edges()[k].to] += counts[k];
        bal[g.edges()[k].from] -= counts[k];
      }
      for (const auto& [_, d] : bal)
        if (d != 0) return;
      best = cost;
      return;
    }
    for (int c = 0; c <= cap; ++c) {
      counts[i] = c;
      rec(i + 1, cost + c * g.edges()[i].distance_m);
    }
    counts[i] = 0;
  };
  rec(0, 0.0);
  return best;
}

/// Every Euler circuit (as edge-id sequences) from `start` using edge `i`
/// exactly `uses[i]` times.
inline std::set<std::vector<EdgeId>> all_euler_circuits(const RoadGraph& g, NodeId start,
                                                        std::vector<int> uses) {
  std::set<std::vector<EdgeId>> out;
  std::size_t total = 0;
  for (int u : uses) total += static_cast<std::size_t>(u);
  std::vector<EdgeId> path;
  std::function<void(NodeId)> rec = [&](NodeId at) {
    if (path.size() == total) {
      if (at == start) out.insert(path);
      return;
    }
    for (std::size_t i = 0; i < g.edge_count(); ++i) {
      const auto& e = g.edges()[i];
      if (e.from != at || uses[i] == 0) continue;
      --uses[i];
      path.push_back(e.id);
      rec(e.to);
      path.pop_back();
      ++uses[i];
    }
  };
  rec(start);
  return out;
}

/// Best cost over every walk from `root` in the augmented graph whose total
/// time passes the budget: each edge may be maintained (once) or traversed
/// (any number of times). Terminates because every action takes time > 0.
inline double brute_force_best_walk_cost(const RoadGraph& g, const std::vector<double>& cost,
                                         const std::vector<double>& maint_t, const std::vector<double>& nav_t,
                                         NodeId root, double T, bool strict, bool return_to_root) {
  auto admits = [&](double t) { return strict ? t < T : t <= T; };
  double best = 0.0;
  std::vector<bool> used(g.edge_count(), false);
  std::function<void(NodeId, double, double)> walk = [&](NodeId at, double t, double c) {
    if (!return_to_root || at == root) best = std::max(best, c);
    for (std::size_t i = 0; i < g.edge_count(); ++i) {
      const auto& e = g.edges()[i];
      if (e.from != at) continue;
      if (admits(t + nav_t[i])) walk(e.to, t + nav_t[i], c);
      if (!used[i] && admits(t + maint_t[i])) {
        used[i] = true;
        walk(e.to, t + maint_t[i], c + cost[i]);
        used[i] = false;
      }
    }
  };
  walk(root, 0.0, 0.0);
  return best;
}

}  // namespace roadsurvey::oracle
