#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "roadsurvey/error.hpp"
#include "roadsurvey/geo.hpp"

namespace roadsurvey {

using NodeId = std::int64_t;
using EdgeId = std::int64_t;

struct Node {
  NodeId id = 0;
  GeoPoint point;
};

struct Edge {
  EdgeId id = 0;
  NodeId from = 0;
  NodeId to = 0;
  double distance_m = 0.0;
  std::vector<GeoPoint> geometry;
  std::optional<std::string> name;
};

/// Directed road multigraph. Parallel edges and self-loops are allowed.
///
/// Nodes and edges keep insertion order, which is what every algorithm
/// iterates over; ids are only used for lookup and tie-breaking.
class RoadGraph {
 public:
  void add_node(Node n) {
    if (!n.point.valid())
      throw InvalidArgument("node " + std::to_string(n.id) + " has an invalid coordinate");
    if (node_pos_.contains(n.id))
      throw InvalidArgument("duplicate node id " + std::to_string(n.id));
    node_pos_.emplace(n.id, nodes_.size());
    nodes_.push_back(std::move(n));
    out_.emplace_back();
    in_.emplace_back();
  }

  const Edge& add_edge(Edge e) {
    const auto fi = node_pos_.find(e.from);
    const auto ti = node_pos_.find(e.to);
    if (fi == node_pos_.end()) throw NodeNotFound(e.from);
    if (ti == node_pos_.end()) throw NodeNotFound(e.to);
    if (edge_pos_.contains(e.id))
      throw InvalidArgument("duplicate edge id " + std::to_string(e.id));
    if (!(std::isfinite(e.distance_m) && e.distance_m > 0.0))
      throw InvalidArgument("edge " + std::to_string(e.id) + " must have a positive length");
    if (e.geometry.size() < 2)
      throw InvalidArgument("edge " + std::to_string(e.id) + " needs at least two geometry points");
    for (const auto& p : e.geometry)
      if (!p.valid())
        throw InvalidArgument("edge " + std::to_string(e.id) + " has an invalid coordinate");
    if (!near(e.geometry.front(), nodes_[fi->second].point) ||
        !near(e.geometry.back(), nodes_[ti->second].point))
      throw InvalidArgument("edge " + std::to_string(e.id) +
                            " geometry does not start and end at its nodes");
    edge_pos_.emplace(e.id, edges_.size());
    out_[fi->second].push_back(edges_.size());
    in_[ti->second].push_back(edges_.size());
    edges_.push_back(std::move(e));
    return edges_.back();
  }

  /// Adds an edge whose geometry is the straight segment between its nodes.
  const Edge& add_straight_edge(EdgeId id, NodeId from, NodeId to, double distance_m,
                                std::optional<std::string> name = std::nullopt) {
    Edge e{id, from, to, distance_m, {node(from).point, node(to).point}, std::move(name)};
    return add_edge(std::move(e));
  }

  std::span<const Node> nodes() const noexcept { return nodes_; }
  std::span<const Edge> edges() const noexcept { return edges_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }

  std::optional<std::size_t> find_node(NodeId id) const {
    auto it = node_pos_.find(id);
    if (it == node_pos_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t node_index(NodeId id) const {
    auto it = node_pos_.find(id);
    if (it == node_pos_.end()) throw NodeNotFound(id);
    return it->second;
  }
  const Node& node(NodeId id) const { return nodes_[node_index(id)]; }

  std::optional<std::size_t> find_edge(EdgeId id) const {
    auto it = edge_pos_.find(id);
    if (it == edge_pos_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t edge_index(EdgeId id) const {
    auto it = edge_pos_.find(id);
    if (it == edge_pos_.end())
      throw InvalidArgument("edge " + std::to_string(id) + " not found");
    return it->second;
  }
  const Edge& edge(EdgeId id) const { return edges_[edge_index(id)]; }

  /// Edge indices leaving / entering the node at `node_idx`.
  std::span<const std::size_t> out_edges(std::size_t node_idx) const { return out_[node_idx]; }
  std::span<const std::size_t> in_edges(std::size_t node_idx) const { return in_[node_idx]; }

  std::size_t from_index(const Edge& e) const { return node_pos_.at(e.from); }
  std::size_t to_index(const Edge& e) const { return node_pos_.at(e.to); }

 private:
  static bool near(const GeoPoint& a, const GeoPoint& b) noexcept {
    return std::abs(a.lat - b.lat) <= 1e-9 && std::abs(a.lon - b.lon) <= 1e-9;
  }

  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::unordered_map<NodeId, std::size_t> node_pos_;
  std::unordered_map<EdgeId, std::size_t> edge_pos_;
  std::vector<std::vector<std::size_t>> out_;
  std::vector<std::vector<std::size_t>> in_;
};

inline double total_length_m(const RoadGraph& g) noexcept {
  double sum = 0.0;
  for (const auto& e : g.edges()) sum += e.distance_m;
  return sum;
}

/// Strongly connected components as lists of node indices. Components are
/// emitted in order of their smallest node index; members are sorted.
inline std::vector<std::vector<std::size_t>> strongly_connected_components(const RoadGraph& g) {
  const std::size_t n = g.node_count();
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, kUnset), low(n, 0), comp(n, kUnset);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> comps;
  std::size_t counter = 0;

  // Iterative Tarjan: frames of (node, next out-edge position).
  std::vector<std::pair<std::size_t, std::size_t>> frames;
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnset) continue;
    frames.emplace_back(root, 0);
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      auto& [v, pos] = frames.back();
      const auto outs = g.out_edges(v);
      if (pos < outs.size()) {
        const std::size_t w = g.to_index(g.edges()[outs[pos++]]);
        if (index[w] == kUnset) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      const std::size_t done = v;
      frames.pop_back();
      if (!frames.empty()) {
        const std::size_t parent = frames.back().first;
        low[parent] = std::min(low[parent], low[done]);
      }
      if (low[done] == index[done]) {
        std::vector<std::size_t> c;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          c.push_back(w);
        } while (w != done);
        std::sort(c.begin(), c.end());
        comps.push_back(std::move(c));
      }
    }
  }
  std::sort(comps.begin(), comps.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return comps;
}

inline bool is_strongly_connected(const RoadGraph& g) {
  if (g.node_count() <= 1) return true;
  return strongly_connected_components(g).size() == 1;
}

/// Throws NotStronglyConnected describing the components when `g` is not
/// strongly connected.
inline void require_strongly_connected(const RoadGraph& g) {
  auto comps = strongly_connected_components(g);
  if (comps.size() <= 1) return;
  std::vector<NotStronglyConnected::Component> ids;
  for (const auto& c : comps) {
    NotStronglyConnected::Component ci;
    for (auto idx : c) ci.push_back(g.nodes()[idx].id);
    std::sort(ci.begin(), ci.end());
    ids.push_back(std::move(ci));
  }
  // One unreachable pair per component boundary: a representative of every
  // component against the first one, in whichever direction fails.
  std::vector<std::size_t> comp_of(g.node_count());
  for (std::size_t c = 0; c < comps.size(); ++c)
    for (auto idx : comps[c]) comp_of[idx] = c;
  auto reach = [&](std::size_t src) {
    std::vector<bool> seen(g.node_count(), false);
    std::vector<std::size_t> todo{src};
    seen[src] = true;
    while (!todo.empty()) {
      auto v = todo.back();
      todo.pop_back();
      for (auto ei : g.out_edges(v)) {
        auto w = g.to_index(g.edges()[ei]);
        if (!seen[w]) {
          seen[w] = true;
          todo.push_back(w);
        }
      }
    }
    return seen;
  };
  std::vector<NotStronglyConnected::NodePair> pairs;
  const std::size_t a = comps[0].front();
  const auto from_a = reach(a);
  for (std::size_t c = 1; c < comps.size() && pairs.size() < 16; ++c) {
    const std::size_t b = comps[c].front();
    if (!from_a[b])
      pairs.emplace_back(g.nodes()[a].id, g.nodes()[b].id);
    else
      pairs.emplace_back(g.nodes()[b].id, g.nodes()[a].id);
  }
  throw NotStronglyConnected(std::move(ids), std::move(pairs));
}

}  // namespace roadsurvey
