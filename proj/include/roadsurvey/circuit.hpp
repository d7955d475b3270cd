#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "roadsurvey/eulerize.hpp"

namespace roadsurvey {

enum class Turn { Straight, Right, Left, UTurn };

inline std::string_view to_string(Turn t) noexcept {
  switch (t) {
    case Turn::Straight: return "straight";
    case Turn::Right: return "right";
    case Turn::Left: return "left";
    case Turn::UTurn: return "u_turn";
  }
  return "?";
}

/// Classifies the heading change from `incoming` to `outgoing` (degrees).
/// |delta| <= 30 is straight, (30, 150] right, [-150, -30) left, else U-turn.
inline Turn classify_turn(double incoming_bearing, double outgoing_bearing) noexcept {
  double delta = std::fmod(outgoing_bearing - incoming_bearing, 360.0);
  if (delta <= -180.0) delta += 360.0;
  if (delta > 180.0) delta -= 360.0;
  if (std::abs(delta) <= 30.0) return Turn::Straight;
  if (delta > 30.0 && delta <= 150.0) return Turn::Right;
  if (delta < -30.0 && delta >= -150.0) return Turn::Left;
  return Turn::UTurn;
}

struct TurnPenaltyTable {
  double straight = 0.0;
  double right = 1.0;
  double left = 2.0;
  double u_turn = 10.0;

  void validate() const {
    for (double v : {straight, right, left, u_turn})
      if (!(std::isfinite(v) && v >= 0.0))
        throw InvalidArgument("turn penalties must be finite and non-negative");
    if (!(u_turn >= left && left >= straight))
      throw InvalidArgument("turn penalties must satisfy u_turn >= left >= straight");
  }

  double cost(Turn t) const noexcept {
    switch (t) {
      case Turn::Straight: return straight;
      case Turn::Right: return right;
      case Turn::Left: return left;
      case Turn::UTurn: return u_turn;
    }
    return u_turn;
  }
};

/// One decision taken while walking the circuit: at `node`, arriving on
/// `incoming` (empty at the very start), edge `chosen` was picked out of
/// `candidates` distinct unused out-edges.
struct GreedyChoice {
  NodeId node = 0;
  std::optional<EdgeId> incoming;
  EdgeId chosen = 0;
  Turn turn = Turn::Straight;
  std::size_t candidates = 0;
};

struct SurveyCircuit {
  NodeId start_node = 0;
  std::vector<EdgeId> edges;
  std::vector<GreedyChoice> choices;
};

namespace detail {

struct EdgeBearings {
  std::optional<double> departure;  // heading when leaving the from-node
  std::optional<double> arrival;    // heading when reaching the to-node
};

inline EdgeBearings edge_bearings(const Edge& e) {
  EdgeBearings b;
  const auto& pts = e.geometry;
  for (std::size_t i = 1; i < pts.size() && !b.departure; ++i) b.departure = bearing_deg(pts[0], pts[i]);
  for (std::size_t i = pts.size() - 1; i-- > 0 && !b.arrival;) b.arrival = bearing_deg(pts[i], pts.back());
  return b;
}

}  // namespace detail

/// Turn made when driving `in` then `out`; straight when either heading is
/// undefined (degenerate geometry).
inline Turn turn_between(const Edge& in, const Edge& out) {
  const auto a = detail::edge_bearings(in).arrival;
  const auto d = detail::edge_bearings(out).departure;
  if (!a || !d) return Turn::Straight;
  return classify_turn(*a, *d);
}

/// Turns between consecutive edges of a circuit (closing turn excluded).
inline std::vector<Turn> circuit_turns(const SurveyCircuit& c, const RoadGraph& g) {
  std::vector<Turn> out;
  for (std::size_t i = 1; i < c.edges.size(); ++i) out.push_back(turn_between(g.edge(c.edges[i - 1]), g.edge(c.edges[i])));
  return out;
}

/// Euler circuit over every edge instance of `eg` (each edge 1 + copies
/// times), starting and ending at `start`.
///
/// Hierholzer's algorithm; whenever the walk extends from a node, the unused
/// out-edge with the smallest turn penalty relative to the edge it arrived on
/// is taken (ties: lower edge id). Sub-tours found on backtracking are spliced
/// in, so the result is always a complete circuit. Turn optimality is greedy,
/// not global.
inline SurveyCircuit euler_circuit(const EulerizedGraph& eg, NodeId start,
                                   const TurnPenaltyTable& penalties = {}) {
  penalties.validate();
  const RoadGraph& g = eg.base;
  const std::size_t start_idx = g.node_index(start);
  for (auto d : node_imbalance(g, eg.copies))
    if (d != 0) throw UnbalancedGraph("node in-degree differs from out-degree");

  std::vector<int> remaining(g.edge_count());
  std::size_t total = 0;
  for (std::size_t i = 0; i < g.edge_count(); ++i) {
    remaining[i] = 1 + eg.copies[i];
    total += static_cast<std::size_t>(remaining[i]);
  }
  std::vector<detail::EdgeBearings> bearings;
  bearings.reserve(g.edge_count());
  for (const auto& e : g.edges()) bearings.push_back(detail::edge_bearings(e));

  SurveyCircuit c;
  c.start_node = start;
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  struct Frame {
    std::size_t node;
    std::size_t via;  // edge index used to arrive, kNone for the start
  };
  std::vector<Frame> stack{{start_idx, kNone}};
  std::vector<std::size_t> popped;
  popped.reserve(total);

  while (!stack.empty()) {
    const auto [v, via] = stack.back();
    std::size_t best = kNone;
    double best_cost = 0.0;
    Turn best_turn = Turn::Straight;
    std::size_t candidates = 0;
    for (auto ei : g.out_edges(v)) {
      if (remaining[ei] == 0) continue;
      ++candidates;
      Turn t = Turn::Straight;
      if (via != kNone && bearings[via].arrival && bearings[ei].departure)
        t = classify_turn(*bearings[via].arrival, *bearings[ei].departure);
      const double cost = via == kNone ? 0.0 : penalties.cost(t);
      if (best == kNone || cost < best_cost ||
          (cost == best_cost && g.edges()[ei].id < g.edges()[best].id)) {
        best = ei;
        best_cost = cost;
        best_turn = t;
      }
    }
    if (best == kNone) {
      if (via != kNone) popped.push_back(via);
      stack.pop_back();
      continue;
    }
    --remaining[best];
    c.choices.push_back({g.nodes()[v].id,
                         via == kNone ? std::nullopt : std::optional<EdgeId>(g.edges()[via].id),
                         g.edges()[best].id, best_turn, candidates});
    stack.push_back({g.to_index(g.edges()[best]), best});
  }

  if (popped.size() != total)
    throw UnbalancedGraph("edges unreachable from start node " + std::to_string(start) +
                          "; graph is not strongly connected");
  c.edges.reserve(total);
  for (auto it = popped.rbegin(); it != popped.rend(); ++it) c.edges.push_back(g.edges()[*it].id);
  return c;
}

/// Throws InvalidCircuit unless `c` is a non-empty closed walk in `g`
/// starting at c.start_node.
inline void validate_circuit(const SurveyCircuit& c, const RoadGraph& g) {
  if (c.edges.empty()) throw InvalidCircuit("circuit has no edges");
  if (!g.find_node(c.start_node)) throw InvalidCircuit("start node not in graph");
  NodeId at = c.start_node;
  for (std::size_t k = 0; k < c.edges.size(); ++k) {
    auto idx = g.find_edge(c.edges[k]);
    if (!idx) throw InvalidCircuit("edge " + std::to_string(c.edges[k]) + " not in graph");
    const auto& e = g.edges()[*idx];
    if (e.from != at)
      throw InvalidCircuit("edge " + std::to_string(e.id) + " at position " + std::to_string(k) +
                           " does not continue from node " + std::to_string(at));
    at = e.to;
  }
  if (at != c.start_node) throw InvalidCircuit("circuit does not return to its start node");
}

inline double circuit_length_m(const SurveyCircuit& c, const RoadGraph& g) {
  double sum = 0.0;
  for (auto id : c.edges) sum += g.edge(id).distance_m;
  return sum;
}

}  // namespace roadsurvey
