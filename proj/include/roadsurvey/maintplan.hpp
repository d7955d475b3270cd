#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "json.hpp"
#include "roadsurvey/damagemap.hpp"
#include "roadsurvey/graph.hpp"

namespace roadsurvey {

inline constexpr double kDefaultMaintSecondsPerMeter = 60.0;
inline constexpr std::size_t kDefaultExactLimit = 20;

/// Road graph where every edge e can be taken either as a maintenance action
/// (time maint_time_s, cost c(e), at most once) or as a plain traversal
/// (time nav_time_s, cost 0, any number of times).
struct AugmentedGraph {
  RoadGraph base;
  std::vector<double> cost;         // indexed like base.edges()
  std::vector<double> maint_time_s;
  std::vector<double> nav_time_s;
  double nav_speed_s_per_m = 0.0;
  NodeId root = 0;

  std::size_t root_index() const { return base.node_index(root); }
};

/// Builds the augmented graph. Edges missing from `costs` cost 0; edges missing
/// from `maint_times` take distance_m * maint_s_per_m.
inline AugmentedGraph augment(const RoadGraph& g, const std::map<EdgeId, double>& costs,
                              const std::map<EdgeId, double>& maint_times, double nav_speed_s_per_m,
                              NodeId root, double maint_s_per_m = kDefaultMaintSecondsPerMeter) {
  if (!(nav_speed_s_per_m > 0.0) || !std::isfinite(nav_speed_s_per_m))
    throw NonPositiveTime("nav_speed_s_per_m must be positive");
  if (!(maint_s_per_m > 0.0) || !std::isfinite(maint_s_per_m))
    throw NonPositiveTime("maint_s_per_m must be positive");
  g.node_index(root);
  for (const auto& [id, c] : costs) {
    if (!g.find_edge(id)) throw InvalidArgument("cost given for unknown edge " + std::to_string(id));
    if (!(c >= 0.0) || !std::isfinite(c))
      throw InvalidArgument("edge " + std::to_string(id) + " has a negative or non-finite cost");
  }
  for (const auto& [id, t] : maint_times) {
    if (!g.find_edge(id)) throw InvalidArgument("maintenance time given for unknown edge " + std::to_string(id));
    if (!(t > 0.0) || !std::isfinite(t))
      throw NonPositiveTime("edge " + std::to_string(id) + " has a non-positive maintenance time");
  }
  AugmentedGraph ag{g, {}, {}, {}, nav_speed_s_per_m, root};
  for (const auto& e : g.edges()) {
    auto c = costs.find(e.id);
    auto t = maint_times.find(e.id);
    ag.cost.push_back(c == costs.end() ? 0.0 : c->second);
    ag.maint_time_s.push_back(t == maint_times.end() ? e.distance_m * maint_s_per_m : t->second);
    ag.nav_time_s.push_back(nav_speed_s_per_m * e.distance_m);
  }
  return ag;
}

enum class PlanAction { Maintain, Traverse };

inline std::string_view to_string(PlanAction a) noexcept {
  return a == PlanAction::Maintain ? "maintain" : "traverse";
}

struct PlanStep {
  EdgeId edge_id = 0;
  PlanAction action = PlanAction::Traverse;

  bool operator==(const PlanStep&) const = default;
  auto operator<=>(const PlanStep&) const = default;
};

struct Budget {
  double T = 0.0;
  bool return_to_root = false;
  bool strict = true;  // t(P) < T; false allows t(P) == T

  bool admits(double t) const noexcept { return strict ? t < T : t <= T; }
};

struct MaintenancePlan {
  std::vector<PlanStep> steps;
  double total_cost = 0.0;
  double total_time_s = 0.0;
  bool optimal = false;
  std::string solver;
};

/// Sums cost and time of `steps` in walk order.
inline std::pair<double, double> plan_totals(const AugmentedGraph& ag, std::span<const PlanStep> steps) {
  double c = 0.0, t = 0.0;
  for (const auto& s : steps) {
    const auto i = ag.base.edge_index(s.edge_id);
    if (s.action == PlanAction::Maintain) {
      c += ag.cost[i];
      t += ag.maint_time_s[i];
    } else {
      t += ag.nav_time_s[i];
    }
  }
  return {c, t};
}

/// Returns a description of the first violated plan invariant, if any.
inline std::optional<std::string> plan_violation(const AugmentedGraph& ag, const Budget& b,
                                                 const MaintenancePlan& p) {
  std::size_t at = ag.root_index();
  std::vector<bool> maintained(ag.base.edge_count(), false);
  for (std::size_t k = 0; k < p.steps.size(); ++k) {
    const auto idx = ag.base.find_edge(p.steps[k].edge_id);
    if (!idx) return "step " + std::to_string(k) + " uses unknown edge " + std::to_string(p.steps[k].edge_id);
    const auto& e = ag.base.edges()[*idx];
    if (ag.base.from_index(e) != at) return "step " + std::to_string(k) + " is not adjacent to the previous one";
    if (p.steps[k].action == PlanAction::Maintain) {
      if (maintained[*idx]) return "edge " + std::to_string(e.id) + " maintained twice";
      maintained[*idx] = true;
    }
    at = ag.base.to_index(e);
  }
  if (b.return_to_root && at != ag.root_index()) return std::string("plan does not return to the root");
  const auto [c, t] = plan_totals(ag, p.steps);
  const auto tol = [](double x) { return 1e-9 * std::max(1.0, std::abs(x)); };
  if (std::abs(c - p.total_cost) > tol(c)) return "total_cost " + std::to_string(p.total_cost) + " != " + std::to_string(c);
  if (std::abs(t - p.total_time_s) > tol(t))
    return "total_time_s " + std::to_string(p.total_time_s) + " != " + std::to_string(t);
  if (!b.admits(t)) return "time " + std::to_string(t) + " exceeds budget " + std::to_string(b.T);
  return std::nullopt;
}

namespace detail {

inline bool near_eq(double a, double b) noexcept {
  return std::isfinite(a) && std::isfinite(b) && std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

/// All-pairs shortest times with per-edge weights `w`, plus reconstruction
/// of the lexicographically smallest shortest walk.
class EdgeMetric {
 public:
  EdgeMetric(const AugmentedGraph& ag, std::vector<double> w) : ag_(ag), w_(std::move(w)), n_(ag.base.node_count()) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    dist_.assign(n_ * n_, kInf);
    sorted_out_.resize(n_);
    for (std::size_t v = 0; v < n_; ++v) {
      auto out = ag.base.out_edges(v);
      sorted_out_[v].assign(out.begin(), out.end());
      std::sort(sorted_out_[v].begin(), sorted_out_[v].end(),
                [&](std::size_t a, std::size_t b) { return ag.base.edges()[a].id < ag.base.edges()[b].id; });
    }
    for (std::size_t s = 0; s < n_; ++s) {
      double* d = &dist_[s * n_];
      d[s] = 0.0;
      using Item = std::pair<double, std::size_t>;
      std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
      pq.emplace(0.0, s);
      while (!pq.empty()) {
        auto [dv, v] = pq.top();
        pq.pop();
        if (dv > d[v]) continue;
        for (auto ei : sorted_out_[v]) {
          const auto w = ag.base.to_index(ag.base.edges()[ei]);
          const double nd = dv + w_[ei];
          if (nd < d[w]) {
            d[w] = nd;
            pq.emplace(nd, w);
          }
        }
      }
    }
  }

  double operator()(std::size_t u, std::size_t v) const noexcept { return dist_[u * n_ + v]; }

  void append_path(std::size_t u, std::size_t v, std::vector<PlanStep>& out) const {
    while (u != v) {
      bool moved = false;
      for (auto ei : sorted_out_[u]) {
        const auto w = ag_.base.to_index(ag_.base.edges()[ei]);
        if (near_eq(w_[ei] + (*this)(w, v), (*this)(u, v))) {
          out.push_back({ag_.base.edges()[ei].id, PlanAction::Traverse});
          u = w;
          moved = true;
          break;
        }
      }
      if (!moved) throw InvalidArgument("no traversal path between nodes");
    }
  }

 private:
  const AugmentedGraph& ag_;
  std::vector<double> w_;
  std::size_t n_;
  std::vector<double> dist_;
  std::vector<std::vector<std::size_t>> sorted_out_;
};

/// Any walk can be rewritten, without losing cost or gaining time, as a
/// sequence of maintained edges joined by shortest traversals (plus the
/// shortest way home when required). Both solvers search over such
/// sequences.
class SequenceModel {
 public:
  SequenceModel(const AugmentedGraph& ag, const Budget& b)
      : ag(ag), b(b), d(ag, ag.nav_time_s), lb(ag, quickest(ag)), root(ag.root_index()) {}

  static std::vector<double> quickest(const AugmentedGraph& ag) {
    std::vector<double> w(ag.nav_time_s);
    for (std::size_t e = 0; e < w.size(); ++e) w[e] = std::min(w[e], ag.maint_time_s[e]);
    return w;
  }

  std::size_t from(std::size_t e) const { return ag.base.from_index(ag.base.edges()[e]); }
  std::size_t to(std::size_t e) const { return ag.base.to_index(ag.base.edges()[e]); }
  double home(std::size_t v) const { return b.return_to_root ? d(v, root) : 0.0; }
  // Maintaining an edge can be quicker than traversing it, so bounds on
  // unfinished walks must use the quickest way over every edge.
  double home_lb(std::size_t v) const { return b.return_to_root ? lb(v, root) : 0.0; }

  double time_of(std::span<const std::size_t> seq) const {
    double t = 0.0;
    std::size_t at = root;
    for (auto e : seq) {
      t += d(at, from(e)) + ag.maint_time_s[e];
      at = to(e);
    }
    return t + home(at);
  }

  double cost_of(std::span<const std::size_t> seq) const {
    double c = 0.0;
    for (auto e : seq) c += ag.cost[e];
    return c;
  }

  bool fits(double t) const { return t <= b.T + 1e-9 * std::max(1.0, b.T); }

  MaintenancePlan build(std::span<const std::size_t> seq) const {
    MaintenancePlan p;
    std::size_t at = root;
    for (auto e : seq) {
      d.append_path(at, from(e), p.steps);
      p.steps.push_back({ag.base.edges()[e].id, PlanAction::Maintain});
      at = to(e);
    }
    if (b.return_to_root) d.append_path(at, root, p.steps);
    std::tie(p.total_cost, p.total_time_s) = plan_totals(ag, p.steps);
    return p;
  }

  const AugmentedGraph& ag;
  const Budget& b;
  EdgeMetric d;   // traversals only
  EdgeMetric lb;  // quickest of traversal and maintenance per edge
  std::size_t root;
};

inline void validate_budget(const Budget& b) {
  if (!(b.T > 0.0) || !std::isfinite(b.T)) throw NonPositiveTime("budget T must be positive and finite");
}

}  // namespace detail

/// Globally optimal plan. Dynamic programming over (set of maintained edges,
/// current node) gives the least time for every reachable state; the best
/// state maximizes cost, then minimizes time. Ties are broken towards the
/// lexicographically smallest step list by walking forward through states
/// that still lead to an optimum. Memory is 2^k * P doubles for k useful
/// edges and P distinct end nodes.
inline MaintenancePlan solve_exact(const AugmentedGraph& ag, const Budget& b,
                                   std::size_t exact_limit = kDefaultExactLimit) {
  detail::validate_budget(b);
  if (exact_limit > 24) throw InvalidArgument("exact solver limit cannot exceed 24 edges");
  if (ag.base.edge_count() > exact_limit) throw ExactLimitExceeded(ag.base.edge_count(), exact_limit);
  const detail::SequenceModel m(ag, b);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Maintaining an edge only helps if it earns something or is quicker than
  // its traversal.
  std::vector<std::size_t> cand;
  for (std::size_t e = 0; e < ag.base.edge_count(); ++e)
    if (ag.cost[e] > 0.0 || ag.maint_time_s[e] < ag.nav_time_s[e]) cand.push_back(e);
  std::sort(cand.begin(), cand.end(),
            [&](std::size_t a, std::size_t c) { return ag.base.edges()[a].id < ag.base.edges()[c].id; });
  const std::size_t k = cand.size();

  std::vector<std::size_t> pos_node{m.root};
  std::vector<std::size_t> to_pos(k);
  for (std::size_t j = 0; j < k; ++j) {
    auto it = std::find(pos_node.begin(), pos_node.end(), m.to(cand[j]));
    to_pos[j] = static_cast<std::size_t>(it - pos_node.begin());
    if (it == pos_node.end()) pos_node.push_back(m.to(cand[j]));
  }
  const std::size_t P = pos_node.size();
  std::vector<double> step(P * k), home(P), home_lb(P);
  for (std::size_t p = 0; p < P; ++p) {
    home[p] = m.home(pos_node[p]);
    home_lb[p] = m.home_lb(pos_node[p]);
    for (std::size_t j = 0; j < k; ++j) step[p * k + j] = m.d(pos_node[p], m.from(cand[j])) + ag.maint_time_s[cand[j]];
  }

  const std::size_t S = std::size_t{1} << k;
  std::vector<double> dp(S * P, kInf), mask_cost(S, 0.0);
  for (std::size_t M = 1; M < S; ++M) {
    const auto low = static_cast<std::size_t>(std::countr_zero(M));
    mask_cost[M] = mask_cost[M & (M - 1)] + ag.cost[cand[low]];
  }
  dp[0] = 0.0;
  double best_c = 0.0, best_t = home[0];
  for (std::size_t M = 0; M < S; ++M)
    for (std::size_t p = 0; p < P; ++p) {
      const double t = dp[M * P + p];
      if (t == kInf) continue;
      const double tt = t + home[p];
      if (std::isfinite(tt) && b.admits(tt) &&
          (mask_cost[M] > best_c + 1e-9 || (detail::near_eq(mask_cost[M], best_c) && tt < best_t))) {
        best_c = std::max(best_c, mask_cost[M]);
        best_t = tt;
      }
      for (std::size_t j = 0; j < k; ++j) {
        if (M >> j & 1U) continue;
        const double nt = t + step[p * k + j];
        if (!m.fits(nt + home_lb[to_pos[j]])) continue;
        double& slot = dp[(M | std::size_t{1} << j) * P + to_pos[j]];
        slot = std::min(slot, nt);
      }
    }

  auto is_final = [&](std::size_t M, std::size_t p) {
    const double tt = dp[M * P + p] + home[p];
    return std::isfinite(tt) && b.admits(tt) && detail::near_eq(mask_cost[M], best_c) && detail::near_eq(tt, best_t);
  };
  // Optimal sequences only pass through time-minimal states, so "can still
  // reach an optimum" is decided over tight transitions.
  auto tight = [&](std::size_t M, std::size_t p, std::size_t j) {
    const double nt = dp[M * P + p] + step[p * k + j];
    return detail::near_eq(nt, dp[(M | std::size_t{1} << j) * P + to_pos[j]]);
  };
  std::vector<std::uint8_t> good(S * P, 0);
  for (std::size_t M = S; M-- > 0;)
    for (std::size_t p = 0; p < P; ++p) {
      if (dp[M * P + p] == kInf) continue;
      bool g = is_final(M, p);
      for (std::size_t j = 0; j < k && !g; ++j)
        g = !(M >> j & 1U) && good[(M | std::size_t{1} << j) * P + to_pos[j]] && tight(M, p, j);
      good[M * P + p] = g;
    }

  MaintenancePlan best;
  std::size_t M = 0, p = 0;
  while (true) {
    std::optional<std::vector<PlanStep>> choice;
    std::optional<std::size_t> choice_j;
    if (is_final(M, p)) {
      choice.emplace();
      if (b.return_to_root) m.d.append_path(pos_node[p], m.root, *choice);
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (M >> j & 1U || !good[(M | std::size_t{1} << j) * P + to_pos[j]] || !tight(M, p, j)) continue;
      std::vector<PlanStep> block;
      m.d.append_path(pos_node[p], m.from(cand[j]), block);
      block.push_back({ag.base.edges()[cand[j]].id, PlanAction::Maintain});
      if (!choice || block < *choice) {
        choice = std::move(block);
        choice_j = j;
      }
    }
    if (!choice) throw InvalidArgument("exact solver lost track of the optimum");
    best.steps.insert(best.steps.end(), choice->begin(), choice->end());
    if (!choice_j) break;
    M |= std::size_t{1} << *choice_j;
    p = to_pos[*choice_j];
  }
  std::tie(best.total_cost, best.total_time_s) = plan_totals(ag, best.steps);
  best.optimal = true;
  best.solver = "exact";
  return best;
}

/// Feasible plan by greedy cost-per-added-second insertion followed by
/// or-opt, 2-opt and swap moves until nothing improves.
inline MaintenancePlan solve_heuristic(const AugmentedGraph& ag, const Budget& b) {
  detail::validate_budget(b);
  const detail::SequenceModel m(ag, b);
  std::vector<std::size_t> pool;
  for (std::size_t e = 0; e < ag.base.edge_count(); ++e)
    if (ag.cost[e] > 0.0) pool.push_back(e);
  std::sort(pool.begin(), pool.end(),
            [&](std::size_t a, std::size_t c) { return ag.base.edges()[a].id < ag.base.edges()[c].id; });

  std::vector<std::size_t> seq;
  std::vector<bool> used(ag.base.edge_count(), false);
  double seq_t = 0.0;
  auto ok = [&](double t) { return std::isfinite(t) && b.admits(t); };

  auto insert_greedily = [&] {
    bool any = false;
    while (true) {
      double best_ratio = -1.0, best_t = 0.0;
      std::size_t best_e = 0, best_pos = 0;
      for (auto e : pool) {
        if (used[e]) continue;
        for (std::size_t pos = 0; pos <= seq.size(); ++pos) {
          seq.insert(seq.begin() + static_cast<std::ptrdiff_t>(pos), e);
          const double t = m.time_of(seq);
          seq.erase(seq.begin() + static_cast<std::ptrdiff_t>(pos));
          if (!ok(t)) continue;
          const double ratio = ag.cost[e] / std::max(t - seq_t, 1e-12);
          if (ratio > best_ratio) {
            best_ratio = ratio;
            best_e = e;
            best_pos = pos;
            best_t = t;
          }
        }
      }
      if (best_ratio < 0.0) return any;
      seq.insert(seq.begin() + static_cast<std::ptrdiff_t>(best_pos), best_e);
      used[best_e] = true;
      seq_t = best_t;
      any = true;
    }
  };

  auto try_seq = [&](std::vector<std::size_t>& cand_seq) {
    const double t = m.time_of(cand_seq);
    if (ok(t) && t < seq_t - 1e-9) {
      seq.swap(cand_seq);
      seq_t = t;
      return true;
    }
    return false;
  };

  auto reorder = [&] {
    bool any = false, again = true;
    while (again) {
      again = false;
      for (std::size_t i = 0; i < seq.size() && !again; ++i)
        for (std::size_t j = i + 1; j < seq.size() && !again; ++j) {
          auto cand_seq = seq;
          std::reverse(cand_seq.begin() + static_cast<std::ptrdiff_t>(i),
                       cand_seq.begin() + static_cast<std::ptrdiff_t>(j) + 1);
          again = try_seq(cand_seq);
        }
      for (std::size_t i = 0; i < seq.size() && !again; ++i)
        for (std::size_t j = 0; j < seq.size() && !again; ++j) {
          if (i == j) continue;
          auto cand_seq = seq;
          const auto e = cand_seq[i];
          cand_seq.erase(cand_seq.begin() + static_cast<std::ptrdiff_t>(i));
          cand_seq.insert(cand_seq.begin() + static_cast<std::ptrdiff_t>(j), e);
          again = try_seq(cand_seq);
        }
      any = any || again;
    }
    return any;
  };

  // Replace one maintained edge by a more valuable unused one in any slot.
  auto swap_in = [&] {
    for (std::size_t i = 0; i < seq.size(); ++i)
      for (auto e : pool) {
        if (used[e] || ag.cost[e] <= ag.cost[seq[i]]) continue;
        auto cand_seq = seq;
        cand_seq.erase(cand_seq.begin() + static_cast<std::ptrdiff_t>(i));
        for (std::size_t pos = 0; pos <= cand_seq.size(); ++pos) {
          cand_seq.insert(cand_seq.begin() + static_cast<std::ptrdiff_t>(pos), e);
          const double t = m.time_of(cand_seq);
          if (ok(t)) {
            used[seq[i]] = false;
            used[e] = true;
            seq = cand_seq;
            seq_t = t;
            return true;
          }
          cand_seq.erase(cand_seq.begin() + static_cast<std::ptrdiff_t>(pos));
        }
      }
    return false;
  };

  for (int round = 0; round < 1000; ++round) {
    bool changed = insert_greedily();
    changed = reorder() || changed;
    changed = swap_in() || changed;
    if (!changed) break;
  }

  auto plan = m.build(seq);
  // Summation order can differ from time_of at the budget boundary.
  while (!b.admits(plan.total_time_s) && !seq.empty()) {
    seq.pop_back();
    plan = m.build(seq);
  }
  plan.optimal = false;
  plan.solver = "heuristic";
  return plan;
}

/// Exact when the graph is within the limit, heuristic otherwise.
inline MaintenancePlan solve(const AugmentedGraph& ag, const Budget& b, std::size_t exact_limit = kDefaultExactLimit) {
  if (ag.base.edge_count() <= exact_limit) return solve_exact(ag, b, exact_limit);
  return solve_heuristic(ag, b);
}

inline nlohmann::json plan_to_json(const AugmentedGraph& ag, const Budget& b, const MaintenancePlan& p) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : p.steps) steps.push_back({{"edge_id", s.edge_id}, {"action", to_string(s.action)}});
  return {{"steps", std::move(steps)},
          {"total_cost", p.total_cost},
          {"total_time_s", p.total_time_s},
          {"optimal", p.optimal},
          {"solver", p.solver},
          {"root", ag.root},
          {"T", b.T},
          {"return_to_root", b.return_to_root},
          {"strict", b.strict}};
}

/// One LineString per step, in walk order, for drawing the plan on a map.
inline nlohmann::json plan_geojson(const AugmentedGraph& ag, const MaintenancePlan& p) {
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t k = 0; k < p.steps.size(); ++k) {
    const auto& e = ag.base.edge(p.steps[k].edge_id);
    features.push_back({{"type", "Feature"},
                        {"geometry", linestring_json(e.geometry)},
                        {"properties", {{"step", k}, {"edge_id", e.id}, {"action", to_string(p.steps[k].action)}}}});
  }
  return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

}  // namespace roadsurvey
