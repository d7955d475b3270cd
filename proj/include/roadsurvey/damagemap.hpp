#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "roadsurvey/geoalign.hpp"
#include "roadsurvey/graph.hpp"

namespace roadsurvey {

/// Road damage classes: longitudinal crack, lateral crack, alligator crack,
/// pothole.
enum class DamageLabel { D00, D10, D20, D40 };

inline constexpr std::array<DamageLabel, 4> kDamageLabels{DamageLabel::D00, DamageLabel::D10,
                                                         DamageLabel::D20, DamageLabel::D40};

inline std::string_view to_string(DamageLabel l) noexcept {
  switch (l) {
    case DamageLabel::D00: return "D00";
    case DamageLabel::D10: return "D10";
    case DamageLabel::D20: return "D20";
    case DamageLabel::D40: return "D40";
  }
  return "?";
}

inline std::optional<DamageLabel> parse_label(std::string_view s) noexcept {
  for (auto l : kDamageLabels)
    if (to_string(l) == s) return l;
  return std::nullopt;
}

struct PixelBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
};

struct Detection {
  std::string damage_id;
  std::string image_id;
  DamageLabel label = DamageLabel::D00;
  PixelBox bbox;
  double score = 0.0;
};

enum class VerdictStatus { Confirmed, Rejected, Relabeled };

inline std::string_view to_string(VerdictStatus s) noexcept {
  switch (s) {
    case VerdictStatus::Confirmed: return "confirmed";
    case VerdictStatus::Rejected: return "rejected";
    case VerdictStatus::Relabeled: return "relabeled";
  }
  return "?";
}

inline std::optional<VerdictStatus> parse_status(std::string_view s) noexcept {
  if (s == "confirmed") return VerdictStatus::Confirmed;
  if (s == "rejected") return VerdictStatus::Rejected;
  if (s == "relabeled") return VerdictStatus::Relabeled;
  return std::nullopt;
}

struct Verdict {
  std::string damage_id;
  VerdictStatus status = VerdictStatus::Confirmed;
  std::optional<DamageLabel> corrected_label;  // present iff relabeled
  std::string author;
  double t = 0.0;
};

// --- JSON Lines ------------------------------------------------------------

namespace detail {

template <class F>
void for_each_json_line(std::string_view text, F&& f) {
  const auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::is_blank(lines[i])) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(std::string("invalid JSON: ") + e.what(), i + 1);
    }
    if (!j.is_object()) throw SchemaError("expected a JSON object", i + 1);
    f(j, i + 1);
  }
}

inline std::string required_string(const nlohmann::json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string() || it->get_ref<const std::string&>().empty())
    throw SchemaError(std::string("'") + key + "' must be a non-empty string", line);
  return it->get<std::string>();
}

inline double required_number(const nlohmann::json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number()) throw SchemaError(std::string("'") + key + "' must be a number", line);
  return it->get<double>();
}

}  // namespace detail

inline Detection detection_from_json(const nlohmann::json& j, std::size_t line) {
  Detection d;
  d.image_id = detail::required_string(j, "image_id", line);
  d.damage_id = j.contains("damage_id") ? detail::required_string(j, "damage_id", line)
                                        : d.image_id + "#" + std::to_string(line);
  const auto label = detail::required_string(j, "label", line);
  auto parsed = parse_label(label);
  if (!parsed) throw SchemaError("unknown label '" + label + "'", line);
  d.label = *parsed;
  auto bb = j.find("bbox");
  if (bb == j.end() || !bb->is_array() || bb->size() != 4)
    throw SchemaError("'bbox' must be [x_min, y_min, x_max, y_max]", line);
  for (const auto& v : *bb)
    if (!v.is_number()) throw SchemaError("'bbox' entries must be numbers", line);
  d.bbox = {(*bb)[0].get<double>(), (*bb)[1].get<double>(), (*bb)[2].get<double>(), (*bb)[3].get<double>()};
  if (!(d.bbox.x_min < d.bbox.x_max && d.bbox.y_min < d.bbox.y_max))
    throw SchemaError("'bbox' needs x_min < x_max and y_min < y_max", line);
  d.score = detail::required_number(j, "score", line);
  if (!(d.score >= 0.0 && d.score <= 1.0))
    throw SchemaError("score " + std::to_string(d.score) + " outside [0, 1]", line);
  return d;
}

inline nlohmann::json detection_to_json(const Detection& d) {
  return {{"damage_id", d.damage_id},
          {"image_id", d.image_id},
          {"label", to_string(d.label)},
          {"bbox", {d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max}},
          {"score", d.score}};
}

/// Parses detector output, one detection per line. Missing damage ids become
/// "<image_id>#<line number>".
inline std::vector<Detection> ingest_detections(std::string_view jsonl) {
  std::vector<Detection> out;
  std::unordered_set<std::string> seen;
  detail::for_each_json_line(jsonl, [&](const nlohmann::json& j, std::size_t line) {
    auto d = detection_from_json(j, line);
    if (!seen.insert(d.damage_id).second) throw SchemaError("duplicate damage_id '" + d.damage_id + "'", line);
    out.push_back(std::move(d));
  });
  return out;
}

inline std::string detections_to_jsonl(std::span<const Detection> ds) {
  std::string out;
  for (const auto& d : ds) out += detection_to_json(d).dump() + "\n";
  return out;
}

inline Verdict verdict_from_json(const nlohmann::json& j, std::size_t line) {
  Verdict v;
  v.damage_id = detail::required_string(j, "damage_id", line);
  const auto status = detail::required_string(j, "status", line);
  auto parsed = parse_status(status);
  if (!parsed) throw SchemaError("unknown status '" + status + "'", line);
  v.status = *parsed;
  auto cl = j.find("corrected_label");
  const bool has_label = cl != j.end() && !cl->is_null();
  if (v.status == VerdictStatus::Relabeled) {
    if (!has_label) throw SchemaError("relabeled verdict requires corrected_label", line);
  } else if (has_label) {
    throw SchemaError("corrected_label is only allowed on relabeled verdicts", line);
  }
  if (has_label) {
    if (!cl->is_string()) throw SchemaError("corrected_label must be a string", line);
    v.corrected_label = parse_label(cl->get<std::string>());
    if (!v.corrected_label) throw SchemaError("unknown corrected_label '" + cl->get<std::string>() + "'", line);
  }
  v.author = detail::required_string(j, "author", line);
  v.t = detail::required_number(j, "t", line);
  return v;
}

inline nlohmann::json verdict_to_json(const Verdict& v) {
  nlohmann::json j{{"damage_id", v.damage_id}, {"status", to_string(v.status)}, {"author", v.author}, {"t", v.t}};
  if (v.corrected_label) j["corrected_label"] = to_string(*v.corrected_label);
  return j;
}

inline std::vector<Verdict> parse_verdicts(std::string_view jsonl) {
  std::vector<Verdict> out;
  detail::for_each_json_line(jsonl, [&](const nlohmann::json& j, std::size_t line) {
    out.push_back(verdict_from_json(j, line));
  });
  return out;
}

// --- verdict application -------------------------------------------------

/// Latest verdict per damage id: greatest t, ties resolved by log order.
inline std::unordered_map<std::string, Verdict> latest_verdicts(std::span<const Verdict> vs) {
  std::unordered_map<std::string, Verdict> latest;
  for (const auto& v : vs) {
    auto [it, inserted] = latest.try_emplace(v.damage_id, v);
    if (!inserted && v.t >= it->second.t) it->second = v;
  }
  return latest;
}

struct EffectiveDetections {
  std::vector<Detection> detections;
  std::vector<std::string> warnings;
};

/// Applies human verdicts: rejected detections are dropped, confirmed and
/// relabeled ones get score 1.0 (relabeled also take the corrected label).
/// Detections without a verdict pass through unchanged.
inline EffectiveDetections effective_detections(std::span<const Detection> ds, std::span<const Verdict> vs) {
  EffectiveDetections out;
  std::unordered_set<std::string> known;
  for (const auto& d : ds) known.insert(d.damage_id);
  std::vector<Verdict> valid;
  for (const auto& v : vs) {
    if (known.contains(v.damage_id))
      valid.push_back(v);
    else
      out.warnings.push_back("verdict for unknown damage '" + v.damage_id + "' skipped");
  }
  const auto latest = latest_verdicts(valid);
  for (const auto& d : ds) {
    auto it = latest.find(d.damage_id);
    if (it == latest.end()) {
      out.detections.push_back(d);
      continue;
    }
    const auto& v = it->second;
    if (v.status == VerdictStatus::Rejected) continue;
    Detection e = d;
    e.score = 1.0;
    if (v.status == VerdictStatus::Relabeled) e.label = *v.corrected_label;
    out.detections.push_back(std::move(e));
  }
  return out;
}

// --- severity ----------------------------------------------------------------

struct EdgeSeverity {
  EdgeId edge_id = 0;
  double severity = 0.0;  // score_sum / distance_m, per meter
  std::size_t damage_count = 0;
  double score_sum = 0.0;
  std::array<std::size_t, 4> class_counts{};
};

struct SeverityMap {
  std::vector<EdgeSeverity> edges;  // one per graph edge, graph order
  std::size_t skipped_detections = 0;

  double total_score() const noexcept {
    double s = 0.0;
    for (const auto& e : edges) s += e.score_sum;
    return s;
  }
};

/// Sums detection scores per road edge through each detection's image
/// assignment. Detections whose image has no aligned record are counted in
/// `skipped_detections`.
inline SeverityMap edge_severity(std::span<const Detection> ds, std::span<const ImageRecord> aligned,
                                 const RoadGraph& g) {
  std::unordered_map<std::string_view, EdgeId> image_edge;
  for (const auto& r : aligned)
    if (r.edge_id) image_edge.emplace(r.image_id, *r.edge_id);
  SeverityMap m;
  m.edges.resize(g.edge_count());
  for (std::size_t i = 0; i < g.edge_count(); ++i) m.edges[i].edge_id = g.edges()[i].id;
  for (const auto& d : ds) {
    auto it = image_edge.find(d.image_id);
    std::optional<std::size_t> idx;
    if (it != image_edge.end()) idx = g.find_edge(it->second);
    if (!idx) {
      ++m.skipped_detections;
      continue;
    }
    auto& es = m.edges[*idx];
    es.score_sum += d.score;
    ++es.damage_count;
    ++es.class_counts[static_cast<std::size_t>(d.label)];
  }
  for (std::size_t i = 0; i < g.edge_count(); ++i)
    m.edges[i].severity = m.edges[i].score_sum / g.edges()[i].distance_m;
  return m;
}

/// Maintenance value per edge: the undivided score sum, keyed by edge id.
inline std::map<EdgeId, double> edge_cost(std::span<const Detection> ds, std::span<const ImageRecord> aligned,
                                          const RoadGraph& g) {
  std::map<EdgeId, double> c;
  for (const auto& e : edge_severity(ds, aligned, g).edges) c[e.edge_id] = e.score_sum;
  return c;
}

inline nlohmann::json class_counts_json(const std::array<std::size_t, 4>& counts) {
  nlohmann::json j = nlohmann::json::object();
  for (auto l : kDamageLabels) j[std::string(to_string(l))] = counts[static_cast<std::size_t>(l)];
  return j;
}

inline nlohmann::json severity_to_json(const SeverityMap& m) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : m.edges)
    edges.push_back({{"edge_id", e.edge_id},
                     {"severity", e.severity},
                     {"damage_count", e.damage_count},
                     {"score_sum", e.score_sum},
                     {"class_counts", class_counts_json(e.class_counts)}});
  return {{"edges", std::move(edges)},
          {"skipped_detections", m.skipped_detections},
          {"total_score", m.total_score()}};
}

/// Per-edge score sums read back from severity_to_json output.
inline std::map<EdgeId, double> costs_from_severity_json(const nlohmann::json& j) {
  std::map<EdgeId, double> c;
  try {
    for (const auto& e : j.at("edges")) c[e.at("edge_id").get<EdgeId>()] = e.at("score_sum").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("severity JSON: ") + e.what());
  }
  return c;
}

inline nlohmann::json linestring_json(std::span<const GeoPoint> pts) {
  nlohmann::json coords = nlohmann::json::array();
  for (const auto& p : pts) coords.push_back({p.lon, p.lat});
  return {{"type", "LineString"}, {"coordinates", std::move(coords)}};
}

/// FeatureCollection with one LineString per edge, carrying its severity.
inline nlohmann::json severity_geojson(const RoadGraph& g, const SeverityMap& m) {
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t i = 0; i < g.edge_count(); ++i) {
    const auto& e = g.edges()[i];
    const auto& s = m.edges[i];
    features.push_back({{"type", "Feature"},
                        {"geometry", linestring_json(e.geometry)},
                        {"properties",
                         {{"edge_id", e.id},
                          {"name", e.name ? nlohmann::json(*e.name) : nlohmann::json(nullptr)},
                          {"distance_m", e.distance_m},
                          {"severity", s.severity},
                          {"damage_count", s.damage_count},
                          {"score_sum", s.score_sum},
                          {"class_counts", class_counts_json(s.class_counts)}}}});
  }
  return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

}  // namespace roadsurvey
