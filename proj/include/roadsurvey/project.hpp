#pragma once

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "json.hpp"
#include "roadsurvey/circuit.hpp"
#include "roadsurvey/damagemap.hpp"
#include "roadsurvey/graph_json.hpp"
#include "roadsurvey/geoalign.hpp"
#include "roadsurvey/io.hpp"
#include "roadsurvey/maintplan.hpp"
#include "roadsurvey/osm.hpp"

namespace roadsurvey {

namespace fs = std::filesystem;

/// Stage outputs, all inside the project output directory.
namespace artifact {
inline constexpr const char* kGraph = "graph.json";
inline constexpr const char* kCircuit = "circuit.json";
inline constexpr const char* kGpx = "route.gpx";
inline constexpr const char* kAligned = "aligned.jsonl";
inline constexpr const char* kDetections = "detections.jsonl";
inline constexpr const char* kVerdicts = "verdicts.jsonl";
inline constexpr const char* kSeverity = "severity.json";
inline constexpr const char* kSeverityGeojson = "severity.geojson";
inline constexpr const char* kPlan = "plan.json";
inline constexpr const char* kPlanGeojson = "plan.geojson";
}  // namespace artifact

/// A stage input produced by an earlier subcommand is missing.
class MissingArtifact : public IoError {
 public:
  MissingArtifact(const fs::path& p, const std::string& producer)
      : IoError("missing " + p.string() + "; run `roadsurvey " + producer + "` first") {}
};

inline fs::path require_artifact(const fs::path& dir, const char* name, const std::string& producer) {
  auto p = dir / name;
  if (!fs::exists(p)) throw MissingArtifact(p, producer);
  return p;
}

struct ProjectPaths {
  std::optional<fs::path> osm, gps_csv, image_index, detections, images_dir;
  fs::path output_dir = "out";
};

struct ProjectConfig {
  ProjectPaths paths;
  std::optional<BoundingBox> bbox;
  std::vector<std::string> highway_classes;
  AlignConfig align;
  TurnPenaltyTable penalties;
  double nav_speed_s_per_m = 0.09;  // 40 km/h
  double maint_s_per_m = kDefaultMaintSecondsPerMeter;
  std::size_t exact_limit = kDefaultExactLimit;
  std::map<EdgeId, double> maint_times_s;

  void validate() const {
    align.validate();
    penalties.validate();
    if (!(nav_speed_s_per_m > 0.0) || !std::isfinite(nav_speed_s_per_m))
      throw InvalidArgument("nav_speed_s_per_m must be positive");
    if (!(maint_s_per_m > 0.0) || !std::isfinite(maint_s_per_m))
      throw InvalidArgument("maint_s_per_m must be positive");
    if (exact_limit > 24) throw InvalidArgument("exact_limit must be at most 24");
    for (const auto& [id, t] : maint_times_s)
      if (!(t > 0.0) || !std::isfinite(t))
        throw InvalidArgument("maint_times_s for edge " + std::to_string(id) + " must be positive");
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [k, _] : j.items())
    if (!known.contains(k)) throw SchemaError("unknown key '" + k + "' in " + where);
}

template <class T>
void read_number(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number()) throw SchemaError(std::string("config '") + key + "' must be a number");
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_unsigned()) throw SchemaError(std::string("config '") + key + "' must be a non-negative integer");
  }
  out = v.get<T>();
}

}  // namespace detail

/// Parses a project config. Relative paths are resolved against `base_dir`.
inline ProjectConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir = {}) {
  if (!j.is_object()) throw SchemaError("config must be a JSON object");
  detail::reject_unknown_keys(j,
                              {"paths", "bbox", "highway", "sigma_s", "min_spacing_m", "max_dist_m", "clamp_tol_s",
                               "turn_penalties", "nav_speed_s_per_m", "maint_s_per_m", "exact_limit", "maint_times_s"},
                              "config");
  ProjectConfig c;
  auto resolve = [&](const nlohmann::json& v, const char* key) {
    if (!v.is_string()) throw SchemaError(std::string("config path '") + key + "' must be a string");
    fs::path p = v.get<std::string>();
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    if (!p.is_object()) throw SchemaError("config 'paths' must be an object");
    detail::reject_unknown_keys(p, {"osm", "gps_csv", "image_index", "detections", "images_dir", "output_dir"},
                                "config paths");
    auto opt = [&](const char* key, std::optional<fs::path>& out) {
      if (p.contains(key)) out = resolve(p.at(key), key);
    };
    opt("osm", c.paths.osm);
    opt("gps_csv", c.paths.gps_csv);
    opt("image_index", c.paths.image_index);
    opt("detections", c.paths.detections);
    opt("images_dir", c.paths.images_dir);
    if (p.contains("output_dir")) c.paths.output_dir = resolve(p.at("output_dir"), "output_dir");
  }
  if (j.contains("bbox")) {
    if (!j.at("bbox").is_string()) throw SchemaError("config 'bbox' must be a \"w,s,e,n\" string");
    c.bbox = parse_bbox(j.at("bbox").get<std::string>());
  }
  if (j.contains("highway")) {
    if (!j.at("highway").is_array()) throw SchemaError("config 'highway' must be an array of strings");
    for (const auto& h : j.at("highway")) {
      if (!h.is_string()) throw SchemaError("config 'highway' must be an array of strings");
      c.highway_classes.push_back(h.get<std::string>());
    }
  }
  detail::read_number(j, "sigma_s", c.align.sigma_s);
  detail::read_number(j, "min_spacing_m", c.align.min_spacing_m);
  detail::read_number(j, "max_dist_m", c.align.max_dist_m);
  detail::read_number(j, "clamp_tol_s", c.align.clamp_tol_s);
  detail::read_number(j, "nav_speed_s_per_m", c.nav_speed_s_per_m);
  detail::read_number(j, "maint_s_per_m", c.maint_s_per_m);
  detail::read_number(j, "exact_limit", c.exact_limit);
  if (j.contains("turn_penalties")) {
    const auto& t = j.at("turn_penalties");
    if (!t.is_object()) throw SchemaError("config 'turn_penalties' must be an object");
    detail::reject_unknown_keys(t, {"straight", "right", "left", "u_turn"}, "config turn_penalties");
    detail::read_number(t, "straight", c.penalties.straight);
    detail::read_number(t, "right", c.penalties.right);
    detail::read_number(t, "left", c.penalties.left);
    detail::read_number(t, "u_turn", c.penalties.u_turn);
  }
  if (j.contains("maint_times_s")) {
    const auto& m = j.at("maint_times_s");
    if (!m.is_object()) throw SchemaError("config 'maint_times_s' must map edge ids to seconds");
    for (const auto& [k, v] : m.items()) {
      EdgeId id = 0;
      auto [ptr, ec] = std::from_chars(k.data(), k.data() + k.size(), id);
      if (ec != std::errc{} || ptr != k.data() + k.size()) throw SchemaError("maint_times_s key '" + k + "' is not an edge id");
      if (!v.is_number()) throw SchemaError("maint_times_s['" + k + "'] must be a number");
      c.maint_times_s[id] = v.get<double>();
    }
  }
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
  return c;
}

inline ProjectConfig load_config(const fs::path& path) {
  const auto text = io::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

}  // namespace roadsurvey
