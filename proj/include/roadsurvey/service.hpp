#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "httplib.h"
#include "json.hpp"
#include "roadsurvey/damagemap.hpp"
#include "roadsurvey/graph_json.hpp"
#include "roadsurvey/maintplan.hpp"
#include "roadsurvey/osm.hpp"
#include "roadsurvey/project.hpp"

namespace roadsurvey::surveyd {

struct ServiceOptions {
  fs::path root;
  std::optional<fs::path> images_dir;  // defaults to <root>/images
  double nav_speed_s_per_m = 0.09;
  double maint_s_per_m = kDefaultMaintSecondsPerMeter;
  std::size_t exact_limit = kDefaultExactLimit;
  std::map<EdgeId, double> maint_times_s;
  std::string cors_origin = "*";
  std::function<double()> clock;  // seconds since epoch; system clock when empty

  fs::path images() const { return images_dir ? *images_dir : root / "images"; }
};

/// Everything the read endpoints need, derived once per verdict and never
/// mutated afterwards.
struct Snapshot {
  RoadGraph graph;
  std::vector<ImageRecord> aligned;
  std::unordered_map<std::string, std::size_t> image_pos;
  std::vector<Detection> detections;
  std::unordered_set<std::string> damage_ids;
  std::vector<Verdict> verdicts;
  EffectiveDetections effective;
  std::unordered_map<std::string, Verdict> latest;
  SeverityMap severity;
  std::string network_body;
  double last_t = 0.0;
};

inline std::shared_ptr<const Snapshot> make_snapshot(RoadGraph g, std::vector<ImageRecord> aligned,
                                                     std::vector<Detection> ds, std::vector<Verdict> vs) {
  auto s = std::make_shared<Snapshot>();
  s->graph = std::move(g);
  s->aligned = std::move(aligned);
  for (std::size_t i = 0; i < s->aligned.size(); ++i) s->image_pos.emplace(s->aligned[i].image_id, i);
  s->detections = std::move(ds);
  for (const auto& d : s->detections) s->damage_ids.insert(d.damage_id);
  s->verdicts = std::move(vs);
  s->effective = effective_detections(s->detections, s->verdicts);
  s->latest = latest_verdicts(s->verdicts);
  s->severity = edge_severity(s->effective.detections, s->aligned, s->graph);
  s->network_body = severity_geojson(s->graph, s->severity).dump();
  for (const auto& v : s->verdicts) s->last_t = std::max(s->last_t, v.t);
  return s;
}

/// Files of one project directory plus the current snapshot. Reads take the
/// last completed snapshot; verdict writes are serialized, appended to the
/// log, and published by swapping in a freshly built snapshot.
class ProjectStore {
 public:
  explicit ProjectStore(ServiceOptions opts) : opts_(std::move(opts)) {}

  const ServiceOptions& options() const noexcept { return opts_; }

  /// Loads the project from disk. On failure the store stays unloaded and
  /// the error is kept for 503 responses.
  bool load() {
    std::lock_guard writer(write_mu_);
    try {
      const auto& r = opts_.root;
      auto g = read_graph_file(require_artifact(r, artifact::kGraph, "graph"));
      auto aligned = aligned_from_jsonl(io::read_file(require_artifact(r, artifact::kAligned, "align")));
      auto ds = ingest_detections(io::read_file(require_artifact(r, artifact::kDetections, "ingest")));
      std::vector<Verdict> vs;
      if (fs::exists(r / artifact::kVerdicts)) vs = parse_verdicts(io::read_file(r / artifact::kVerdicts));
      publish(make_snapshot(std::move(g), std::move(aligned), std::move(ds), std::move(vs)));
      return true;
    } catch (const Error& e) {
      std::lock_guard lock(snap_mu_);
      snap_.reset();
      load_error_ = e.what();
      return false;
    }
  }

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard lock(snap_mu_);
    return snap_;
  }

  std::string load_error() const {
    std::lock_guard lock(snap_mu_);
    return load_error_;
  }

  class UnknownDamage : public Error {
   public:
    explicit UnknownDamage(const std::string& id) : Error("unknown damage '" + id + "'") {}
  };

  /// Validates, timestamps and appends a verdict; returns it as stored.
  Verdict post_verdict(const std::string& damage_id, const nlohmann::json& body) {
    std::lock_guard writer(write_mu_);
    auto cur = snapshot();
    if (!cur) throw IoError("project not loaded");
    if (!cur->damage_ids.contains(damage_id)) throw UnknownDamage(damage_id);
    if (!body.is_object()) throw SchemaError("verdict body must be a JSON object");
    auto j = body;
    j["damage_id"] = damage_id;
    j["t"] = std::max(now(), cur->last_t);
    Verdict v = verdict_from_json(j, 0);

    const auto log = opts_.root / artifact::kVerdicts;
    {
      std::ofstream out(log, std::ios::app | std::ios::binary);
      out << verdict_to_json(v).dump() << '\n';
      out.flush();
      if (!out) throw IoError("cannot append to " + log.string());
    }
    auto vs = cur->verdicts;
    vs.push_back(v);
    publish(make_snapshot(cur->graph, cur->aligned, cur->detections, std::move(vs)));
    return v;
  }

 private:
  double now() const {
    if (opts_.clock) return opts_.clock();
    using namespace std::chrono;
    return duration<double>(system_clock::now().time_since_epoch()).count();
  }

  void publish(std::shared_ptr<const Snapshot> s) {
    std::lock_guard lock(snap_mu_);
    snap_ = std::move(s);
    load_error_.clear();
  }

  ServiceOptions opts_;
  std::mutex write_mu_;
  mutable std::mutex snap_mu_;
  std::shared_ptr<const Snapshot> snap_;
  std::string load_error_;
};

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& msg) {
  send_json(res, status, {{"error", msg}});
}

/// Image ids are plain file names: letters, digits, '.', '_' and '-', and
/// never "." or "..".
inline bool valid_image_id(std::string_view id) {
  if (id.empty() || id == "." || id == ".." || id.size() > 255) return false;
  for (char ch : id) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '.' ||
                    ch == '_' || ch == '-';
    if (!ok) return false;
  }
  return true;
}

inline std::string content_type_for(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

inline std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<bool> parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  return std::nullopt;
}

}  // namespace detail

/// Body of GET /api/damages for a snapshot and optional filters.
inline nlohmann::json damages_json(const Snapshot& s, const std::optional<BoundingBox>& bbox,
                                   const std::optional<DamageLabel>& label) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& d : s.effective.detections) {
    auto it = s.image_pos.find(d.image_id);
    if (it == s.image_pos.end()) continue;
    const auto& r = s.aligned[it->second];
    if (!r.point) continue;
    if (bbox && !bbox->contains(*r.point)) continue;
    if (label && d.label != *label) continue;
    auto v = s.latest.find(d.damage_id);
    items.push_back({{"damage_id", d.damage_id},
                     {"label", to_string(d.label)},
                     {"score", d.score},
                     {"lat", r.point->lat},
                     {"lon", r.point->lon},
                     {"image_id", d.image_id},
                     {"edge_id", r.edge_id ? nlohmann::json(*r.edge_id) : nlohmann::json(nullptr)},
                     {"bbox", {d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max}},
                     {"status", v == s.latest.end() ? std::string("unverified") : std::string(to_string(v->second.status))}});
  }
  return items;
}

/// Plan for the snapshot's current costs: exact within the limit, heuristic
/// beyond it.
inline MaintenancePlan plan_for(const Snapshot& s, const ServiceOptions& o, NodeId root, const Budget& b,
                                AugmentedGraph* out_graph = nullptr) {
  std::map<EdgeId, double> costs;
  for (const auto& e : s.severity.edges) costs[e.edge_id] = e.score_sum;
  auto ag = augment(s.graph, costs, o.maint_times_s, o.nav_speed_s_per_m, root, o.maint_s_per_m);
  auto p = solve(ag, b, o.exact_limit);
  if (out_graph) *out_graph = std::move(ag);
  return p;
}

/// Registers every /api route on `srv`.
inline void install_routes(httplib::Server& srv, ProjectStore& store) {
  using httplib::Request;
  using httplib::Response;

  srv.set_default_headers({{"Access-Control-Allow-Origin", store.options().cors_origin},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  srv.Options(R"(/api/.*)", [](const Request&, Response& res) { res.status = 204; });
  srv.set_exception_handler([](const Request&, Response& res, std::exception_ptr ep) {
    std::string msg = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      msg = e.what();
    } catch (...) {
    }
    detail::send_error(res, 500, msg);
  });

  auto loaded = [&store](Response& res) {
    auto s = store.snapshot();
    if (!s) detail::send_error(res, 503, "project not loaded: " + store.load_error());
    return s;
  };

  srv.Get("/api/network", [loaded](const Request&, Response& res) {
    auto s = loaded(res);
    if (!s) return;
    res.set_content(s->network_body, "application/geo+json");
  });

  srv.Get("/api/damages", [loaded](const Request& req, Response& res) {
    auto s = loaded(res);
    if (!s) return;
    std::optional<BoundingBox> bbox;
    std::optional<DamageLabel> label;
    if (req.has_param("bbox")) {
      try {
        bbox = parse_bbox(req.get_param_value("bbox"));
      } catch (const InvalidArgument& e) {
        return detail::send_error(res, 400, e.what());
      }
    }
    if (req.has_param("label")) {
      label = parse_label(req.get_param_value("label"));
      if (!label) return detail::send_error(res, 400, "unknown label '" + req.get_param_value("label") + "'");
    }
    detail::send_json(res, 200, damages_json(*s, bbox, label));
  });

  srv.Get(R"(/api/images/(.+))", [&store](const Request& req, Response& res) {
    const std::string id = req.matches[1];
    if (!detail::valid_image_id(id)) return detail::send_error(res, 400, "invalid image id");
    std::error_code ec;
    const auto dir = fs::weakly_canonical(store.options().images(), ec);
    for (const auto& name : {id, id + ".jpg"}) {
      const auto p = fs::weakly_canonical(dir / name, ec);
      if (ec || p.parent_path() != dir || !fs::is_regular_file(p)) continue;
      res.set_content(io::read_file(p), detail::content_type_for(p));
      return;
    }
    detail::send_error(res, 404, "no image '" + id + "'");
  });

  srv.Post(R"(/api/damages/([^/]+)/verdict)", [&store](const Request& req, Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
      return detail::send_error(res, 400, std::string("invalid JSON: ") + e.what());
    }
    try {
      auto v = store.post_verdict(req.matches[1], body);
      detail::send_json(res, 200, verdict_to_json(v));
    } catch (const ProjectStore::UnknownDamage& e) {
      detail::send_error(res, 404, e.what());
    } catch (const SchemaError& e) {
      detail::send_error(res, 422, e.what());
    } catch (const IoError& e) {
      detail::send_error(res, 503, e.what());
    }
  });

  srv.Get("/api/plan", [&store, loaded](const Request& req, Response& res) {
    auto s = loaded(res);
    if (!s) return;
    if (!req.has_param("T")) return detail::send_error(res, 400, "parameter T is required");
    auto T = detail::parse_double(req.get_param_value("T"));
    if (!T || *T <= 0.0) return detail::send_error(res, 400, "T must be a positive number of seconds");
    Budget b{*T};
    if (req.has_param("return")) {
      auto r = detail::parse_bool(req.get_param_value("return"));
      if (!r) return detail::send_error(res, 400, "return must be true or false");
      b.return_to_root = *r;
    }
    if (s->graph.empty()) return detail::send_error(res, 404, "graph has no nodes");
    NodeId root = s->graph.nodes().front().id;
    if (req.has_param("root")) {
      const auto& text = req.get_param_value("root");
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), root);
      if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
        return detail::send_error(res, 400, "root must be a node id");
      if (!s->graph.find_node(root)) return detail::send_error(res, 404, "unknown root node " + text);
    }
    AugmentedGraph ag;
    auto plan = plan_for(*s, store.options(), root, b, &ag);
    detail::send_json(res, 200, plan_to_json(ag, b, plan));
  });
}

}  // namespace roadsurvey::surveyd
