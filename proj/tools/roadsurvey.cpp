// roadsurvey: command-line driver for the survey pipeline.
//
// Stages hand off through files in the output directory:
//   graph -> route, align -> ingest -> score -> plan, serve

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "roadsurvey/circuit.hpp"
#include "roadsurvey/damagemap.hpp"
#include "roadsurvey/eulerize.hpp"
#include "roadsurvey/geoalign.hpp"
#include "roadsurvey/gpx.hpp"
#include "roadsurvey/graph_json.hpp"
#include "roadsurvey/maintplan.hpp"
#include "roadsurvey/osm.hpp"
#include "roadsurvey/project.hpp"
#include "roadsurvey/service.hpp"

using namespace roadsurvey;

namespace {

/// Bad flags or flag combinations; reported with exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Flags {
  std::string config;
  std::string out;

  std::string osm, bbox;
  std::vector<std::string> highway;

  std::string graph;
  std::optional<NodeId> start;
  std::string penalties;
  bool largest_scc = false;

  std::string gps, image_index;
  std::string detections;

  std::optional<double> T;
  std::optional<NodeId> root;
  bool return_to_root = false;
  bool allow_equal = false;
  std::string solver = "auto";

  std::string listen = "127.0.0.1:8080";
  std::string images_dir;
};

ProjectConfig load(const Flags& f) {
  ProjectConfig c;
  if (!f.config.empty()) {
    try {
      c = load_config(f.config);
    } catch (const IoError&) {
      throw;
    } catch (const Error& e) {
      throw UsageError(f.config + ": " + e.what());
    }
  }
  if (!f.out.empty()) c.paths.output_dir = f.out;
  return c;
}

fs::path pick(const std::string& flag, const std::optional<fs::path>& configured, const char* what) {
  if (!flag.empty()) return flag;
  if (configured) return *configured;
  throw UsageError(std::string("no ") + what + " given (flag or config paths)");
}

fs::path output_dir(const ProjectConfig& c) {
  fs::create_directories(c.paths.output_dir);
  return c.paths.output_dir;
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(prec);
  s << v;
  return s.str();
}

void write_json(const fs::path& p, const nlohmann::json& j) { io::write_file(p, j.dump(1) + "\n"); }

int cmd_graph(const Flags& f) {
  auto c = load(f);
  OsmOptions opts;
  opts.bbox = f.bbox.empty() ? c.bbox : std::optional(parse_bbox(f.bbox));
  opts.highway_classes = f.highway.empty() ? c.highway_classes : f.highway;
  const auto osm = pick(f.osm, c.paths.osm, "--osm");
  auto g = parse_osm(io::read_file(osm), opts);
  const auto out = output_dir(c) / artifact::kGraph;
  write_graph_file(out, g);
  std::cout << "graph: " << g.node_count() << " nodes, " << g.edge_count() << " edges, "
            << fmt(total_length_m(g), 1) << " m -> " << out.string() << "\n";
  return 0;
}

TurnPenaltyTable parse_penalties(const std::string& text) {
  TurnPenaltyTable t;
  double* slots[] = {&t.straight, &t.right, &t.left, &t.u_turn};
  std::stringstream ss(text);
  std::string cell;
  std::size_t n = 0;
  while (std::getline(ss, cell, ',')) {
    if (n == 4) throw UsageError("--penalties takes four values: straight,right,left,u_turn");
    auto v = surveyd::detail::parse_double(cell);
    if (!v) throw UsageError("--penalties value '" + cell + "' is not a number");
    *slots[n++] = *v;
  }
  if (n != 4) throw UsageError("--penalties takes four values: straight,right,left,u_turn");
  t.validate();
  return t;
}

nlohmann::json circuit_json(const SurveyCircuit& c, const EulerizedGraph& eg) {
  nlohmann::json choices = nlohmann::json::array();
  for (const auto& ch : c.choices)
    choices.push_back({{"node", ch.node},
                       {"incoming", ch.incoming ? nlohmann::json(*ch.incoming) : nlohmann::json(nullptr)},
                       {"chosen", ch.chosen},
                       {"turn", to_string(ch.turn)},
                       {"candidates", ch.candidates}});
  nlohmann::json dup = nlohmann::json::object();
  for (const auto& [id, n] : eg.duplication_map()) dup[std::to_string(id)] = n;
  return {{"start_node", c.start_node},
          {"edges", c.edges},
          {"length_m", circuit_length_m(c, eg.base)},
          {"original_length_m", eg.original_length_m},
          {"added_length_m", eg.added_length_m},
          {"overhead_ratio", eg.overhead_ratio()},
          {"duplications", std::move(dup)},
          {"choices", std::move(choices)}};
}

int cmd_route(const Flags& f) {
  auto c = load(f);
  const auto out = output_dir(c);
  const fs::path graph_path = f.graph.empty() ? require_artifact(out, artifact::kGraph, "graph") : fs::path(f.graph);
  auto g = read_graph_file(graph_path);
  if (f.largest_scc) {
    const auto before = g.edge_count();
    g = largest_strong_component(g);
    std::cout << "largest strongly connected component keeps " << g.edge_count() << " of " << before
              << " edges\n";
  }
  if (g.empty()) throw EmptyGraph();
  const auto penalties = f.penalties.empty() ? c.penalties : parse_penalties(f.penalties);
  const NodeId start = f.start ? *f.start : g.nodes().front().id;
  g.node_index(start);
  auto eg = eulerize(g);
  auto circuit = euler_circuit(eg, start, penalties);
  write_json(out / artifact::kCircuit, circuit_json(circuit, eg));
  io::write_file(out / artifact::kGpx, export_gpx(circuit, eg.base));
  std::size_t uturns = 0;
  for (const auto& ch : circuit.choices) uturns += ch.turn == Turn::UTurn;
  std::cout << "original length:   " << fmt(eg.original_length_m, 1) << " m\n"
            << "eulerized length:  " << fmt(eg.total_length_m(), 1) << " m\n"
            << "added length:      " << fmt(eg.added_length_m, 1) << " m\n"
            << "overhead:          " << fmt(100.0 * eg.overhead_ratio(), 1) << "%\n"
            << "circuit:           " << circuit.edges.size() << " edges from node " << start << ", " << uturns
            << " U-turns\n"
            << "wrote " << (out / artifact::kCircuit).string() << ", " << (out / artifact::kGpx).string() << "\n";
  return 0;
}

int cmd_align(const Flags& f) {
  auto c = load(f);
  const auto out = output_dir(c);
  auto g = read_graph_file(require_artifact(out, artifact::kGraph, "graph"));
  auto track = read_gps_csv(io::read_file(pick(f.gps, c.paths.gps_csv, "--gps")));
  auto images = read_image_index_csv(io::read_file(pick(f.image_index, c.paths.image_index, "--images")));
  auto r = align(track, images, g, c.align);
  io::write_file(out / artifact::kAligned, aligned_to_jsonl(r.records));
  std::cout << "aligned " << r.records.size() << " of " << images.size() << " images (dropped "
            << r.dropped_out_of_span << " outside the GPS span, " << r.dropped_by_spacing << " by spacing, "
            << r.dropped_unassigned << " off the network) -> " << (out / artifact::kAligned).string() << "\n";
  return 0;
}

double total_score(std::span<const Detection> ds) {
  double s = 0.0;
  for (const auto& d : ds) s += d.score;
  return s;
}

int cmd_ingest(const Flags& f) {
  auto c = load(f);
  const auto out = output_dir(c);
  auto ds = ingest_detections(io::read_file(pick(f.detections, c.paths.detections, "--detections")));
  io::write_file(out / artifact::kDetections, detections_to_jsonl(ds));
  std::cout << "ingested " << ds.size() << " detections, total score " << fmt(total_score(ds), 6) << " -> "
            << (out / artifact::kDetections).string() << "\n";
  return 0;
}

int cmd_score(const Flags& f) {
  auto c = load(f);
  const auto out = output_dir(c);
  auto g = read_graph_file(require_artifact(out, artifact::kGraph, "graph"));
  auto aligned = aligned_from_jsonl(io::read_file(require_artifact(out, artifact::kAligned, "align")));
  auto ds = ingest_detections(io::read_file(require_artifact(out, artifact::kDetections, "ingest")));
  std::vector<Verdict> vs;
  if (fs::exists(out / artifact::kVerdicts)) vs = parse_verdicts(io::read_file(out / artifact::kVerdicts));
  auto eff = effective_detections(ds, vs);
  for (const auto& w : eff.warnings) std::cerr << "warning: " << w << "\n";
  auto sev = edge_severity(eff.detections, aligned, g);
  auto geo = severity_geojson(g, sev);
  write_json(out / artifact::kSeverity, severity_to_json(sev));
  write_json(out / artifact::kSeverityGeojson, geo);

  // Conservation check, recomputed from what was written.
  std::unordered_set<std::string> assigned;
  for (const auto& r : aligned)
    if (r.edge_id) assigned.insert(r.image_id);
  double expected = 0.0;
  for (const auto& d : eff.detections)
    if (assigned.contains(d.image_id)) expected += d.score;
  double from_geojson = 0.0;
  for (const auto& feat : geo["features"])
    from_geojson += feat["properties"]["severity"].get<double>() * feat["properties"]["distance_m"].get<double>();
  const bool ok = std::abs(from_geojson - expected) <= 1e-9 * std::max(1.0, std::abs(expected));
  std::size_t damaged = 0;
  for (const auto& e : sev.edges) damaged += e.damage_count > 0;
  std::cout << "ingested score total:        " << fmt(total_score(ds), 6) << " (" << ds.size() << " detections, "
            << vs.size() << " verdicts)\n"
            << "effective assigned total:    " << fmt(expected, 6) << " (" << sev.skipped_detections
            << " detections without an edge)\n"
            << "sum of severity x distance:  " << fmt(from_geojson, 6) << "\n"
            << "conservation check:          " << (ok ? "ok" : "MISMATCH") << "\n"
            << damaged << " of " << g.edge_count() << " edges carry damage -> "
            << (out / artifact::kSeverityGeojson).string() << "\n";
  if (!ok) throw Error("severity totals do not match the effective detection scores");
  return 0;
}

int cmd_plan(const Flags& f) {
  auto c = load(f);
  const auto out = output_dir(c);
  auto g = read_graph_file(require_artifact(out, artifact::kGraph, "graph"));
  auto costs = costs_from_severity_json(
      nlohmann::json::parse(io::read_file(require_artifact(out, artifact::kSeverity, "score"))));
  if (g.empty()) throw EmptyGraph();
  const NodeId root = f.root ? *f.root : g.nodes().front().id;
  const Budget b{*f.T, f.return_to_root, !f.allow_equal};
  auto ag = augment(g, costs, c.maint_times_s, c.nav_speed_s_per_m, root, c.maint_s_per_m);
  MaintenancePlan p;
  if (f.solver == "exact")
    p = solve_exact(ag, b, c.exact_limit);
  else if (f.solver == "heuristic")
    p = solve_heuristic(ag, b);
  else
    p = solve(ag, b, c.exact_limit);
  write_json(out / artifact::kPlan, plan_to_json(ag, b, p));
  write_json(out / artifact::kPlanGeojson, plan_geojson(ag, p));
  std::cout << "c(P) = " << fmt(p.total_cost, 6) << "\n"
            << "t(P) = " << fmt(p.total_time_s, 3) << " s (budget " << fmt(b.T, 3) << " s"
            << (b.return_to_root ? ", returning to root" : "") << ")\n"
            << "solver: " << p.solver << (p.optimal ? " (optimal)" : "") << "\n"
            << "edges:";
  if (p.steps.empty()) std::cout << " (empty plan)";
  for (const auto& s : p.steps) std::cout << " " << (s.action == PlanAction::Maintain ? "M" : "t") << s.edge_id;
  std::cout << "\n";
  return 0;
}

int cmd_serve(const Flags& f) {
  auto c = load(f);
  surveyd::ServiceOptions o;
  if (!f.out.empty())
    o.root = f.out;
  else if (const char* env = std::getenv("SURVEYD_PROJECT"); env && *env)
    o.root = env;
  else
    o.root = c.paths.output_dir;
  if (!f.images_dir.empty())
    o.images_dir = fs::path(f.images_dir);
  else
    o.images_dir = c.paths.images_dir;
  o.nav_speed_s_per_m = c.nav_speed_s_per_m;
  o.maint_s_per_m = c.maint_s_per_m;
  o.exact_limit = c.exact_limit;
  o.maint_times_s = c.maint_times_s;

  const auto colon = f.listen.rfind(':');
  if (colon == std::string::npos) throw UsageError("--listen expects host:port");
  const std::string host = f.listen.substr(0, colon);
  int port = 0;
  const std::string port_text = f.listen.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port < 0 || port > 65535)
    throw UsageError("--listen port must be 0-65535");

  surveyd::ProjectStore store(o);
  if (!store.load()) std::cerr << "warning: project not loaded: " << store.load_error() << "\n";
  httplib::Server srv;
  surveyd::install_routes(srv, store);
  const int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot listen on " + f.listen);
  std::cout << "surveyd serving " << o.root.string() << " on http://" << host << ":" << bound << std::endl;
  return srv.listen_after_bind() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Road survey toolkit: coverage routes, image alignment, damage severity and maintenance plans"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "Project config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--out", f.out, "Output directory (overrides the config)");

  auto* graph = app.add_subcommand("graph", "Build the road graph from OpenStreetMap XML");
  graph->add_option("--osm", f.osm, "OSM XML file");
  graph->add_option("--bbox", f.bbox, "Keep segments inside w,s,e,n");
  graph->add_option("--highway", f.highway, "Accepted highway classes")->delimiter(',');

  auto* route = app.add_subcommand("route", "Plan a covering circuit and export GPX");
  route->add_option("--graph", f.graph, "Graph JSON (default: <out>/graph.json)");
  route->add_option("--start", f.start, "Start node id (default: first node)");
  route->add_option("--penalties", f.penalties, "Turn penalties straight,right,left,u_turn");
  route->add_flag("--largest-scc", f.largest_scc, "Restrict to the largest strongly connected component");

  auto* alignc = app.add_subcommand("align", "Geo-localize images on the road graph");
  alignc->add_option("--gps", f.gps, "GPS track CSV (t,lat,lon)");
  alignc->add_option("--images", f.image_index, "Image index CSV (image_id,t)");

  auto* ingest = app.add_subcommand("ingest", "Validate and normalize detector output");
  ingest->add_option("--detections", f.detections, "Detections JSON Lines");

  app.add_subcommand("score", "Per-edge damage severity");

  auto* plan = app.add_subcommand("plan", "Maintenance plan under a time budget");
  plan->add_option("--T", f.T, "Time budget in seconds")->required();
  plan->add_option("--root", f.root, "Root node id (default: first node)");
  plan->add_flag("--return", f.return_to_root, "Require the plan to end at the root");
  plan->add_flag("--allow-equal", f.allow_equal, "Accept t(P) == T");
  plan->add_option("--solver", f.solver, "auto, exact or heuristic")
      ->check(CLI::IsMember({"auto", "exact", "heuristic"}));

  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  serve->add_option("--listen", f.listen, "host:port (port 0 picks a free one)");
  serve->add_option("--images-dir", f.images_dir, "Image directory (default: <project>/images)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (plan->parsed() && !(*f.T > 0.0 && std::isfinite(*f.T))) throw UsageError("--T must be a positive number");
    if (graph->parsed()) return cmd_graph(f);
    if (route->parsed()) return cmd_route(f);
    if (alignc->parsed()) return cmd_align(f);
    if (ingest->parsed()) return cmd_ingest(f);
    if (app.got_subcommand("score")) return cmd_score(f);
    if (plan->parsed()) return cmd_plan(f);
    if (serve->parsed()) return cmd_serve(f);
  } catch (const UsageError& e) {
    std::cerr << "roadsurvey: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "roadsurvey: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "roadsurvey: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "roadsurvey: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "roadsurvey: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
