#include <gtest/gtest.h>
#include <sys/wait.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <chrono>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "roadsurvey/graph_json.hpp"
#include "support.hpp"
#include "tempdir.hpp"

using namespace roadsurvey;
using roadsurvey::testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

const fs::path kFixture = fs::path(ROADSURVEY_FIXTURE_DIR) / "synthetic";

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string("\"") + ROADSURVEY_CLI + "\" " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) throw std::runtime_error("popen failed");
  std::string out;
  char buf[4096];
  while (auto n = fread(buf, 1, sizeof buf, p)) out.append(buf, n);
  const int st = pclose(p);
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, out};
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

std::string project(const fs::path& out) {
  return "--config " + q(kFixture / "config.json") + " --out " + q(out) + " ";
}

std::string slurp(const fs::path& p) { return io::read_file(p); }

void run_pipeline(const fs::path& out) {
  for (const char* step : {"graph", "route", "align", "ingest", "score", "plan --T 20000"}) {
    auto r = run(project(out) + step);
    ASSERT_EQ(r.code, 0) << step << "\n" << r.out;
  }
}

}  // namespace

TEST(Cli, UsageExitCodes) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("plan").code, 2);
  EXPECT_EQ(run("route --bogus").code, 2);
  TempDir dir;
  auto r = run("--out " + q(dir.path()) + " plan --T 0");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("--T"), std::string::npos);
}

TEST(Cli, GraphFromFixture) {
  TempDir dir;
  auto r = run(project(dir.path()) + "graph");
  ASSERT_EQ(r.code, 0) << r.out;
  // Rows: 2 two-way streets (6 arcs each) + 1 one-way (3); columns: 3 two-way
  // (4 arcs each) + 1 one-way (2). Footway and building are filtered out.
  auto g = read_graph_file(dir / "graph.json");
  EXPECT_EQ(g.node_count(), 12u);
  EXPECT_EQ(g.edge_count(), 29u);
  EXPECT_NE(r.out.find("12 nodes, 29 edges"), std::string::npos);

  const auto first = slurp(dir / "graph.json");
  ASSERT_EQ(run(project(dir.path()) + "graph").code, 0);
  EXPECT_EQ(slurp(dir / "graph.json"), first);
}

TEST(Cli, GraphFlagsOverrideConfig) {
  TempDir dir;
  auto r = run(project(dir.path()) + "graph --highway tertiary");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(read_graph_file(dir / "graph.json").edge_count(), 6u);
  r = run(project(dir.path()) + "graph --highway footway");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(read_graph_file(dir / "graph.json").edge_count(), 4u);
  // Only the two southern rows survive the box.
  r = run(project(dir.path()) + "graph --bbox 135.19,34.689,135.2,34.6915");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(read_graph_file(dir / "graph.json").edge_count(), 9u + 4u + 3u);
  EXPECT_EQ(run(project(dir.path()) + "graph --bbox 1,2,3").code, 1);
}

TEST(Cli, GraphErrors) {
  TempDir dir;
  auto r = run("--out " + q(dir.path()) + " graph --osm " + q(dir / "absent.osm"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("absent.osm"), std::string::npos) << r.out;

  io::write_file(dir / "bad.osm", "<osm>\n<node id=\"1\" lat=\"1\" lon=\"2\">\n</osm>\n");
  r = run("--out " + q(dir.path()) + " graph --osm " + q(dir / "bad.osm"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("line 3"), std::string::npos) << r.out;

  EXPECT_EQ(run("--out " + q(dir.path()) + " graph").code, 2);
}

TEST(Cli, RouteReportsOverhead) {
  TempDir dir;
  auto cycle = oracle::grid_nodes(3);
  cycle.add_straight_edge(0, 0, 1, 100);
  cycle.add_straight_edge(1, 1, 2, 100);
  cycle.add_straight_edge(2, 2, 0, 200);
  write_graph_file(dir / "cycle.json", cycle);
  auto r = run("--out " + q(dir.path()) + " route --graph " + q(dir / "cycle.json") + " --start 0");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("overhead:          0.0%"), std::string::npos) << r.out;

  // The GPX file is structurally valid 1.1 with a closed track.
  boost::property_tree::ptree pt;
  std::istringstream in(slurp(dir / "route.gpx"));
  boost::property_tree::read_xml(in, pt);
  EXPECT_EQ(pt.get<std::string>("gpx.<xmlattr>.version"), "1.1");
  EXPECT_EQ(pt.get_child("gpx").count("trk"), 1u);
  EXPECT_EQ(pt.get_child("gpx.trk").count("trkseg"), 1u);
  EXPECT_EQ(pt.get_child("gpx.trk.trkseg").count("trkpt"), 4u);

  auto two = oracle::grid_nodes(2);
  two.add_straight_edge(0, 0, 1, 100);
  two.add_straight_edge(1, 0, 1, 100);
  two.add_straight_edge(2, 1, 0, 150);
  ASSERT_EQ(oracle::brute_force_min_added_length(two), 150.0);
  write_graph_file(dir / "two.json", two);
  r = run("--out " + q(dir.path()) + " route --graph " + q(dir / "two.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("added length:      150.0 m"), std::string::npos) << r.out;
  auto circuit = nlohmann::json::parse(slurp(dir / "circuit.json"));
  EXPECT_EQ(circuit["edges"].size(), 4u);
  EXPECT_EQ(circuit["duplications"]["2"], 1);
  EXPECT_EQ(circuit["added_length_m"], 150.0);
}

TEST(Cli, RouteRejectsDisconnectedGraphs) {
  TempDir dir;
  auto g = oracle::grid_nodes(3);
  g.add_straight_edge(0, 0, 1, 100);
  g.add_straight_edge(1, 1, 0, 100);
  g.add_straight_edge(2, 1, 2, 100);
  write_graph_file(dir / "graph.json", g);
  auto r = run("--out " + q(dir.path()) + " route");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("component 0: 0 1"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("component 1: 2"), std::string::npos) << r.out;

  r = run("--out " + q(dir.path()) + " route --largest-scc");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("keeps 2 of 3 edges"), std::string::npos) << r.out;

  EXPECT_EQ(run("--out " + q(dir.path()) + " route --start 77").code, 1);
  EXPECT_EQ(run("--out " + q(dir.path()) + " route --largest-scc --penalties 0,1,2").code, 2);
  EXPECT_EQ(run("--out " + q(dir.path()) + " route --largest-scc --penalties 0,1,x,3").code, 2);
  EXPECT_EQ(run("--out " + q(dir.path()) + " route --largest-scc --penalties 0,1,5,3").code, 1);
}

TEST(Cli, MissingArtifactsNameTheProducer) {
  TempDir dir;
  struct Case {
    const char* cmd;
    const char* producer;
  };
  for (auto [cmd, producer] : {Case{"route", "graph"}, Case{"align", "graph"}, Case{"score", "graph"},
                               Case{"plan --T 10", "graph"}}) {
    auto r = run(project(dir.path()) + cmd);
    EXPECT_EQ(r.code, 2) << cmd;
    EXPECT_NE(r.out.find(std::string("run `roadsurvey ") + producer + "` first"), std::string::npos) << r.out;
  }
  ASSERT_EQ(run(project(dir.path()) + "graph").code, 0);
  auto r = run(project(dir.path()) + "score");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("run `roadsurvey align` first"), std::string::npos) << r.out;
  ASSERT_EQ(run(project(dir.path()) + "align").code, 0);
  r = run(project(dir.path()) + "score");
  EXPECT_NE(r.out.find("run `roadsurvey ingest` first"), std::string::npos) << r.out;
  r = run(project(dir.path()) + "plan --T 10");
  EXPECT_NE(r.out.find("run `roadsurvey score` first"), std::string::npos) << r.out;
}

TEST(Cli, PipelineConservesScore) {
  TempDir dir;
  const auto t0 = std::chrono::steady_clock::now();
  run_pipeline(dir.path());
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 60.0);

  // Recompute the effective total straight from the artifacts.
  std::map<std::string, bool> assigned;
  const auto aligned_text = slurp(dir / "aligned.jsonl");
  const auto det_text = slurp(dir / "detections.jsonl");
  for (auto line : io::split_lines(aligned_text))
    if (!io::is_blank(line)) assigned[nlohmann::json::parse(line)["image_id"]] = true;
  double expected = 0.0;
  std::size_t n = 0;
  for (auto line : io::split_lines(det_text)) {
    if (io::is_blank(line)) continue;
    auto d = nlohmann::json::parse(line);
    if (assigned.contains(d["image_id"])) expected += d["score"].get<double>(), ++n;
  }
  ASSERT_GT(n, 10u);
  auto geo = nlohmann::json::parse(slurp(dir / "severity.geojson"));
  double got = 0.0;
  for (const auto& f : geo["features"]) {
    const auto& p = f["properties"];
    got += p["severity"].get<double>() * p["distance_m"].get<double>();
    EXPECT_NEAR(p["severity"].get<double>() * p["distance_m"].get<double>(), p["score_sum"].get<double>(), 1e-12);
  }
  EXPECT_NEAR(got, expected, 1e-9 * expected);

  auto plan = nlohmann::json::parse(slurp(dir / "plan.json"));
  EXPECT_LT(plan["total_time_s"].get<double>(), 20000.0);
  EXPECT_GT(plan["total_cost"].get<double>(), 0.0);
}

TEST(Cli, ScoreAppliesVerdicts) {
  TempDir dir;
  run_pipeline(dir.path());
  auto before = nlohmann::json::parse(slurp(dir / "severity.json"))["total_score"].get<double>();
  auto aligned = slurp(dir / "aligned.jsonl");
  std::string victim;
  double victim_score = 0.0;
  const auto det_text = slurp(dir / "detections.jsonl");
  for (auto line : io::split_lines(det_text)) {
    auto d = nlohmann::json::parse(line);
    if (aligned.find("\"" + d["image_id"].get<std::string>() + "\"") != std::string::npos) {
      victim = d["damage_id"];
      victim_score = d["score"];
      break;
    }
  }
  ASSERT_FALSE(victim.empty());
  io::write_file(dir / "verdicts.jsonl",
                 R"({"damage_id":")" + victim + R"(","status":"rejected","author":"t","t":1}
{"damage_id":"nope","status":"confirmed","author":"t","t":2}
)");
  auto r = run(project(dir.path()) + "score");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("unknown damage 'nope'"), std::string::npos) << r.out;
  auto after = nlohmann::json::parse(slurp(dir / "severity.json"))["total_score"].get<double>();
  EXPECT_NEAR(after, before - victim_score, 1e-9);
}

TEST(Cli, PlanOutputs) {
  TempDir dir;
  run_pipeline(dir.path());
  auto r = run(project(dir.path()) + "plan --T 0.001");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("c(P) = 0.000000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("(empty plan)"), std::string::npos) << r.out;

  r = run(project(dir.path()) + "plan --T 20000 --solver exact");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("exceed the exact solver limit"), std::string::npos) << r.out;

  r = run(project(dir.path()) + "plan --T 20000 --return --root 1011");
  ASSERT_EQ(r.code, 0) << r.out;
  auto plan = nlohmann::json::parse(slurp(dir / "plan.json"));
  EXPECT_EQ(plan["root"], 1011);
  EXPECT_EQ(plan["return_to_root"], true);
  EXPECT_EQ(run(project(dir.path()) + "plan --T 100 --root 5").code, 1);
  EXPECT_EQ(run(project(dir.path()) + "plan --T 100 --solver magic").code, 2);
}

TEST(Cli, StagesAreIdempotent) {
  TempDir a, b;
  run_pipeline(a.path());
  run_pipeline(b.path());
  for (const auto& e : fs::directory_iterator(a.path()))
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path().filename();
}

TEST(Cli, BadConfigIsUsageError) {
  TempDir dir;
  io::write_file(dir / "c.json", R"({"sigma": 2})");
  auto r = run("--config " + q(dir / "c.json") + " graph");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("unknown key 'sigma'"), std::string::npos) << r.out;
  io::write_file(dir / "c.json", "{");
  EXPECT_EQ(run("--config " + q(dir / "c.json") + " graph").code, 2);
  EXPECT_EQ(run("--config " + q(dir / "absent.json") + " graph").code, 2);
}

TEST(Cli, ServeTakesProjectFromEnvironment) {
  TempDir dir;
  ASSERT_EQ(run(project(dir.path()) + "graph").code, 0);
  const std::string cmd = "SURVEYD_PROJECT=" + q(dir.path()) + " timeout 2 \"" + ROADSURVEY_CLI +
                          "\" serve --listen 127.0.0.1:0 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  ASSERT_NE(p, nullptr);
  std::string out;
  char buf[512];
  while (auto n = fread(buf, 1, sizeof buf, p)) out.append(buf, n);
  pclose(p);
  EXPECT_NE(out.find("surveyd serving " + dir.path().string()), std::string::npos) << out;
  // Only graph.json exists, so the service starts unloaded and says why.
  EXPECT_NE(out.find("project not loaded"), std::string::npos) << out;

  EXPECT_EQ(run("--out " + q(dir.path()) + " serve --listen nowhere").code, 2);
  EXPECT_EQ(run("--out " + q(dir.path()) + " serve --listen 127.0.0.1:99999").code, 2);
}
