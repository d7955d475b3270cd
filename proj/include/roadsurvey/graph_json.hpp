#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "roadsurvey/graph.hpp"
#include "roadsurvey/io.hpp"

namespace roadsurvey {

using json = nlohmann::json;

inline json point_to_json(const GeoPoint& p) { return json{{"lat", p.lat}, {"lon", p.lon}}; }

inline json graph_to_json(const RoadGraph& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes()) nodes.push_back({{"id", n.id}, {"point", point_to_json(n.point)}});
  json edges = json::array();
  for (const auto& e : g.edges()) {
    json geom = json::array();
    for (const auto& p : e.geometry) geom.push_back(point_to_json(p));
    json je{{"id", e.id},
            {"from", e.from},
            {"to", e.to},
            {"distance_m", e.distance_m},
            {"geometry", std::move(geom)}};
    if (e.name) je["name"] = *e.name;
    edges.push_back(std::move(je));
  }
  return json{{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

namespace detail {

inline GeoPoint point_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("lat") || !j.contains("lon") || !j["lat"].is_number() ||
      !j["lon"].is_number())
    throw SchemaError(where + ": expected {lat, lon}");
  GeoPoint p{j["lat"].get<double>(), j["lon"].get<double>()};
  if (!p.valid()) throw SchemaError(where + ": coordinate out of range");
  return p;
}

}  // namespace detail

inline RoadGraph graph_from_json(const json& j) {
  if (!j.is_object() || !j.contains("nodes") || !j.contains("edges") || !j["nodes"].is_array() ||
      !j["edges"].is_array())
    throw SchemaError("graph JSON must be an object with 'nodes' and 'edges' arrays");
  RoadGraph g;
  try {
    for (const auto& jn : j["nodes"]) {
      if (!jn.contains("id") || !jn["id"].is_number_integer())
        throw SchemaError("node without integer id");
      const auto id = jn["id"].get<NodeId>();
      g.add_node({id, detail::point_from_json(jn.value("point", json{}), "node " + std::to_string(id))});
    }
    for (const auto& je : j["edges"]) {
      for (const char* key : {"id", "from", "to"})
        if (!je.contains(key) || !je[key].is_number_integer())
          throw SchemaError(std::string("edge without integer '") + key + "'");
      if (!je.contains("distance_m") || !je["distance_m"].is_number())
        throw SchemaError("edge without numeric distance_m");
      Edge e;
      e.id = je["id"].get<EdgeId>();
      e.from = je["from"].get<NodeId>();
      e.to = je["to"].get<NodeId>();
      e.distance_m = je["distance_m"].get<double>();
      const auto where = "edge " + std::to_string(e.id);
      if (!je.contains("geometry") || !je["geometry"].is_array())
        throw SchemaError(where + ": missing geometry array");
      for (const auto& jp : je["geometry"]) e.geometry.push_back(detail::point_from_json(jp, where));
      if (je.contains("name") && je["name"].is_string()) e.name = je["name"].get<std::string>();
      g.add_edge(std::move(e));
    }
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& err) {
    throw SchemaError(err.what());
  }
  return g;
}

inline RoadGraph read_graph_file(const std::filesystem::path& path) {
  const auto text = io::read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return graph_from_json(j);
}

inline void write_graph_file(const std::filesystem::path& path, const RoadGraph& g) {
  io::write_file(path, graph_to_json(g).dump(1) + "\n");
}

}  // namespace roadsurvey
