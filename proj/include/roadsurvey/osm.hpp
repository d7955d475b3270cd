#pragma once

#include <expat.h>

#include <charconv>
#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "roadsurvey/graph.hpp"

namespace roadsurvey {

/// Axis-aligned lon/lat box, inclusive on all sides.
struct BoundingBox {
  double west = -180.0;
  double south = -90.0;
  double east = 180.0;
  double north = 90.0;

  bool contains(const GeoPoint& p) const noexcept {
    return p.lon >= west && p.lon <= east && p.lat >= south && p.lat <= north;
  }
};

/// Parses "w,s,e,n". Throws InvalidArgument when malformed or inverted.
inline BoundingBox parse_bbox(std::string_view text) {
  BoundingBox b;
  double* slots[] = {&b.west, &b.south, &b.east, &b.north};
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) {
    auto end = text.find(',', pos);
    if ((i < 3) == (end == std::string_view::npos))
      throw InvalidArgument("bbox must be w,s,e,n");
    auto tok = text.substr(pos, end == std::string_view::npos ? text.size() - pos : end - pos);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), *slots[i]);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || tok.empty())
      throw InvalidArgument("bbox component '" + std::string(tok) + "' is not a number");
    pos = end + 1;
  }
  if (!(b.west <= b.east && b.south <= b.north) || b.south < -90.0 || b.north > 90.0 ||
      b.west < -180.0 || b.east > 180.0)
    throw InvalidArgument("bbox must satisfy w<=e, s<=n within coordinate bounds");
  return b;
}

struct OsmOptions {
  /// Segments are kept only when both endpoints fall inside.
  std::optional<BoundingBox> bbox;
  /// Accepted `highway` values; empty accepts every highway way.
  std::vector<std::string> highway_classes;
};

namespace detail {

struct OsmWay {
  std::int64_t id = 0;
  std::size_t line = 0;
  std::vector<std::int64_t> refs;
  std::unordered_map<std::string, std::string> tags;
};

struct OsmNode {
  GeoPoint point;
  std::size_t order = 0;
};

class OsmCollector {
 public:
  explicit OsmCollector(XML_Parser p) : parser_(p) {}

  std::unordered_map<std::int64_t, OsmNode> nodes;
  std::vector<OsmWay> ways;
  std::optional<ParseError> error;

  static void XMLCALL on_start(void* self, const XML_Char* name, const XML_Char** attrs) {
    static_cast<OsmCollector*>(self)->start(name, attrs);
  }
  static void XMLCALL on_end(void* self, const XML_Char* name) {
    static_cast<OsmCollector*>(self)->end(name);
  }

 private:
  enum class Ctx { None, Node, Way, Other };

  std::size_t line() const { return static_cast<std::size_t>(XML_GetCurrentLineNumber(parser_)); }

  void fail(const std::string& msg) {
    if (!error) error.emplace(msg, line());
    XML_StopParser(parser_, XML_FALSE);
  }

  static const char* attr(const XML_Char** attrs, const char* key) {
    for (; *attrs; attrs += 2)
      if (std::strcmp(attrs[0], key) == 0) return attrs[1];
    return nullptr;
  }

  template <class T>
  bool number(const XML_Char** attrs, const char* key, const char* elem, T& out) {
    const char* v = attr(attrs, key);
    if (!v) {
      fail(std::string(elem) + " element without '" + key + "' attribute");
      return false;
    }
    const char* e = v + std::strlen(v);
    auto [ptr, ec] = std::from_chars(v, e, out);
    if (ec != std::errc{} || ptr != e) {
      fail(std::string(elem) + " attribute " + key + "='" + v + "' is not a number");
      return false;
    }
    return true;
  }

  void start(const XML_Char* name, const XML_Char** attrs) {
    ++depth_;
    if (std::strcmp(name, "node") == 0 && ctx_ == Ctx::None) {
      std::int64_t id;
      double lat, lon;
      if (!number(attrs, "id", "node", id) || !number(attrs, "lat", "node", lat) ||
          !number(attrs, "lon", "node", lon))
        return;
      GeoPoint p{lat, lon};
      if (!p.valid()) return fail("node " + std::to_string(id) + " has out-of-range coordinates");
      nodes.insert_or_assign(id, OsmNode{p, nodes.size()});
      enter(Ctx::Node);
    } else if (std::strcmp(name, "way") == 0 && ctx_ == Ctx::None) {
      OsmWay w;
      if (!number(attrs, "id", "way", w.id)) return;
      w.line = line();
      ways.push_back(std::move(w));
      enter(Ctx::Way);
    } else if (std::strcmp(name, "nd") == 0 && ctx_ == Ctx::Way) {
      std::int64_t ref;
      if (!number(attrs, "ref", "nd", ref)) return;
      ways.back().refs.push_back(ref);
    } else if (std::strcmp(name, "tag") == 0 && ctx_ == Ctx::Way) {
      const char* k = attr(attrs, "k");
      const char* v = attr(attrs, "v");
      if (!k || !v) return fail("tag element needs 'k' and 'v'");
      ways.back().tags.insert_or_assign(k, v);
    } else if (ctx_ == Ctx::None && depth_ > 1) {
      enter(Ctx::Other);
    }
  }

  void end(const XML_Char*) {
    if (ctx_ != Ctx::None && depth_ == ctx_depth_) ctx_ = Ctx::None;
    --depth_;
  }

  void enter(Ctx c) {
    ctx_ = c;
    ctx_depth_ = depth_;
  }

  XML_Parser parser_;
  Ctx ctx_ = Ctx::None;
  int depth_ = 0;
  int ctx_depth_ = 0;
};

enum class Direction { Forward, Backward, Both };

inline Direction way_direction(const OsmWay& w) {
  auto it = w.tags.find("oneway");
  if (it == w.tags.end()) return Direction::Both;
  if (it->second == "yes" || it->second == "true" || it->second == "1") return Direction::Forward;
  if (it->second == "-1" || it->second == "reverse") return Direction::Backward;
  return Direction::Both;
}

}  // namespace detail

/// Builds a directed road multigraph from an OSM XML document.
///
/// Every `highway` way contributes one edge per consecutive node pair in its
/// drawing direction and, unless one-way, the reversed edges as well. Edge
/// ids are assigned sequentially in document order (forward segments of a way,
/// then its reverse segments). Graph nodes keep OSM ids and document order;
/// nodes not used by any kept segment are dropped.
inline RoadGraph parse_osm(std::string_view xml, const OsmOptions& opts = {}) {
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
      XML_ParserCreate(nullptr), &XML_ParserFree);
  if (!parser) throw Error("cannot allocate XML parser");
  detail::OsmCollector col(parser.get());
  XML_SetUserData(parser.get(), &col);
  XML_SetElementHandler(parser.get(), &detail::OsmCollector::on_start, &detail::OsmCollector::on_end);

  // Feed in chunks so sizes beyond INT_MAX are fine.
  constexpr std::size_t kChunk = 1 << 20;
  std::size_t off = 0;
  do {
    const std::size_t n = std::min(kChunk, xml.size() - off);
    const bool last = off + n == xml.size();
    if (XML_Parse(parser.get(), xml.data() + off, static_cast<int>(n), last) != XML_STATUS_OK) {
      if (col.error) throw *col.error;
      throw ParseError(std::string("malformed XML: ") + XML_ErrorString(XML_GetErrorCode(parser.get())),
                       static_cast<std::size_t>(XML_GetCurrentLineNumber(parser.get())));
    }
    off += n;
  } while (off < xml.size());

  struct Segment {
    std::int64_t from, to;
    const std::optional<std::string>* name;
  };
  std::vector<Segment> segments;
  std::vector<std::optional<std::string>> names;
  names.reserve(col.ways.size());

  for (const auto& w : col.ways) {
    auto hw = w.tags.find("highway");
    if (hw == w.tags.end()) continue;
    if (!opts.highway_classes.empty() &&
        std::find(opts.highway_classes.begin(), opts.highway_classes.end(), hw->second) ==
            opts.highway_classes.end())
      continue;
    for (auto ref : w.refs)
      if (!col.nodes.contains(ref))
        throw ParseError("way " + std::to_string(w.id) + " references missing node " +
                             std::to_string(ref),
                         w.line);
    auto nm = w.tags.find("name");
    names.push_back(nm == w.tags.end() ? std::nullopt : std::optional<std::string>(nm->second));
    const auto* name = &names.back();

    std::vector<std::pair<std::int64_t, std::int64_t>> fwd;
    for (std::size_t i = 1; i < w.refs.size(); ++i) {
      const auto a = w.refs[i - 1], b = w.refs[i];
      const auto& pa = col.nodes.at(a).point;
      const auto& pb = col.nodes.at(b).point;
      // Zero-length segments (repeated refs or coincident nodes) carry no road.
      if (a == b || haversine_m(pa, pb) <= 0.0) continue;
      if (opts.bbox && !(opts.bbox->contains(pa) && opts.bbox->contains(pb))) continue;
      fwd.emplace_back(a, b);
    }
    const auto dir = detail::way_direction(w);
    if (dir != detail::Direction::Backward)
      for (const auto& [a, b] : fwd) segments.push_back({a, b, name});
    if (dir != detail::Direction::Forward)
      for (auto it = fwd.rbegin(); it != fwd.rend(); ++it) segments.push_back({it->second, it->first, name});
  }

  std::unordered_set<std::int64_t> used;
  for (const auto& s : segments) {
    used.insert(s.from);
    used.insert(s.to);
  }
  std::vector<std::pair<std::size_t, std::int64_t>> order;
  order.reserve(used.size());
  for (auto id : used) order.emplace_back(col.nodes.at(id).order, id);
  std::sort(order.begin(), order.end());

  RoadGraph g;
  for (const auto& [_, id] : order) g.add_node({id, col.nodes.at(id).point});
  EdgeId next = 0;
  for (const auto& s : segments) {
    const auto& pa = col.nodes.at(s.from).point;
    const auto& pb = col.nodes.at(s.to).point;
    g.add_edge({next++, s.from, s.to, haversine_m(pa, pb), {pa, pb}, *s.name});
  }
  return g;
}

}  // namespace roadsurvey
