#pragma once

#include <charconv>
#include <string>
#include <string_view>

#include "roadsurvey/circuit.hpp"

namespace roadsurvey {

namespace detail {

inline void append_number(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

inline void append_xml_escaped(std::string& out, std::string_view s) {
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += ch;
    }
  }
}

}  // namespace detail

/// GPX 1.1 document with a single track segment tracing the circuit's edge
/// geometry in driving order. Consecutive duplicate points are dropped, so a
/// closed circuit ends on its first point.
inline std::string export_gpx(const SurveyCircuit& c, const RoadGraph& g,
                              std::string_view track_name = "survey circuit") {
  validate_circuit(c, g);
  std::string out =
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<gpx version=\"1.1\" creator=\"roadsurvey\" xmlns=\"http://www.topografix.com/GPX/1/1\" "
      "xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" "
      "xsi:schemaLocation=\"http://www.topografix.com/GPX/1/1 "
      "http://www.topografix.com/GPX/1/1/gpx.xsd\">\n"
      "  <trk>\n    <name>";
  detail::append_xml_escaped(out, track_name);
  out += "</name>\n    <trkseg>\n";
  std::optional<GeoPoint> last;
  for (auto id : c.edges) {
    for (const auto& p : g.edge(id).geometry) {
      if (last && *last == p) continue;
      out += "      <trkpt lat=\"";
      detail::append_number(out, p.lat);
      out += "\" lon=\"";
      detail::append_number(out, p.lon);
      out += "\"/>\n";
      last = p;
    }
  }
  out += "    </trkseg>\n  </trk>\n</gpx>\n";
  return out;
}

}  // namespace roadsurvey
