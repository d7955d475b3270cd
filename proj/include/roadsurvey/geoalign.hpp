#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "roadsurvey/csv.hpp"
#include "roadsurvey/graph.hpp"

namespace roadsurvey {

struct GpsFix {
  double t = 0.0;  // seconds since epoch
  GeoPoint point;
};

/// Time-ordered GPS fixes with strictly increasing timestamps.
class GpsTrack {
 public:
  GpsTrack() = default;
  explicit GpsTrack(std::vector<GpsFix> fixes) : fixes_(std::move(fixes)) {
    for (std::size_t i = 0; i < fixes_.size(); ++i) {
      if (!std::isfinite(fixes_[i].t))
        throw InvalidArgument("fix " + std::to_string(i) + " has a non-finite timestamp");
      if (!fixes_[i].point.valid())
        throw InvalidArgument("fix " + std::to_string(i) + " has an invalid coordinate");
      if (i > 0 && !(fixes_[i].t > fixes_[i - 1].t))
        throw InvalidArgument("fix timestamps must be strictly increasing (fix " + std::to_string(i) + ")");
    }
  }

  std::span<const GpsFix> fixes() const noexcept { return fixes_; }
  std::size_t size() const noexcept { return fixes_.size(); }
  bool empty() const noexcept { return fixes_.empty(); }

 private:
  std::vector<GpsFix> fixes_;
};

struct ImageRecord {
  std::string image_id;
  double t = 0.0;
  std::optional<GeoPoint> point;
  std::optional<EdgeId> edge_id;
  std::optional<double> dist_to_edge_m;
};

namespace detail {

inline double wrap_lon_delta(double d) noexcept {
  if (d > 180.0) return d - 360.0;
  if (d <= -180.0) return d + 360.0;
  return d;
}

}  // namespace detail

/// Gaussian smoothing of lat and lon over time. Weights are
/// exp(-dt^2 / (2 sigma^2)) for |dt| <= 3 sigma, renormalised per fix.
/// sigma_s == 0 returns the track unchanged.
inline GpsTrack smooth_track(const GpsTrack& track, double sigma_s) {
  if (!(sigma_s >= 0.0) || !std::isfinite(sigma_s))
    throw InvalidArgument("smoothing sigma must be finite and >= 0");
  if (sigma_s == 0.0 || track.size() < 2) return track;
  const auto fixes = track.fixes();
  const double reach = 3.0 * sigma_s;
  const double inv2s2 = 1.0 / (2.0 * sigma_s * sigma_s);
  std::vector<GpsFix> out(fixes.begin(), fixes.end());
  std::size_t lo = 0, hi = 0;
  for (std::size_t i = 0; i < fixes.size(); ++i) {
    const double ti = fixes[i].t;
    while (fixes[lo].t < ti - reach) ++lo;
    while (hi + 1 < fixes.size() && fixes[hi + 1].t <= ti + reach) ++hi;
    // Average offsets from the centre fix so constant tracks stay bit-exact.
    double wsum = 0.0, dlat = 0.0, dlon = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) {
      const double dt = fixes[j].t - ti;
      const double w = std::exp(-dt * dt * inv2s2);
      wsum += w;
      dlat += w * (fixes[j].point.lat - fixes[i].point.lat);
      dlon += w * detail::wrap_lon_delta(fixes[j].point.lon - fixes[i].point.lon);
    }
    out[i].point.lat = fixes[i].point.lat + dlat / wsum;
    double lon = fixes[i].point.lon + dlon / wsum;
    if (lon > 180.0) lon -= 360.0;
    if (lon < -180.0) lon += 360.0;
    out[i].point.lon = lon;
  }
  return GpsTrack(std::move(out));
}

/// Position at time t by linear interpolation between the bracketing fixes.
/// Times up to `clamp_tol_s` outside the track map to the nearest endpoint.
inline GeoPoint interpolate_position(const GpsTrack& track, double t, double clamp_tol_s = 1.0) {
  const auto fixes = track.fixes();
  if (fixes.empty()) throw OutOfTrackSpan(t, NAN, NAN, clamp_tol_s);
  const double t0 = fixes.front().t, t1 = fixes.back().t;
  if (!std::isfinite(t) || t < t0 - clamp_tol_s || t > t1 + clamp_tol_s)
    throw OutOfTrackSpan(t, t0, t1, clamp_tol_s);
  if (t <= t0) return fixes.front().point;
  if (t >= t1) return fixes.back().point;
  auto it = std::lower_bound(fixes.begin(), fixes.end(), t,
                             [](const GpsFix& f, double v) { return f.t < v; });
  if (it->t == t) return it->point;
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double u = (t - a.t) / (b.t - a.t);
  const double lon = a.point.lon + u * detail::wrap_lon_delta(b.point.lon - a.point.lon);
  return {a.point.lat + u * (b.point.lat - a.point.lat),
          lon > 180.0 ? lon - 360.0 : (lon < -180.0 ? lon + 360.0 : lon)};
}

/// Greedy spacing filter: keeps the first image, then every image whose
/// along-track distance since the last kept one reaches `min_spacing_m`.
inline std::vector<ImageRecord> subsample_images(std::span<const ImageRecord> images,
                                                 double min_spacing_m = 10.0) {
  std::vector<ImageRecord> kept;
  if (images.empty()) return kept;
  for (const auto& im : images)
    if (!im.point) throw InvalidArgument("image " + im.image_id + " has no position");
  kept.push_back(images.front());
  double since_kept = 0.0;
  for (std::size_t i = 1; i < images.size(); ++i) {
    since_kept += haversine_m(*images[i - 1].point, *images[i].point);
    if (since_kept >= min_spacing_m) {
      kept.push_back(images[i]);
      since_kept = 0.0;
    }
  }
  return kept;
}

struct EdgeMatch {
  EdgeId edge_id = 0;
  double dist_m = 0.0;
};

/// Nearest edge to `p` under a local equirectangular projection centred on
/// `p`. Ties go to the lower edge id; matches farther than `max_dist_m` are
/// reported as unassigned.
inline std::optional<EdgeMatch> project_to_edge(const GeoPoint& p, const RoadGraph& g,
                                                double max_dist_m = 25.0) {
  if (g.edge_count() == 0) throw EmptyGraph();
  const LocalPlane plane(p);
  const LocalPlane::Xy origin{0.0, 0.0};
  std::optional<EdgeMatch> best;
  for (const auto& e : g.edges()) {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < e.geometry.size(); ++k) {
      // Orient each segment canonically so opposite-direction twins tie exactly.
      auto a = e.geometry[k - 1], b = e.geometry[k];
      if (std::tie(b.lat, b.lon) < std::tie(a.lat, a.lon)) std::swap(a, b);
      d = std::min(d, point_segment_distance(origin, plane.project(a), plane.project(b)));
    }
    if (!best || d < best->dist_m || (d == best->dist_m && e.id < best->edge_id)) best = EdgeMatch{e.id, d};
  }
  if (best->dist_m > max_dist_m) return std::nullopt;
  return best;
}

struct AlignConfig {
  double sigma_s = 2.0;
  double min_spacing_m = 10.0;
  double max_dist_m = 25.0;
  double clamp_tol_s = 1.0;

  void validate() const {
    if (!(sigma_s >= 0.0 && std::isfinite(sigma_s))) throw InvalidArgument("sigma_s must be >= 0");
    if (!(min_spacing_m >= 0.0 && std::isfinite(min_spacing_m)))
      throw InvalidArgument("min_spacing_m must be >= 0");
    if (!(max_dist_m >= 0.0)) throw InvalidArgument("max_dist_m must be >= 0");
    if (!(clamp_tol_s >= 0.0)) throw InvalidArgument("clamp_tol_s must be >= 0");
  }
};

struct AlignResult {
  std::vector<ImageRecord> records;
  std::size_t dropped_out_of_span = 0;
  std::size_t dropped_by_spacing = 0;
  std::size_t dropped_unassigned = 0;
};

/// smooth -> interpolate -> subsample -> project. Images are processed in
/// timestamp order (stable for equal times).
inline AlignResult align(const GpsTrack& track, std::span<const ImageRecord> images,
                         const RoadGraph& g, const AlignConfig& cfg = {}) {
  cfg.validate();
  AlignResult res;
  if (images.empty()) return res;
  const auto smoothed = smooth_track(track, cfg.sigma_s);

  std::vector<ImageRecord> located;
  located.reserve(images.size());
  for (const auto& im : images) {
    try {
      ImageRecord r{im.image_id, im.t, interpolate_position(smoothed, im.t, cfg.clamp_tol_s), {}, {}};
      located.push_back(std::move(r));
    } catch (const OutOfTrackSpan&) {
      ++res.dropped_out_of_span;
    }
  }
  std::stable_sort(located.begin(), located.end(),
                   [](const ImageRecord& a, const ImageRecord& b) { return a.t < b.t; });

  auto kept = subsample_images(located, cfg.min_spacing_m);
  res.dropped_by_spacing = located.size() - kept.size();
  for (auto& r : kept) {
    auto m = project_to_edge(*r.point, g, cfg.max_dist_m);
    if (!m) {
      ++res.dropped_unassigned;
      continue;
    }
    r.edge_id = m->edge_id;
    r.dist_to_edge_m = m->dist_m;
    res.records.push_back(std::move(r));
  }
  return res;
}

// --- file formats --------------------------------------------------------

/// GPS CSV with header columns t, lat, lon.
inline GpsTrack read_gps_csv(std::string_view text) {
  csv::Table table(text);
  const auto ct = table.column("t"), clat = table.column("lat"), clon = table.column("lon");
  std::vector<GpsFix> fixes;
  for (const auto& row : table.rows()) {
    GpsFix f{csv::Table::number(row, ct, "t"),
             {csv::Table::number(row, clat, "lat"), csv::Table::number(row, clon, "lon")}};
    if (!f.point.valid()) throw SchemaError("coordinate out of range", row.line);
    if (!fixes.empty() && !(f.t > fixes.back().t))
      throw SchemaError("timestamps must be strictly increasing", row.line);
    fixes.push_back(f);
  }
  return GpsTrack(std::move(fixes));
}

/// Image index CSV with header columns image_id, t.
inline std::vector<ImageRecord> read_image_index_csv(std::string_view text) {
  csv::Table table(text);
  const auto cid = table.column("image_id"), ct = table.column("t");
  std::vector<ImageRecord> out;
  for (const auto& row : table.rows()) {
    if (row.cells[cid].empty()) throw SchemaError("empty image_id", row.line);
    out.push_back({std::string(row.cells[cid]), csv::Table::number(row, ct, "t"), {}, {}, {}});
  }
  return out;
}

inline nlohmann::json aligned_record_to_json(const ImageRecord& r) {
  return {{"image_id", r.image_id}, {"t", r.t},           {"lat", r.point->lat},
          {"lon", r.point->lon},    {"edge_id", *r.edge_id}, {"dist_to_edge_m", *r.dist_to_edge_m}};
}

inline std::string aligned_to_jsonl(std::span<const ImageRecord> records) {
  std::string out;
  for (const auto& r : records) out += aligned_record_to_json(r).dump() + "\n";
  return out;
}

inline std::vector<ImageRecord> aligned_from_jsonl(std::string_view text) {
  std::vector<ImageRecord> out;
  const auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::is_blank(lines[i])) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(e.what(), i + 1);
    }
    try {
      ImageRecord r;
      r.image_id = j.at("image_id").get<std::string>();
      r.t = j.at("t").get<double>();
      r.point = GeoPoint{j.at("lat").get<double>(), j.at("lon").get<double>()};
      r.edge_id = j.at("edge_id").get<EdgeId>();
      r.dist_to_edge_m = j.at("dist_to_edge_m").get<double>();
      if (!r.point->valid() || *r.dist_to_edge_m < 0.0) throw SchemaError("invalid aligned record", i + 1);
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("aligned record: ") + e.what(), i + 1);
    }
  }
  return out;
}

}  // namespace roadsurvey
