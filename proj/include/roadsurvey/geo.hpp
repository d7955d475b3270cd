#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>

#include "roadsurvey/error.hpp"

namespace roadsurvey {

/// IUGG mean Earth radius, used for every distance in the project.
inline constexpr double kEarthRadiusM = 6'371'008.8;

/// WGS84 coordinate in decimal degrees.
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  bool operator==(const GeoPoint&) const = default;

  bool valid() const noexcept {
    return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0 &&
           lon >= -180.0 && lon <= 180.0;
  }
};

inline GeoPoint checked_point(double lat, double lon) {
  GeoPoint p{lat, lon};
  if (!p.valid())
    throw InvalidArgument("coordinate out of range: lat=" + std::to_string(lat) +
                          " lon=" + std::to_string(lon));
  return p;
}

inline constexpr double deg2rad(double d) noexcept { return d * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double r) noexcept { return r * 180.0 / std::numbers::pi; }

/// Great-circle distance in meters.
inline double haversine_m(const GeoPoint& a, const GeoPoint& b) noexcept {
  const double phi1 = deg2rad(a.lat);
  const double phi2 = deg2rad(b.lat);
  const double dphi = phi2 - phi1;
  const double dlambda = deg2rad(b.lon - a.lon);
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(std::min(1.0, h)));
}

inline double polyline_length_m(std::span<const GeoPoint> pts) noexcept {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += haversine_m(pts[i - 1], pts[i]);
  return len;
}

/// Forward azimuth from a to b in [0, 360). Empty when the points coincide.
inline std::optional<double> bearing_deg(const GeoPoint& a, const GeoPoint& b) noexcept {
  if (a == b) return std::nullopt;
  const double phi1 = deg2rad(a.lat);
  const double phi2 = deg2rad(b.lat);
  const double dlambda = deg2rad(b.lon - a.lon);
  const double y = std::sin(dlambda) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
  double deg = rad2deg(std::atan2(y, x));
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

/// Local equirectangular plane centred on `origin`; coordinates in meters.
class LocalPlane {
 public:
  struct Xy {
    double x;
    double y;
  };

  explicit LocalPlane(const GeoPoint& origin) noexcept
      : origin_(origin), kx_(std::cos(deg2rad(origin.lat)) * deg2rad(1.0) * kEarthRadiusM),
        ky_(deg2rad(1.0) * kEarthRadiusM) {}

  Xy project(const GeoPoint& p) const noexcept {
    double dlon = p.lon - origin_.lon;
    if (dlon > 180.0) dlon -= 360.0;
    if (dlon <= -180.0) dlon += 360.0;
    return {dlon * kx_, (p.lat - origin_.lat) * ky_};
  }

 private:
  GeoPoint origin_;
  double kx_;
  double ky_;
};

/// Planar distance from p to the closed segment [a, b].
inline double point_segment_distance(LocalPlane::Xy p, LocalPlane::Xy a, LocalPlane::Xy b) noexcept {
  const double vx = b.x - a.x;
  const double vy = b.y - a.y;
  const double wx = p.x - a.x;
  const double wy = p.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double u = len2 > 0.0 ? (wx * vx + wy * vy) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  const double dx = wx - u * vx;
  const double dy = wy - u * vy;
  return std::hypot(dx, dy);
}

}  // namespace roadsurvey
