#pragma once

#include <cmath>
#include <numbers>

#include "omnisal/common/error.hpp"

namespace omnisal::geom {

inline constexpr double kPi = std::numbers::pi;

inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

// Latitude/longitude direction on the unit sphere, radians.
// Canonical form: lat in [-pi/2, +pi/2], lon in [-pi, +pi).
struct SphericalCoord {
  double lat = 0.0;
  double lon = 0.0;
};

inline double wrap_lon(double lon) {
  double x = std::fmod(lon + kPi, 2.0 * kPi);
  if (x < 0.0) x += 2.0 * kPi;
  return x - kPi;
}

// Total canonicalization: reflects latitude excursions over the poles (which
// flips longitude by pi) and wraps longitude.
inline SphericalCoord canonical(SphericalCoord c) {
  double lat = std::fmod(c.lat + kPi, 2.0 * kPi);
  if (lat < 0.0) lat += 2.0 * kPi;
  lat -= kPi;  // now in [-pi, pi)
  double lon = c.lon;
  if (lat > kPi / 2.0) {
    lat = kPi - lat;
    lon += kPi;
  } else if (lat < -kPi / 2.0) {
    lat = -kPi - lat;
    lon += kPi;
  }
  return {lat, wrap_lon(lon)};
}

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

inline Vec3 to_unit(const SphericalCoord& c) {
  const double cl = std::cos(c.lat);
  return {cl * std::cos(c.lon), cl * std::sin(c.lon), std::sin(c.lat)};
}

inline SphericalCoord to_spherical(const Vec3& v) {
  const double n = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
  if (n == 0.0) throw DataError("to_spherical: zero vector");
  return {std::asin(v.z / n), std::atan2(v.y, v.x)};
}

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline double angular_distance(const SphericalCoord& a, const SphericalCoord& b) {
  // atan2 form is well conditioned for both small and near-antipodal angles.
  const Vec3 u = to_unit(a), v = to_unit(b);
  const Vec3 cr{u.y * v.z - u.z * v.y, u.z * v.x - u.x * v.z, u.x * v.y - u.y * v.x};
  const double s = std::sqrt(cr.x * cr.x + cr.y * cr.y + cr.z * cr.z);
  return std::atan2(s, dot(u, v));
}

struct PlanePoint {
  double x = 0.0;
  double y = 0.0;
};

// Gnomonic (central) projection onto the plane tangent at `center`.
//   cos c = sin t0 sin t + cos t0 cos t cos(l - l0)
//   x = cos t sin(l - l0) / cos c
//   y = (cos t0 sin t - sin t0 cos t cos(l - l0)) / cos c
// Only points on the visible hemisphere (cos c > 0) project; the tolerance
// also rejects points within roundoff of the 90-degree boundary.
inline PlanePoint gnomonic_forward(const SphericalCoord& center, const SphericalCoord& q) {
  const double dl = q.lon - center.lon;
  const double cos_c = std::sin(center.lat) * std::sin(q.lat) +
                       std::cos(center.lat) * std::cos(q.lat) * std::cos(dl);
  if (cos_c <= 1e-12) throw DataError("gnomonic_forward: point behind the tangent plane");
  return {std::cos(q.lat) * std::sin(dl) / cos_c,
          (std::cos(center.lat) * std::sin(q.lat) -
           std::sin(center.lat) * std::cos(q.lat) * std::cos(dl)) /
              cos_c};
}

// Inverse gnomonic: plane point back to the sphere via the 3D tangent frame.
inline SphericalCoord gnomonic_inverse(const SphericalCoord& center, const PlanePoint& p) {
  const double st = std::sin(center.lat), ct = std::cos(center.lat);
  const double sl = std::sin(center.lon), cl = std::cos(center.lon);
  const Vec3 c{ct * cl, ct * sl, st};
  const Vec3 east{-sl, cl, 0.0};
  const Vec3 north{-st * cl, -st * sl, ct};
  const Vec3 q{c.x + p.x * east.x + p.y * north.x,
               c.y + p.x * east.y + p.y * north.y,
               c.z + p.x * east.z + p.y * north.z};
  return to_spherical(q);
}

}  // namespace omnisal::geom
