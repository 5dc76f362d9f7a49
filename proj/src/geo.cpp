#include "hermes/geo.hpp"

#include <algorithm>
#include <cmath>

namespace hermes::geo {
namespace {

double to_rad(double deg) { return deg * kPi / 180.0; }
double to_deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace

bool is_valid(const GeoPoint& p) {
  return std::isfinite(p.latitude) && std::isfinite(p.longitude) && p.latitude >= -90.0 &&
         p.latitude <= 90.0 && p.longitude >= -180.0 && p.longitude <= 180.0;
}

double haversine_distance(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = to_rad(a.latitude);
  const double phi2 = to_rad(b.latitude);
  const double dphi = phi2 - phi1;
  const double dlambda = to_rad(b.longitude - a.longitude);
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

double bearing(const GeoPoint& a, const GeoPoint& b) {
  if (a == b) throw GeoError(GeoError::Code::undefined_bearing, "bearing between identical points");
  const double phi1 = to_rad(a.latitude);
  const double phi2 = to_rad(b.latitude);
  const double dlambda = to_rad(b.longitude - a.longitude);
  const double y = std::sin(dlambda) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
  double deg = std::fmod(to_deg(std::atan2(y, x)) + 360.0, 360.0);
  if (deg >= 360.0) deg = 0.0;
  return deg;
}

GeoRect rect_around(const GeoPoint& center, double half_side) {
  if (!(half_side > 0.0)) throw GeoError(GeoError::Code::out_of_domain, "half_side must be positive");
  if (!is_valid(center) || std::abs(center.latitude) > kMaxRectLatitude)
    throw GeoError(GeoError::Code::out_of_domain, "rectangle center outside +-85 degrees latitude");

  // Angular radius of the circle; the longitude half-width is the exact
  // extent of a spherical cap, asin(sin(theta) / cos(lat)), which is never
  // smaller than theta / cos(lat).
  const double theta = half_side / kEarthRadiusM;
  const double cos_lat = std::cos(to_rad(center.latitude));
  const double dlat = to_deg(theta);
  const double ratio = std::sin(std::min(theta, kPi / 2.0)) / cos_lat;
  const double dlon = ratio >= 1.0 ? 180.0 : to_deg(std::asin(ratio));
  constexpr double kSlack = 1.0 + 1e-9;

  GeoRect r;
  r.min_lat = std::max(-90.0, center.latitude - dlat * kSlack);
  r.max_lat = std::min(90.0, center.latitude + dlat * kSlack);
  r.min_lon = std::max(-180.0, center.longitude - dlon * kSlack);
  r.max_lon = std::min(180.0, center.longitude + dlon * kSlack);
  return r;
}

GeoPoint destination(const GeoPoint& origin, double bearing_deg, double distance) {
  const double delta = distance / kEarthRadiusM;
  const double theta = to_rad(bearing_deg);
  const double phi1 = to_rad(origin.latitude);
  const double lambda1 = to_rad(origin.longitude);
  const double phi2 =
      std::asin(std::sin(phi1) * std::cos(delta) + std::cos(phi1) * std::sin(delta) * std::cos(theta));
  const double lambda2 =
      lambda1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(phi1),
                           std::cos(delta) - std::sin(phi1) * std::sin(phi2));
  double lon = std::fmod(to_deg(lambda2) + 540.0, 360.0) - 180.0;
  return {to_deg(phi2), lon};
}

GeoPoint interpolate(const GeoPoint& a, const GeoPoint& b, double fraction) {
  return {a.latitude + (b.latitude - a.latitude) * fraction,
          a.longitude + (b.longitude - a.longitude) * fraction};
}

double distance_to_segment(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) {
  const double kx = kMetersPerDegree * std::cos(to_rad(p.latitude));
  const double ky = kMetersPerDegree;
  const double ax = (a.longitude - p.longitude) * kx, ay = (a.latitude - p.latitude) * ky;
  const double bx = (b.longitude - p.longitude) * kx, by = (b.latitude - p.latitude) * ky;
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? -(ax * dx + ay * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double cx = ax + t * dx, cy = ay + t * dy;
  return std::sqrt(cx * cx + cy * cy);
}

}  // namespace hermes::geo
