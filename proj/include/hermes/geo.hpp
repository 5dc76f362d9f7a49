#pragma once

#include <stdexcept>
#include <string>

namespace hermes::geo {

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kPi = 3.14159265358979323846;
/// Length of one degree of latitude on the spherical model (~111,195 m).
inline constexpr double kMetersPerDegree = kEarthRadiusM * kPi / 180.0;
/// Centers beyond this latitude are rejected by rect_around.
inline constexpr double kMaxRectLatitude = 85.0;

struct GeoPoint {
  double latitude = 0.0;
  double longitude = 0.0;

  bool operator==(const GeoPoint&) const = default;
};

/// Axis-aligned latitude/longitude box. Never wraps the antimeridian.
struct GeoRect {
  double min_lat = 0.0;
  double max_lat = 0.0;
  double min_lon = 0.0;
  double max_lon = 0.0;

  bool contains(const GeoPoint& p) const {
    return p.latitude >= min_lat && p.latitude <= max_lat && p.longitude >= min_lon &&
           p.longitude <= max_lon;
  }
  bool operator==(const GeoRect&) const = default;
};

class GeoError : public std::domain_error {
 public:
  enum class Code { undefined_bearing, out_of_domain };

  GeoError(Code code, const std::string& what) : std::domain_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

bool is_valid(const GeoPoint& p);

/// Great-circle distance in meters.
double haversine_distance(const GeoPoint& a, const GeoPoint& b);

/// Initial great-circle bearing in degrees, [0, 360), 0 = north, 90 = east.
/// Throws GeoError(undefined_bearing) when a == b.
double bearing(const GeoPoint& a, const GeoPoint& b);

/// Smallest lat/lon box that contains every point within `half_side` meters
/// of `center`. Throws GeoError(out_of_domain) for |lat| > 85 or
/// half_side <= 0.
GeoRect rect_around(const GeoPoint& center, double half_side);

/// Point reached by travelling `distance` meters from `origin` on the
/// initial bearing `bearing_deg`.
GeoPoint destination(const GeoPoint& origin, double bearing_deg, double distance);

/// Linear interpolation in degrees; adequate for the sub-kilometre road
/// segments the simulator uses.
GeoPoint interpolate(const GeoPoint& a, const GeoPoint& b, double fraction);

/// Distance in meters from p to the segment [a, b], on a local
/// equirectangular projection centred at p.
double distance_to_segment(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b);

}  // namespace hermes::geo
