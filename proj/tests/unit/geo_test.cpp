#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "hermes/geo.hpp"

using namespace hermes::geo;

namespace {

double rad(double deg) { return deg * kPi / 180.0; }

// Spherical law of cosines; accurate away from tiny separations.
double cosine_law_distance(const GeoPoint& a, const GeoPoint& b) {
  const double c = std::sin(rad(a.latitude)) * std::sin(rad(b.latitude)) +
                   std::cos(rad(a.latitude)) * std::cos(rad(b.latitude)) * std::cos(rad(b.longitude - a.longitude));
  return kEarthRadiusM * std::acos(std::clamp(c, -1.0, 1.0));
}

// Chord length through the sphere, converted back to an arc.
double chord_distance(const GeoPoint& a, const GeoPoint& b) {
  auto xyz = [](const GeoPoint& p) {
    return std::array<double, 3>{std::cos(rad(p.latitude)) * std::cos(rad(p.longitude)),
                                 std::cos(rad(p.latitude)) * std::sin(rad(p.longitude)), std::sin(rad(p.latitude))};
  };
  const auto u = xyz(a), v = xyz(b);
  const double chord = std::hypot(u[0] - v[0], u[1] - v[1], u[2] - v[2]);
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, chord / 2.0));
}

GeoPoint random_point(std::mt19937_64& rng, double max_lat = 89.0) {
  std::uniform_real_distribution<double> lat(-max_lat, max_lat), lon(-180.0, 180.0);
  return {lat(rng), lon(rng)};
}

}  // namespace

TEST(Geo, HaversineAgreesWithIndependentFormulas) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 20'000; ++i) {
    const auto a = random_point(rng), b = random_point(rng);
    const double d = haversine_distance(a, b);
    EXPECT_NEAR(d, chord_distance(a, b), 1e-6 * std::max(1.0, d));
    if (d > 1000.0) {
      EXPECT_NEAR(d, cosine_law_distance(a, b), 1e-3);
    }
  }
}

TEST(Geo, HaversineKnownValues) {
  EXPECT_DOUBLE_EQ(haversine_distance({10, 20}, {10, 20}), 0.0);
  EXPECT_NEAR(haversine_distance({0, 0}, {1, 0}), kMetersPerDegree, 1e-6);
  EXPECT_NEAR(haversine_distance({0, 0}, {0, 180}), kPi * kEarthRadiusM, 1e-3);
  EXPECT_NEAR(haversine_distance({90, 0}, {-90, 0}), kPi * kEarthRadiusM, 1e-3);
}

TEST(Geo, HaversineIsSymmetricAndSatisfiesTriangleInequality) {
  std::mt19937_64 rng(22);
  for (int i = 0; i < 20'000; ++i) {
    const auto a = random_point(rng), b = random_point(rng), c = random_point(rng);
    const double ab = haversine_distance(a, b), bc = haversine_distance(b, c), ac = haversine_distance(a, c);
    EXPECT_DOUBLE_EQ(ab, haversine_distance(b, a));
    EXPECT_LE(ac, (ab + bc) * (1.0 + 1e-9));
  }
}

TEST(Geo, BearingCardinalDirections) {
  const GeoPoint o{10.0, 10.0};
  EXPECT_NEAR(bearing(o, {11.0, 10.0}), 0.0, 1e-9);
  EXPECT_NEAR(bearing(o, {9.0, 10.0}), 180.0, 1e-9);
  EXPECT_NEAR(bearing({0, 0}, {0, 1}), 90.0, 1e-9);
  EXPECT_NEAR(bearing({0, 0}, {0, -1}), 270.0, 1e-9);
  try {
    bearing(o, o);
    FAIL() << "expected GeoError";
  } catch (const GeoError& e) {
    EXPECT_EQ(e.code(), GeoError::Code::undefined_bearing);
  }
}

TEST(Geo, BearingAlwaysInRange) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 10'000; ++i) {
    const auto a = random_point(rng), b = random_point(rng);
    const double br = bearing(a, b);
    EXPECT_GE(br, 0.0);
    EXPECT_LT(br, 360.0);
  }
}

TEST(Geo, DestinationTravelsTheRequestedDistance) {
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> brg(0.0, 360.0), dist(1.0, 50'000.0);
  for (int i = 0; i < 5'000; ++i) {
    const auto o = random_point(rng, 80.0);
    const double d = dist(rng), b = brg(rng);
    const auto p = destination(o, b, d);
    EXPECT_NEAR(haversine_distance(o, p), d, 1e-6 * d + 1e-6);
    EXPECT_TRUE(is_valid(p));
  }
}

// Every point of the disc of radius half_side lies in the box, and the box
// is tight: points on the disc reach each edge within a small tolerance.
TEST(Geo, RectAroundContainsTheDisc) {
  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> lat(-60.0, 60.0), lon(-170.0, 170.0), half(1.0, 10'000.0),
      brg(0.0, 360.0), frac(0.0, 1.0);
  for (int i = 0; i < 2'000; ++i) {
    const GeoPoint c{lat(rng), lon(rng)};
    const double h = half(rng);
    const auto r = rect_around(c, h);
    EXPECT_LE(r.min_lat, r.max_lat);
    EXPECT_LE(r.min_lon, r.max_lon);
    EXPECT_TRUE(r.contains(c));
    for (int k = 0; k < 50; ++k) {
      const auto p = destination(c, brg(rng), h * std::sqrt(frac(rng)));
      ASSERT_TRUE(r.contains(p)) << c.latitude << "," << c.longitude << " h=" << h;
    }
    for (double b = 0.0; b < 360.0; b += 0.5) {
      ASSERT_TRUE(r.contains(destination(c, b, h)));
    }
    const double lat_span = (r.max_lat - r.min_lat) * kMetersPerDegree / 2.0;
    EXPECT_NEAR(lat_span, h, 1e-6 * h + 1e-6);
  }
}

TEST(Geo, RectAroundRejectsBadInput) {
  EXPECT_THROW(rect_around({86.0, 0.0}, 100.0), GeoError);
  EXPECT_THROW(rect_around({-86.0, 0.0}, 100.0), GeoError);
  EXPECT_THROW(rect_around({0.0, 0.0}, 0.0), GeoError);
  EXPECT_THROW(rect_around({0.0, 0.0}, -5.0), GeoError);
  EXPECT_NO_THROW(rect_around({85.0, 0.0}, 100.0));
}

TEST(Geo, SegmentDistanceAgreesWithDenseSampling) {
  std::mt19937_64 rng(26);
  std::uniform_real_distribution<double> off(-0.01, 0.01);
  for (int i = 0; i < 500; ++i) {
    const GeoPoint p{37.39 + off(rng), -5.98 + off(rng)};
    const GeoPoint a{37.39 + off(rng), -5.98 + off(rng)}, b{37.39 + off(rng), -5.98 + off(rng)};
    double best = 1e18;
    for (int k = 0; k <= 4000; ++k) best = std::min(best, haversine_distance(p, interpolate(a, b, k / 4000.0)));
    const double seg = haversine_distance(a, b);
    EXPECT_NEAR(distance_to_segment(p, a, b), best, 0.002 * best + seg / 4000.0 + 0.05);
  }
}
