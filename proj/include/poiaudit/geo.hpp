#pragma once

#include <cmath>
#include <utility>

#include "poiaudit/common.hpp"

namespace poiaudit {
namespace geo {

constexpr double kEarthRadiusKm = 6371.0088;
constexpr double kEarthRadiusM = kEarthRadiusKm * 1000.0;

inline double deg2rad(double d) { return d * M_PI / 180.0; }

// Great-circle distance in kilometres.
inline double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  const double phi1 = deg2rad(lat1);
  const double phi2 = deg2rad(lat2);
  const double dphi = deg2rad(lat2 - lat1);
  const double dlam = deg2rad(lon2 - lon1);
  const double a = std::sin(dphi / 2) * std::sin(dphi / 2) +
                   std::cos(phi1) * std::cos(phi2) * std::sin(dlam / 2) * std::sin(dlam / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

// Lower real branch W_{-1}(x) of the Lambert W function, defined for
// x in [-1/e, 0). Initial guess from the branch-point series (x near -1/e)
// or the asymptotic log form (x near 0), then Halley iterations; falls back
// to bisection if the iteration leaves the bracket.
inline double lambert_wm1(double x) {
  constexpr double kInvE = 0.36787944117144233;  // 1/e
  require(x >= -kInvE - 1e-15 && x < 0.0, "lambert_wm1: argument outside [-1/e, 0)");
  if (x < -kInvE) x = -kInvE;
  if (x == -kInvE) return -1.0;

  double w;
  if (x > -0.25 * kInvE) {
    const double l1 = std::log(-x);
    const double l2 = std::log(-l1);
    w = l1 - l2 + l2 / l1;
  } else {
    const double p = -std::sqrt(2.0 * (1.0 + M_E * x));
    w = -1.0 + p - p * p / 3.0 + 11.0 * p * p * p / 72.0;
  }

  for (int i = 0; i < 64; ++i) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    if (f == 0.0) break;
    const double denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0);
    const double step = f / denom;
    const double next = w - step;
    if (!(next < -1.0)) {
      // Left the branch; recover by bisection on g(w) = w e^w - x,
      // which is increasing towards -1/e on (-inf, -1].
      double lo = -746.0, hi = -1.0;
      for (int j = 0; j < 200; ++j) {
        const double mid = 0.5 * (lo + hi);
        (mid * std::exp(mid) - x > 0.0 ? hi : lo) = mid;
      }
      return 0.5 * (lo + hi);
    }
    w = next;
    if (std::abs(step) <= 1e-16 * std::abs(w)) break;
  }
  return w;
}

// Radial CDF of the planar Laplace mechanism: C(r) = 1 - (1 + eps*r) e^{-eps*r}.
inline double planar_laplace_radial_cdf(double eps, double r) {
  if (r <= 0.0) return 0.0;
  return 1.0 - (1.0 + eps * r) * std::exp(-eps * r);
}

// Inverse of the radial CDF at probability p in [0, 1).
inline double planar_laplace_radius(double eps, double p) {
  require(eps > 0.0, "planar_laplace_radius: eps must be positive");
  require(p >= 0.0 && p < 1.0, "planar_laplace_radius: p outside [0, 1)");
  if (p == 0.0) return 0.0;
  return -(lambert_wm1((p - 1.0) / M_E) + 1.0) / eps;
}

struct PlanarOffset {
  double dx_m = 0.0;  // east
  double dy_m = 0.0;  // north
};

// Draws an offset with density eps^2/(2 pi) * exp(-eps * ||z||), ||z|| in
// metres when eps is per metre.
inline PlanarOffset planar_laplace_sample(double eps_per_m, Rng& rng) {
  const double theta = 2.0 * M_PI * rng.uniform();
  const double r = planar_laplace_radius(eps_per_m, rng.uniform());
  return {r * std::cos(theta), r * std::sin(theta)};
}

// Moves (lat, lon) by a tangent-plane offset in metres.
inline std::pair<double, double> offset_lat_lon(double lat, double lon, double dx_m, double dy_m) {
  const double dlat = dy_m / kEarthRadiusM * 180.0 / M_PI;
  const double coslat = std::max(std::cos(deg2rad(lat)), 1e-9);
  const double dlon = dx_m / (kEarthRadiusM * coslat) * 180.0 / M_PI;
  return {lat + dlat, lon + dlon};
}

}  // namespace geo
}  // namespace poiaudit
