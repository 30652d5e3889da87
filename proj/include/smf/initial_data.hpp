#pragma once

// Deterministic initial-data generators.  random_smooth draws band-limited
// Fourier coefficients from a hand-rolled Box-Muller normal (identical
// sequences on every platform for a fixed seed) and projects to the target.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "smf/geometry.hpp"
#include "smf/state.hpp"

namespace smf::initial_data {

using geometry::TargetGeometry;
using geometry::TargetKind;
using grid::MapState;
using grid::PeriodicGrid;

inline MapState constant_map(const PeriodicGrid& g, const TargetGeometry& geom) {
  MapState u(g, geom);
  geometry::TargetPoint p;
  switch (geom.kind()) {
    case TargetKind::Sphere2: p = {{0.0, 0.0, 1.0}, 0}; break;
    case TargetKind::FlatTorus2: p = {{0.5, 0.5, 0.0}, 0}; break;
    case TargetKind::FubiniStudyCP1: p = {{0.0, 0.0, 0.0}, 0}; break;
  }
  for (auto& q : u.points) q = p;
  return u;
}

/// Closed geodesic traversed n times at constant speed; stationary under the
/// flow.  Sphere: an equatorial great circle.  Torus: the winding line
/// (n x mod 1, 0).  CP^1: the image of the equator, |z| = 1.
inline MapState great_circle(const PeriodicGrid& g, const TargetGeometry& geom,
                             int n_windings) {
  MapState u(g, geom);
  for (int j = 0; j < g.n_points; ++j) {
    const double ph = 2.0 * std::numbers::pi * n_windings * g.node(j);
    switch (geom.kind()) {
      case TargetKind::Sphere2:
        u.points[j] = {{std::cos(ph), std::sin(ph), 0.0}, 0};
        break;
      case TargetKind::FlatTorus2: {
        double x = n_windings * g.node(j);
        u.points[j] = geom.project_point({x, 0.0, 0.0});
        break;
      }
      case TargetKind::FubiniStudyCP1:
        u.points[j] = {{std::cos(ph), std::sin(ph), 0.0}, 0};
        break;
    }
  }
  return u;
}

/// Precessing plane-wave data.  Sphere: the classic spin wave at colatitude
/// theta with n windings.  CP^1: the same state in stereographic
/// coordinates, |z| = tan(theta/2).  Torus: the single-mode complex wave of
/// amplitude theta/(2 pi) (the linear-flow analogue).
inline MapState spin_wave(const PeriodicGrid& g, const TargetGeometry& geom,
                          double theta, int n_windings) {
  MapState u(g, geom);
  for (int j = 0; j < g.n_points; ++j) {
    const double ph = 2.0 * std::numbers::pi * n_windings * g.node(j);
    switch (geom.kind()) {
      case TargetKind::Sphere2:
        u.points[j] = {{std::sin(theta) * std::cos(ph),
                        std::sin(theta) * std::sin(ph), std::cos(theta)},
                       0};
        break;
      case TargetKind::FlatTorus2: {
        const double amp = theta / (2.0 * std::numbers::pi);
        u.points[j] = geom.project_point(
            {0.5 + amp * std::cos(ph), 0.5 + amp * std::sin(ph), 0.0});
        break;
      }
      case TargetKind::FubiniStudyCP1: {
        const double r = std::tan(theta / 2.0);
        u.points[j] = {{r * std::cos(ph), r * std::sin(ph), 0.0}, 0};
        break;
      }
    }
  }
  return u;
}

namespace detail {

/// Platform-stable standard normals: Box-Muller over mt19937_64 uniforms.
class NormalSource {
 public:
  explicit NormalSource(uint64_t seed) : rng_(seed) {}

  double operator()() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_uniform();
    while (u1 <= 1e-300) u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  double next_uniform() {
    return (rng_() >> 11) * (1.0 / 9007199254740992.0);  // 53-bit mantissa
  }
  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Band-limited random series with 1/k coefficient decay, zero mean.
inline std::vector<double> random_series(const PeriodicGrid& g, int band,
                                         double amplitude, NormalSource& normal) {
  std::vector<double> f(g.n_points, 0.0);
  for (int k = 1; k <= band; ++k) {
    const double ak = amplitude * normal() / k;
    const double bk = amplitude * normal() / k;
    for (int j = 0; j < g.n_points; ++j) {
      const double ph = 2.0 * std::numbers::pi * k * g.node(j);
      f[j] += ak * std::cos(ph) + bk * std::sin(ph);
    }
  }
  return f;
}

}  // namespace detail

/// Band-limited random perturbation of the constant map, projected to the
/// target.  Fully determined by (seed, band, amplitude).
inline MapState random_smooth(const PeriodicGrid& g, const TargetGeometry& geom,
                              uint64_t seed, int band, double amplitude = 0.3) {
  if (band < 1 || band >= g.n_points / 2)
    throw ConfigError("band", "band must lie in [1, n_points/2)");
  detail::NormalSource normal(seed);
  MapState u(g, geom);
  switch (geom.kind()) {
    case TargetKind::Sphere2: {
      const auto f1 = detail::random_series(g, band, amplitude, normal);
      const auto f2 = detail::random_series(g, band, amplitude, normal);
      const auto f3 = detail::random_series(g, band, amplitude, normal);
      for (int j = 0; j < g.n_points; ++j)
        u.points[j] = geom.project_point({f1[j], f2[j], 1.0 + f3[j]});
      break;
    }
    case TargetKind::FlatTorus2: {
      const auto f1 = detail::random_series(g, band, amplitude, normal);
      const auto f2 = detail::random_series(g, band, amplitude, normal);
      for (int j = 0; j < g.n_points; ++j)
        u.points[j] = geom.project_point({0.5 + f1[j], 0.5 + f2[j], 0.0});
      break;
    }
    case TargetKind::FubiniStudyCP1: {
      const auto f1 = detail::random_series(g, band, amplitude, normal);
      const auto f2 = detail::random_series(g, band, amplitude, normal);
      for (int j = 0; j < g.n_points; ++j)
        u.points[j] = {{f1[j], f2[j], 0.0}, 0};
      break;
    }
  }
  return u;
}

}  // namespace smf::initial_data
