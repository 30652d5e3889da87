#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "smf/grid.hpp"
#include "smf/initial_data.hpp"
#include "smf/state.hpp"
#include "support/oracles.hpp"

using namespace smf;
using namespace smf::grid;
using oracles::pi;

namespace {

ScalarField sample(const PeriodicGrid& g, double (*f)(double)) {
  ScalarField out(g);
  for (int j = 0; j < g.n_points; ++j) out[j] = f(g.node(j));
  return out;
}

ScalarField random_band_limited(const PeriodicGrid& g, int band, uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto u = [&] { return (rng() >> 11) * (1.0 / 9007199254740992.0) - 0.5; };
  ScalarField out(g);
  for (int k = 0; k <= band; ++k) {
    const double a = u(), b = u();
    for (int j = 0; j < g.n_points; ++j) {
      const double ph = 2.0 * pi * k * g.node(j);
      out[j] += a * std::cos(ph) + (k == 0 ? 0.0 : b * std::sin(ph));
    }
  }
  return out;
}

double max_err(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
  return m;
}

}  // namespace

TEST_CASE("grid construction rejects odd or tiny sizes") {
  CHECK_THROWS_AS(PeriodicGrid(7), ContractViolation);
  CHECK_THROWS_AS(PeriodicGrid(6), ContractViolation);
  CHECK_NOTHROW(PeriodicGrid(8));
  const PeriodicGrid g(64);
  CHECK(g.spacing() * g.n_points == 1.0);
}

TEST_CASE("spectral derivative on trigonometric data") {
  const PeriodicGrid g(64);
  auto f = sample(g, [](double x) { return std::sin(2.0 * pi * x); });
  auto df = spectral_derivative(f);
  double err = 0.0;
  for (int j = 0; j < 64; ++j)
    err = std::max(err, std::abs(df[j] - 2.0 * pi * std::cos(2.0 * pi * g.node(j))));
  CHECK(err <= 1e-10);

  auto c = sample(g, [](double) { return 3.7; });
  auto dc = spectral_derivative(c);
  for (int j = 0; j < 64; ++j) CHECK(std::abs(dc[j]) < 1e-13);

  auto f3 = sample(g, [](double x) { return std::cos(2.0 * pi * 3.0 * x); });
  auto df3 = spectral_derivative(f3);
  err = 0.0;
  for (int j = 0; j < 64; ++j)
    err = std::max(err,
                   std::abs(df3[j] + 6.0 * pi * std::sin(6.0 * pi * g.node(j))));
  CHECK(err <= 1e-10);

  // output is mean-free
  CHECK(std::abs(integrate_periodic(df3)) < 1e-13);

  ScalarField bad(g);
  bad[3] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(spectral_derivative(bad), ContractViolation);
}

TEST_CASE("periodic quadrature") {
  const PeriodicGrid g(64);
  CHECK(integrate_periodic(sample(g, [](double) { return 1.0; })) ==
        Catch::Approx(1.0));
  CHECK(integrate_periodic(sample(g, [](double x) {
          double s = std::sin(2.0 * pi * x);
          return s * s;
        })) == Catch::Approx(0.5).margin(1e-12));
  CHECK(std::abs(integrate_periodic(
            sample(g, [](double x) { return std::sin(2.0 * pi * x); }))) <= 1e-12);
}

TEST_CASE("double integral kernel analytic examples") {
  const PeriodicGrid g(64);
  auto K1 = double_integral_kernel(sample(g, [](double) { return 1.0; }));
  for (int j = 0; j < 64; ++j)
    CHECK(K1[j] == Catch::Approx(g.node(j) - 0.5).margin(1e-12));

  auto Ks = double_integral_kernel(
      sample(g, [](double x) { return std::sin(2.0 * pi * x); }));
  for (int j = 0; j < 64; ++j)
    CHECK(Ks[j] ==
          Catch::Approx(-std::cos(2.0 * pi * g.node(j)) / (2.0 * pi)).margin(1e-10));
}

TEST_CASE("kernel differentiates back to the mean-free field") {
  const PeriodicGrid g(96);
  auto f = random_band_limited(g, 20, 11);
  auto K = double_integral_kernel(f);
  // the ramp from a nonzero mean is not band-limited; check the mean-free part
  const double mean = integrate_periodic(f);
  ScalarField f0 = f;
  for (auto& v : f0.v) v -= mean;
  auto K0 = double_integral_kernel(f0);
  auto dK0 = spectral_derivative(K0);
  CHECK(max_err(dK0.v, f0.v) <= 1e-9);
  // and K differs from K0 exactly by the ramp
  for (int j = 0; j < 96; ++j)
    CHECK(K[j] - K0[j] == Catch::Approx(mean * (g.node(j) - 0.5)).margin(1e-12));
}

TEST_CASE("derivative/quadrature duality") {
  const PeriodicGrid g(128);
  for (uint64_t s : {1, 2, 3, 4, 5}) {
    auto f = random_band_limited(g, 30, s);
    auto h = random_band_limited(g, 25, s + 100);
    auto df = spectral_derivative(f);
    auto dh = spectral_derivative(h);
    double a = 0.0, b = 0.0;
    for (int j = 0; j < 128; ++j) {
      a += df[j] * h[j];
      b += f[j] * dh[j];
    }
    CHECK(std::abs(a + b) / 128.0 <= 1e-10);
  }
}

TEST_CASE("brute-force spectral oracle, N <= 64") {
  for (int n : {16, 32, 64}) {
    const PeriodicGrid g(n);
    auto f = random_band_limited(g, n / 2 - 1, 42 + n);
    auto df = spectral_derivative(f);
    auto slow_df = oracles::slow_derivative(f.v);
    CHECK(max_err(df.v, slow_df) <= 1e-8);

    auto K = double_integral_kernel(f);
    auto slow_K = oracles::slow_double_integral_kernel(f.v);
    CHECK(max_err(K.v, slow_K) <= 1e-8);
  }
}

TEST_CASE("fd4 fallback derivative") {
  auto f64 = sample(PeriodicGrid(64, DiffScheme::Fd4),
                    [](double x) { return std::sin(2.0 * pi * x); });
  auto f128 = sample(PeriodicGrid(128, DiffScheme::Fd4),
                     [](double x) { return std::sin(2.0 * pi * x); });
  auto err_of = [](const ScalarField& f) {
    auto df = spectral_derivative(f);  // dispatches on the grid scheme
    double e = 0.0;
    for (size_t j = 0; j < df.size(); ++j)
      e = std::max(e, std::abs(df[j] - 2.0 * pi * std::cos(2.0 * pi * f.grid.node(j))));
    return e;
  };
  const double e64 = err_of(f64), e128 = err_of(f128);
  CHECK(e128 < e64 / 12.0);  // 4th order
  CHECK(e64 < 1e-4);
}

// ---- along-map operators ----

TEST_CASE("partial_x_map examples") {
  const PeriodicGrid g(64);
  geometry::TargetGeometry sphere(geometry::TargetKind::Sphere2);
  geometry::TargetGeometry torus(geometry::TargetKind::FlatTorus2);

  auto cstate = initial_data::constant_map(g, sphere);
  auto dc = partial_x_map(cstate);
  for (const auto& v : dc.v) CHECK(norm(v) < 1e-13);

  auto gc = initial_data::great_circle(g, sphere, 1);
  double resid = 0.0;
  auto dgc = partial_x_map(gc, &resid);
  for (int j = 0; j < 64; ++j) {
    CHECK(norm(dgc.v[j]) == Catch::Approx(2.0 * pi).margin(1e-10));
    CHECK(std::abs(dot(dgc.v[j], gc.points[j].coords)) < 1e-10);
  }
  CHECK(resid < 1e-10);

  // winding torus map u(x) = (x mod 1, 0)
  auto lin = initial_data::great_circle(g, torus, 1);
  auto dlin = partial_x_map(lin);
  for (const auto& v : dlin.v) {
    CHECK(v.x == Catch::Approx(1.0).margin(1e-11));
    CHECK(std::abs(v.y) < 1e-11);
  }
}

TEST_CASE("partial_x_map converges spectrally") {
  // analytic but not band-limited: phase-modulated spin wave
  const double theta = 1.0;
  const double mod = 2.2;  // strong phase modulation: slowly decaying spectrum
  auto make_state = [&](int n) {
    PeriodicGrid g(n);
    geometry::TargetGeometry sphere(geometry::TargetKind::Sphere2);
    MapState u(g, sphere);
    for (int j = 0; j < n; ++j) {
      const double x = g.node(j);
      const double ph = 2.0 * pi * x + mod * std::sin(2.0 * pi * x);
      u.points[j] = {{std::sin(theta) * std::cos(ph), std::sin(theta) * std::sin(ph),
                      std::cos(theta)},
                     0};
    }
    return u;
  };
  auto error_at = [&](int n) {
    auto u = make_state(n);
    auto du = partial_x_map(u);
    double e = 0.0;
    for (int j = 0; j < n; ++j) {
      const double x = u.grid.node(j);
      const double ph = 2.0 * pi * x + mod * std::sin(2.0 * pi * x);
      const double dph = 2.0 * pi + mod * 2.0 * pi * std::cos(2.0 * pi * x);
      const Vec3 exact{-std::sin(theta) * std::sin(ph) * dph,
                       std::sin(theta) * std::cos(ph) * dph, 0.0};
      e = std::max(e, norm(du.v[j] - exact));
    }
    return e;
  };
  const double e16 = error_at(16), e32 = error_at(32), e64 = error_at(64),
               e128 = error_at(128);
  // faster than any fixed power: each doubling gains much more than 2^4,
  // until the roundoff floor
  CHECK((e32 < e16 / 16.0 || e32 < 1e-12));
  CHECK((e64 < e32 / 16.0 || e64 < 1e-12));
  CHECK((e128 < e64 / 16.0 || e128 < 1e-12));
}

TEST_CASE("covariant_x examples") {
  const PeriodicGrid g(64);
  geometry::TargetGeometry sphere(geometry::TargetKind::Sphere2);
  geometry::TargetGeometry torus(geometry::TargetKind::FlatTorus2);

  // flat torus: reduces to the componentwise derivative
  auto tstate = initial_data::random_smooth(g, torus, 7, 4, 0.1);
  TangentField V(g);
  auto vf = random_band_limited(g, 5, 3);
  auto wf = random_band_limited(g, 5, 4);
  for (int j = 0; j < 64; ++j) V.v[j] = {vf[j], wf[j], 0.0};
  auto cov = covariant_x(tstate, V);
  auto dv = spectral_derivative(vf);
  auto dw = spectral_derivative(wf);
  for (int j = 0; j < 64; ++j) {
    CHECK(cov.v[j].x == Catch::Approx(dv[j]).margin(1e-12));
    CHECK(cov.v[j].y == Catch::Approx(dw[j]).margin(1e-12));
  }

  // great circles are geodesics
  auto gc = initial_data::great_circle(g, sphere, 1);
  auto du = partial_x_map(gc);
  auto cov2 = covariant_x(gc, du);
  for (const auto& v : cov2.v) CHECK(norm(v) < 1e-10);
}

TEST_CASE("covariant_x metric compatibility") {
  const PeriodicGrid g(128);
  geometry::TargetGeometry sphere(geometry::TargetKind::Sphere2);
  auto u = initial_data::random_smooth(g, sphere, 21, 3, 0.2);

  // smooth tangent fields: band-limited ambient data, projected along u
  auto a1 = random_band_limited(g, 5, 31);
  auto a2 = random_band_limited(g, 5, 32);
  auto a3 = random_band_limited(g, 5, 35);
  auto b1 = random_band_limited(g, 5, 33);
  auto b2 = random_band_limited(g, 5, 34);
  auto b3 = random_band_limited(g, 5, 36);
  TangentField V(g), W(g);
  for (int j = 0; j < 128; ++j) {
    V.v[j] = u.geometry.project_tangent(u.points[j], {a1[j], a2[j], a3[j]}).v;
    W.v[j] = u.geometry.project_tangent(u.points[j], {b1[j], b2[j], b3[j]}).v;
  }
  auto covV = covariant_x(u, V);
  auto covW = covariant_x(u, W);
  ScalarField ip(g);
  for (int j = 0; j < 128; ++j) ip[j] = dot(V.v[j], W.v[j]);
  auto dip = spectral_derivative(ip);
  double resid = 0.0;
  for (int j = 0; j < 128; ++j)
    resid = std::max(resid, std::abs(dip[j] - dot(covV.v[j], W.v[j]) -
                                     dot(V.v[j], covW.v[j])));
  CHECK(resid <= 1e-8);
}

TEST_CASE("tension examples") {
  const PeriodicGrid g(64);
  geometry::TargetGeometry sphere(geometry::TargetKind::Sphere2);

  auto c = initial_data::constant_map(g, sphere);
  for (const auto& v : tension(c).v) CHECK(norm(v) < 1e-13);

  auto gc = initial_data::great_circle(g, sphere, 1);
  for (const auto& v : tension(gc).v) CHECK(norm(v) < 1e-9);

  // spin wave: int |tau|^2 = (2 pi n)^4 sin^2 cos^2, theta = pi/4, n = 1 -> 4 pi^4
  auto sw = initial_data::spin_wave(g, sphere, pi / 4.0, 1);
  auto tau = tension(sw);
  double e = 0.0;
  for (int j = 0; j < 64; ++j) e += dot(tau.v[j], tau.v[j]);
  e /= 64.0;
  CHECK(e == Catch::Approx(4.0 * std::pow(pi, 4)).margin(1e-8));

  // cross-check by a dense 4th-order finite-difference oracle
  const int M = 4096;
  const double h = 1.0 / M;
  auto up = [&](int j) {
    const double x = h * j;
    const double ph = 2.0 * pi * x;
    return Vec3{std::sin(pi / 4) * std::cos(ph), std::sin(pi / 4) * std::sin(ph),
                std::cos(pi / 4)};
  };
  double e_fd = 0.0;
  for (int j = 0; j < M; ++j) {
    const Vec3 um2 = up(j - 2), um1 = up(j - 1), u0 = up(j), up1 = up(j + 1),
               up2 = up(j + 2);
    const Vec3 uxx =
        (-1.0 * um2 + 16.0 * um1 - 30.0 * u0 + 16.0 * up1 - 1.0 * up2) *
        (1.0 / (12.0 * h * h));
    const Vec3 ux = (um2 - 8.0 * um1 + 8.0 * up1 - up2) * (1.0 / (12.0 * h));
    const Vec3 tau_fd = uxx + dot(ux, ux) * u0;
    e_fd += dot(tau_fd, tau_fd);
  }
  e_fd /= M;
  CHECK(e_fd == Catch::Approx(e).margin(1e-6));

  // embedded identity: tau = P(u_xx) + |u_x|^2 u pointwise
  auto du = partial_x_map(sw);
  std::vector<double> comp(64), dd(64);
  std::vector<Vec3> uxx(64);
  for (int c2 = 0; c2 < 3; ++c2) {
    for (int j = 0; j < 64; ++j)
      comp[j] = c2 == 0 ? sw.points[j].coords.x
                : c2 == 1 ? sw.points[j].coords.y
                          : sw.points[j].coords.z;
    grid::detail::derivative_span(comp, dd, sw.grid.scheme);
    std::vector<double> d2(64);
    grid::detail::derivative_span(dd, d2, sw.grid.scheme);
    for (int j = 0; j < 64; ++j)
      (c2 == 0 ? uxx[j].x : c2 == 1 ? uxx[j].y : uxx[j].z) = d2[j];
  }
  for (int j = 0; j < 64; ++j) {
    // tau = u_xx + |u_x|^2 u, the tangential projection of u_xx
    const Vec3 expect = uxx[j] + dot(du.v[j], du.v[j]) * sw.points[j].coords;
    CHECK(norm(tau.v[j] - expect) < 1e-8);
  }
}

TEST_CASE("cp1 map derivative via chart transitions") {
  const PeriodicGrid g(64);
  geometry::TargetGeometry cp1(geometry::TargetKind::FubiniStudyCP1);
  // |z| = 1 loop crosses nothing; same loop with points migrated to chart 1
  auto u = initial_data::great_circle(g, cp1, 1);
  auto du0 = partial_x_map(u);
  MapState v = u;
  for (auto& p : v.points) p = cp1.to_other_chart(p);
  auto du1 = partial_x_map(v);
  // metric norms agree chart to chart
  for (int j = 0; j < 64; ++j)
    CHECK(cp1.inner_raw(v.points[j], du1.v[j], du1.v[j]) ==
          Catch::Approx(cp1.inner_raw(u.points[j], du0.v[j], du0.v[j]))
              .margin(1e-9));
}
