#pragma once

// Densities and scalars tracked along a run: the momentum m, the energy E,
// the flux density b = <J d_x u, nabla_x d_x u>, the determinant densities
// det A and det A_m, the conserved combination Q, the running space-time
// accumulants xi1/xi2, discrete residuals of both balance laws, and the
// interpolation-inequality monitors (reported as empirical ratios; the
// estimates' constants are never asserted).

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "smf/flow_types.hpp"
#include "smf/geometry.hpp"
#include "smf/grid.hpp"
#include "smf/state.hpp"

namespace smf::diagnostics {

using flow::Trajectory;
using grid::MapState;
using grid::PeriodicGrid;
using grid::ScalarField;
using grid::TangentField;

constexpr double quiet_nan = std::numeric_limits<double>::quiet_NaN();

/// All pointwise densities of one state, computed in a single pass.
///   a      = 1/2 |d_x u|^2             (momentum density)
///   b      = <J d_x u, nabla_x d_x u>  (momentum flux)
///   d      = |nabla_x d_x u|^2 - <nabla_x nabla_x d_x u, d_x u> + q/4
///   q      = <R(d_x u, J d_x u) d_x u, J d_x u>
///   detA   = a d - b^2,  detAm = <nabla_x d_x u, d_x u>^2
struct DensityFields {
  ScalarField a, b, d, q, detA, detAm, ux2, tau2, ux4;
  double proj_residual = 0.0;
};

inline DensityFields density_fields(const MapState& u) {
  const auto& geom = u.geometry;
  const int n = u.n();
  DensityFields f{ScalarField(u.grid), ScalarField(u.grid), ScalarField(u.grid),
                  ScalarField(u.grid), ScalarField(u.grid), ScalarField(u.grid),
                  ScalarField(u.grid), ScalarField(u.grid), ScalarField(u.grid)};

  double resid = 0.0;
  const TangentField ux = grid::partial_x_map(u, &resid);
  const TangentField tau = grid::detail::covariant_x_with(u, ux, ux, &resid);
  const TangentField tau_x = grid::detail::covariant_x_with(u, ux, tau, &resid);
  f.proj_residual = resid;

  for (int j = 0; j < n; ++j) {
    const auto& p = u.points[j];
    const double u2 = geom.norm2(p, ux.v[j]);
    const double t2 = geom.norm2(p, tau.v[j]);
    const Vec3 jux = geom.apply_J_raw(p, ux.v[j]);
    const double bj = geom.inner_raw(p, jux, tau.v[j]);
    const double qj = geom.curvature_quartic(p, ux.v[j]);
    const double c3 = geom.inner_raw(p, tau_x.v[j], ux.v[j]);
    const double tu = geom.inner_raw(p, tau.v[j], ux.v[j]);
    f.ux2[j] = u2;
    f.ux4[j] = u2 * u2;
    f.tau2[j] = t2;
    f.a[j] = 0.5 * u2;
    f.b[j] = bj;
    f.q[j] = qj;
    f.d[j] = t2 - c3 + 0.25 * qj;
    f.detA[j] = f.a[j] * f.d[j] - bj * bj;
    f.detAm[j] = tu * tu;
  }
  return f;
}

/// m(t) = int <d_x u, d_x u>.
inline double momentum(const MapState& u) {
  const TangentField ux = grid::partial_x_map(u);
  double s = 0.0;
  for (int j = 0; j < u.n(); ++j) s += u.geometry.norm2(u.points[j], ux.v[j]);
  return s / u.n();
}

/// E(t) = int <nabla_x d_x u, nabla_x d_x u>.
inline double energy(const MapState& u) {
  const TangentField tau = grid::tension(u);
  double s = 0.0;
  for (int j = 0; j < u.n(); ++j) s += u.geometry.norm2(u.points[j], tau.v[j]);
  return s / u.n();
}

/// Pointwise flux density b = <J d_x u, nabla_x d_x u>.
inline ScalarField b_field(const MapState& u) {
  const TangentField ux = grid::partial_x_map(u);
  const TangentField tau = grid::detail::covariant_x_with(u, ux, ux);
  ScalarField out(u.grid);
  for (int j = 0; j < u.n(); ++j) {
    const Vec3 jux = u.geometry.apply_J_raw(u.points[j], ux.v[j]);
    out[j] = u.geometry.inner_raw(u.points[j], jux, tau.v[j]);
  }
  return out;
}

/// (det A, det A_m) as fields.
inline std::pair<ScalarField, ScalarField> det_fields(const MapState& u) {
  auto f = density_fields(u);
  return {std::move(f.detA), std::move(f.detAm)};
}

/// Q = 1/2 E + 1/8 int <R(d_x u, J d_x u) d_x u, J d_x u>; conserved by the
/// flow on locally symmetric targets.
inline double conserved_Q(const MapState& u) {
  const auto f = density_fields(u);
  double e = 0.0, q = 0.0;
  for (int j = 0; j < u.n(); ++j) {
    e += f.tau2[j];
    q += f.q[j];
  }
  e /= u.n();
  q /= u.n();
  return 0.5 * e + 0.125 * q;
}

/// Empirical ratios for the interpolation estimates.  Each right side uses
/// only the conserved norms the estimate allows; ratios are reported, never
/// asserted against a specific constant.
struct MonitorRecord {
  // int |d_x u|^4  vs  E^{1/2} m^{3/2} + m^2
  double si1_lhs = 0.0, si1_rhs = 0.0, si1_ratio = quiet_nan;
  // int |d_x u|^4  vs  ||d_x|d_x u|^2||^{2/3} ||.||_1^{4/3} + ||.||_1^2
  double l4_ratio = quiet_nan;
  // int |d_x u|^5  vs  ||d_x|d_x u|^2|| ||.||_1^{3/2} + ||.||_1^{5/2}
  double l5_ratio = quiet_nan;
  // int |d_x u|^6  vs  ||d_x|d_x u|^2||^{4/3} ||.||_1^{5/3} + ||.||_1^3
  double l6_ratio = quiet_nan;
  bool applicable = false;
};

inline MonitorRecord interpolation_monitors(const MapState& u) {
  const auto f = density_fields(u);
  const int n = u.n();
  MonitorRecord rec;

  double m = 0.0, e = 0.0, i4 = 0.0, i5 = 0.0, i6 = 0.0;
  for (int j = 0; j < n; ++j) {
    m += f.ux2[j];
    e += f.tau2[j];
    i4 += f.ux4[j];
    i5 += f.ux4[j] * std::sqrt(f.ux2[j]);
    i6 += f.ux4[j] * f.ux2[j];
  }
  m /= n; e /= n; i4 /= n; i5 /= n; i6 /= n;

  ScalarField ux2_field(u.grid);
  ux2_field.v = f.ux2.v;
  const ScalarField dux2 = grid::spectral_derivative(ux2_field);
  const double g2 = grid::l2_norm(dux2);          // ||d_x |d_x u|^2||_{L^2}
  const double n1 = grid::l1_norm(f.ux2.v);       // |||d_x u|^2||_{L^1} = m

  rec.si1_lhs = i4;
  rec.si1_rhs = std::sqrt(e) * std::pow(m, 1.5) + m * m;
  if (rec.si1_rhs > 0.0) {
    rec.si1_ratio = rec.si1_lhs / rec.si1_rhs;
    rec.applicable = true;
  }
  const double r4 = std::pow(g2, 2.0 / 3.0) * std::pow(n1, 4.0 / 3.0) + n1 * n1;
  const double r5 = g2 * std::pow(n1, 1.5) + std::pow(n1, 2.5);
  const double r6 = std::pow(g2, 4.0 / 3.0) * std::pow(n1, 5.0 / 3.0) + n1 * n1 * n1;
  if (r4 > 0.0) rec.l4_ratio = i4 / r4;
  if (r5 > 0.0) rec.l5_ratio = i5 / r5;
  if (r6 > 0.0) rec.l6_ratio = i6 / r6;
  return rec;
}

struct DiagnosticsSample {
  double time = 0.0;
  double m = 0.0;
  double E = 0.0;
  double b_integral = 0.0;
  double Q = 0.0;
  double detA_integral = 0.0;
  double detAm_integral = 0.0;
  double xi1 = 0.0;
  double xi2 = 0.0;
  double balance1_residual = quiet_nan;  // centered differences: interior only
  double balance2_residual = quiet_nan;
  double si1_ratio = quiet_nan;
  double proj_residual = 0.0;
  double ux4_integral = 0.0;
  double neiji_residual = 0.0;  // integrated det-A identity defect
};

struct DiagnosticsSeries {
  std::vector<DiagnosticsSample> samples;
  double sample_dt = 0.0;

  double xi1() const { return samples.empty() ? 0.0 : samples.back().xi1; }
  double xi2() const { return samples.empty() ? 0.0 : samples.back().xi2; }
};

/// Append `next` to the series, advancing xi1/xi2 by the trapezoid rule.
/// Samples must be uniformly spaced in time.
inline void accumulate_xi(DiagnosticsSeries& series, DiagnosticsSample next) {
  if (series.samples.empty()) {
    next.xi1 = 0.0;
    next.xi2 = 0.0;
    series.samples.push_back(next);
    return;
  }
  const auto& prev = series.samples.back();
  const double dt = next.time - prev.time;
  if (dt <= 0.0)
    throw ContractViolation("accumulate_xi: samples not strictly increasing");
  if (series.samples.size() >= 2) {
    const double dt0 = series.sample_dt;
    if (std::abs(dt - dt0) > 1e-9 * std::max(1.0, std::abs(dt0)))
      throw ContractViolation("accumulate_xi: non-uniform sample stride");
  } else {
    series.sample_dt = dt;
  }
  next.xi1 = prev.xi1 + 0.5 * dt * (prev.detAm_integral + next.detAm_integral);
  next.xi2 = prev.xi2 + 0.5 * dt * (prev.detA_integral + next.detA_integral);
  series.samples.push_back(next);
}

namespace detail {

inline DiagnosticsSample sample_from_fields(const MapState& u,
                                            const DensityFields& f) {
  const int n = u.n();
  DiagnosticsSample s;
  s.time = u.time;
  double m = 0, e = 0, b = 0, q = 0, dA = 0, dAm = 0, u4 = 0, gap = 0;
  for (int j = 0; j < n; ++j) {
    m += f.ux2[j];
    e += f.tau2[j];
    b += f.b[j];
    q += f.q[j];
    dA += f.detA[j];
    dAm += f.detAm[j];
    u4 += f.ux4[j];
    gap += f.ux2[j] * f.tau2[j] - f.b[j] * f.b[j] + 0.125 * f.ux2[j] * f.q[j];
  }
  m /= n; e /= n; b /= n; q /= n; dA /= n; dAm /= n; u4 /= n; gap /= n;
  s.m = m;
  s.E = e;
  s.b_integral = b;
  s.Q = 0.5 * e + 0.125 * q;
  s.detA_integral = dA;
  s.detAm_integral = dAm;
  s.ux4_integral = u4;
  s.proj_residual = f.proj_residual;
  // integrated det-A expansion; the total-derivative term drops by periodicity
  s.neiji_residual = std::abs(dA - (dAm + gap));
  const double rhs = std::sqrt(e) * std::pow(m, 1.5) + m * m;
  if (rhs > 0.0) s.si1_ratio = u4 / rhs;
  return s;
}

}  // namespace detail

inline DiagnosticsSample compute_sample(const MapState& u) {
  return detail::sample_from_fields(u, density_fields(u));
}

/// L2 norms of the discrete balance-law residuals on the interior stored
/// samples, using centered time differences of the stored densities and the
/// grid derivative of the fluxes; entries 0 and M are NaN.
///
///   balance 1:  d_t a - d_x b = 0
///   balance 2:  d_t b - d_x d = 0   (zero source on the shipped targets)
inline std::vector<double> balance1_residual(const Trajectory& traj) {
  const size_t M = traj.size();
  if (M < 3)
    throw ContractViolation("balance1_residual: need at least 3 stored states");
  std::vector<double> out(M, quiet_nan);
  std::vector<DensityFields> f;
  f.reserve(M);
  for (const auto& s : traj.states) f.push_back(density_fields(s));
  const double dd = 2.0 * traj.sample_dt;
  for (size_t i = 1; i + 1 < M; ++i) {
    ScalarField r = grid::spectral_derivative(f[i].b);
    for (size_t j = 0; j < r.size(); ++j)
      r[j] = (f[i + 1].a[j] - f[i - 1].a[j]) / dd - r[j];
    out[i] = grid::l2_norm(r);
  }
  return out;
}

inline std::vector<double> balance2_residual(const Trajectory& traj) {
  const size_t M = traj.size();
  if (M < 3)
    throw ContractViolation("balance2_residual: need at least 3 stored states");
  std::vector<double> out(M, quiet_nan);
  std::vector<DensityFields> f;
  f.reserve(M);
  for (const auto& s : traj.states) f.push_back(density_fields(s));
  const double dd = 2.0 * traj.sample_dt;
  for (size_t i = 1; i + 1 < M; ++i) {
    ScalarField r = grid::spectral_derivative(f[i].d);
    for (size_t j = 0; j < r.size(); ++j)
      r[j] = (f[i + 1].b[j] - f[i - 1].b[j]) / dd - r[j];
    out[i] = grid::l2_norm(r);
  }
  return out;
}

/// Full post-pass over a trajectory: per-sample scalars, xi accumulation,
/// and both balance residuals.
inline DiagnosticsSeries analyze(const Trajectory& traj) {
  DiagnosticsSeries series;
  series.sample_dt = traj.sample_dt;
  const size_t M = traj.size();
  std::vector<DensityFields> f;
  f.reserve(M);
  for (const auto& s : traj.states) f.push_back(density_fields(s));

  for (size_t i = 0; i < M; ++i)
    accumulate_xi(series, detail::sample_from_fields(traj.states[i], f[i]));

  if (M >= 3) {
    const double dd = 2.0 * traj.sample_dt;
    for (size_t i = 1; i + 1 < M; ++i) {
      ScalarField r1 = grid::spectral_derivative(f[i].b);
      ScalarField r2 = grid::spectral_derivative(f[i].d);
      for (size_t j = 0; j < r1.size(); ++j) {
        r1[j] = (f[i + 1].a[j] - f[i - 1].a[j]) / dd - r1[j];
        r2[j] = (f[i + 1].b[j] - f[i - 1].b[j]) / dd - r2[j];
      }
      series.samples[i].balance1_residual = grid::l2_norm(r1);
      series.samples[i].balance2_residual = grid::l2_norm(r2);
    }
  }
  return series;
}

/// CSV columns, in this exact order.
inline const char* csv_header() {
  return "t,m,E,b_integral,Q,detA_int,detAm_int,xi1,xi2,bal1_res,bal2_res,"
         "si1_ratio,proj_residual";
}

inline std::string csv_row(const DiagnosticsSample& s) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                "%.17g,%.17g,%.17g",
                s.time, s.m, s.E, s.b_integral, s.Q, s.detA_integral,
                s.detAm_integral, s.xi1, s.xi2, s.balance1_residual,
                s.balance2_residual, s.si1_ratio, s.proj_residual);
  return buf;
}

inline void write_csv(const DiagnosticsSeries& series, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << csv_header() << "\n";
  for (const auto& s : series.samples) out << csv_row(s) << "\n";
}

}  // namespace smf::diagnostics
