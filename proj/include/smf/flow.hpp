#pragma once

// Method-of-lines integration of d_t u = -J tau(u).
//
// The default scheme is the implicit midpoint rule with a plain fixed-point
// solve.  The flow field is pointwise orthogonal to the state on the sphere,
// so the midpoint step preserves each |u_j| exactly up to solver tolerance;
// no renormalization is applied.  The fixed-point iteration stops at the
// requested tolerance or at its roundoff floor, whichever comes first; the
// achieved residual is reported.  A projected classical RK4 step is kept as
// an explicit cross-check.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "smf/diagnostics.hpp"
#include "smf/flow_types.hpp"
#include "smf/state.hpp"

namespace smf::flow {

using grid::MapState;
using grid::TangentField;

/// Right-hand side of the flow: -J tau(u), evaluated nodewise.
inline TangentField velocity(const MapState& u) {
  const TangentField tau = grid::tension(u);
  TangentField out(u.grid);
  for (int j = 0; j < u.n(); ++j)
    out.v[j] = -u.geometry.apply_J_raw(u.points[j], tau.v[j]);
  return out;
}

struct StepStats {
  int iterations = 0;
  double residual = 0.0;
  bool stalled = false;  // accepted at the roundoff floor, above tolerance
};

namespace detail {

inline void form_midpoint(const MapState& u, const std::vector<Vec3>& w,
                          MapState& mid) {
  const bool embedded =
      u.geometry.representation() == geometry::Representation::Embedded;
  for (int j = 0; j < u.n(); ++j) {
    Vec3 avg = (u.points[j].coords + w[j]) * 0.5;
    if (embedded) {
      const double nn = norm(avg);
      if (nn < 1e-12) throw DegenerateInput("midpoint collapsed to zero");
      avg *= 1.0 / nn;
    }
    mid.points[j].coords = avg;
    mid.points[j].chart = u.points[j].chart;
  }
}

/// Apply (I + A)(I + (dt/2)^2 d_x^4)^{-1} to a nodewise update field, with
/// A = -(dt/2) J d_xx evaluated at `mid`.  This is the semi-implicit
/// preconditioner for the midpoint fixed-point solve: A approximates the
/// iteration's linearization, J^2 = -id makes (I - A)(I + A) ~ I + (dt/2)^2
/// d_x^4, and the quartic solve is diagonal in Fourier space.  The damped
/// iteration keeps the same fixed point but contracts uniformly in the
/// wavenumber, where the plain update would amplify the modes with
/// dt (2 pi k)^2 / 2 > 1.
inline void precondition_update(const MapState& mid, double dt,
                                std::vector<Vec3>& delta) {
  const int n = static_cast<int>(delta.size());
  const int dim = mid.geometry.dim();
  auto& fft = grid::detail::fft_for(n);
  thread_local std::vector<std::complex<double>> c, c2;
  thread_local std::vector<double> comp, solved;
  thread_local std::vector<Vec3> damped, d2;
  c.resize(fft.spectrum_size());
  c2.resize(fft.spectrum_size());
  comp.resize(n);
  solved.resize(n);
  damped.assign(n, {});
  d2.assign(n, {});

  const double half_dt = 0.5 * dt;
  for (int a = 0; a < dim; ++a) {
    for (int j = 0; j < n; ++j)
      comp[j] = a == 0 ? delta[j].x : a == 1 ? delta[j].y : delta[j].z;
    fft.forward(std::span(comp).first(n), c.data());
    for (int k = 0; k < n / 2; ++k) {
      const double w2 = std::pow(2.0 * std::numbers::pi * k, 2);
      const double y = half_dt * w2;
      c[k] /= (1.0 + y * y);
      c2[k] = -w2 * c[k];  // second derivative of the solved field
    }
    // the derivative operator zeroes the Nyquist mode, so that mode is not
    // stiff: apply the residual there undamped, with no A contribution
    c2[n / 2] = 0.0;
    fft.inverse(c.data(), std::span(solved).first(n));
    for (int j = 0; j < n; ++j)
      (a == 0 ? damped[j].x : a == 1 ? damped[j].y : damped[j].z) = solved[j];
    fft.inverse(c2.data(), std::span(solved).first(n));
    for (int j = 0; j < n; ++j)
      (a == 0 ? d2[j].x : a == 1 ? d2[j].y : d2[j].z) = solved[j];
  }
  for (int j = 0; j < n; ++j)
    delta[j] =
        damped[j] - half_dt * mid.geometry.apply_J_raw(mid.points[j], d2[j]);
}

inline MapState finalize_state(const MapState& u, const std::vector<Vec3>& w,
                               double new_time) {
  MapState out = u;
  out.time = new_time;
  const auto& geom = u.geometry;
  for (int j = 0; j < u.n(); ++j) {
    switch (geom.kind()) {
      case geometry::TargetKind::Sphere2:
        out.points[j] = {w[j], 0};  // midpoint flow preserves the norm itself
        break;
      case geometry::TargetKind::FlatTorus2:
        out.points[j] = geom.project_point(w[j]);
        break;
      case geometry::TargetKind::FubiniStudyCP1:
        out.points[j] =
            geom.migrate_if_needed({{w[j].x, w[j].y, 0.0}, u.points[j].chart});
        break;
    }
  }
  return out;
}

}  // namespace detail

/// One implicit midpoint step: solves w = u + dt * F(P((u + w)/2)) by
/// fixed-point iteration on w (P = point projection; plain average on chart
/// targets).  The iteration applies the spectral preconditioner above to
/// each update; where dt (2 pi k)^2 is small this is the plain Picard map,
/// and the fixed point is identical in all regimes.  Convergence is measured
/// on the raw fixed-point residual in L-infinity.  The iteration always
/// starts from u itself: velocity-based warm starts recycle the previous
/// step's high-wavenumber solver noise into the seed, which the slowly
/// contracting top modes then take tens of iterations to shed.
inline MapState step_implicit_midpoint(const MapState& u, const SchemeConfig& cfg,
                                       StepStats* stats = nullptr) {
  const int n = u.n();
  const double dt = cfg.dt;
  if (dt == 0.0) {
    if (stats) *stats = {};
    return u;
  }

  std::vector<Vec3> w(n), delta(n), best_w(n);
  for (int j = 0; j < n; ++j) w[j] = u.points[j].coords;

  MapState mid = u;
  double best_delta = std::numeric_limits<double>::infinity();
  double res = best_delta;
  int iter = 0;
  TangentField f;

  for (iter = 1; iter <= cfg.max_fixed_point_iters; ++iter) {
    detail::form_midpoint(u, w, mid);
    f = velocity(mid);
    res = 0.0;
    for (int j = 0; j < n; ++j) {
      delta[j] = u.points[j].coords + dt * f.v[j] - w[j];
      res = std::max(res, norm_inf(delta[j]));
    }
    if (!std::isfinite(res))
      throw NonconvergenceError("implicit midpoint diverged (non-finite iterate)",
                                res, iter);
    if (res <= cfg.fixed_point_tol) break;
    if (res < best_delta) {
      best_delta = res;
      best_w = w;
    } else if (res > 16.0 * best_delta) {
      throw NonconvergenceError(
          "implicit midpoint fixed point diverges (dt too large)", best_delta,
          iter);
    }
    detail::precondition_update(mid, dt, delta);
    for (int j = 0; j < n; ++j) w[j] += delta[j];
  }
  if (res > cfg.fixed_point_tol) {
    // stalled at the roundoff floor of the stiff map; keep the best iterate
    // and report the achieved residual
    const double stall_cap = std::max(cfg.fixed_point_tol, 1e-8);
    if (best_delta > stall_cap)
      throw NonconvergenceError("implicit midpoint did not converge", res,
                                cfg.max_fixed_point_iters);
    w = best_w;
    if (stats) {
      stats->iterations = iter;
      stats->residual = best_delta;
      stats->stalled = true;
    }
    return detail::finalize_state(u, w, u.time + dt);
  }

  if (stats) {
    stats->iterations = iter;
    stats->residual = res;
    stats->stalled = false;
  }
  return detail::finalize_state(u, w, u.time + dt);
}

/// Classical 4-stage explicit step on the ambient/chart coordinates with a
/// point projection after each stage and after the update.  Cross-check
/// scheme only.
inline MapState step_rk4_projected(const MapState& u, const SchemeConfig& cfg) {
  const int n = u.n();
  const double dt = cfg.dt;
  if (dt == 0.0) return u;
  const bool embedded =
      u.geometry.representation() == geometry::Representation::Embedded;

  auto stage = [&](const TangentField& k, double c) {
    MapState y = u;
    for (int j = 0; j < n; ++j) {
      Vec3 p = u.points[j].coords + (c * dt) * k.v[j];
      if (embedded) p *= 1.0 / norm(p);
      y.points[j].coords = p;
    }
    return y;
  };

  const TangentField k1 = velocity(u);
  const TangentField k2 = velocity(stage(k1, 0.5));
  const TangentField k3 = velocity(stage(k2, 0.5));
  const TangentField k4 = velocity(stage(k3, 1.0));

  std::vector<Vec3> w(n);
  for (int j = 0; j < n; ++j)
    w[j] = u.points[j].coords +
           (dt / 6.0) * (k1.v[j] + 2.0 * k2.v[j] + 2.0 * k3.v[j] + k4.v[j]);

  MapState out = u;
  out.time = u.time + dt;
  for (int j = 0; j < n; ++j) {
    if (embedded) {
      out.points[j] = u.geometry.project_point(w[j]);
    } else if (u.geometry.has_charts()) {
      out.points[j] = u.geometry.migrate_if_needed(
          {{w[j].x, w[j].y, 0.0}, u.points[j].chart});
    } else {
      out.points[j] = u.geometry.project_point(w[j]);
    }
  }
  return out;
}

struct EvolveResult {
  Trajectory trajectory;
  diagnostics::DiagnosticsSeries series;
  bool aborted = false;
  std::string abort_reason;
  long total_steps = 0;
  double max_solver_residual = 0.0;
  int max_solver_iterations = 0;
};

/// Step from u0.time over a horizon T, storing every diag_stride-th state.
/// T must be an integer number of steps and the step count a multiple of
/// diag_stride (uniform stored stride).  Aborts cleanly on solver
/// nonconvergence or non-finite states, returning the partial trajectory.
inline EvolveResult evolve(const MapState& u0, double T, const SchemeConfig& cfg,
                           int diag_stride) {
  if (T <= 0.0) throw ConfigError("t_final", "must be positive");
  if (diag_stride < 1) throw ConfigError("diag_stride", "must be >= 1");
  validate_dt(cfg, u0.grid);
  u0.validate();

  const long n_steps = std::llround(T / cfg.dt);
  if (n_steps < 1 || std::abs(n_steps * cfg.dt - T) > 1e-9 * std::max(1.0, T))
    throw ConfigError("t_final", "must be an integer multiple of dt");
  if (n_steps % diag_stride != 0)
    throw ConfigError("diag_stride", "must divide t_final/dt");

  EvolveResult res;
  res.trajectory.config = cfg;
  res.trajectory.sample_dt = diag_stride * cfg.dt;
  res.trajectory.states.reserve(static_cast<size_t>(n_steps / diag_stride) + 1);
  res.trajectory.states.push_back(u0);

  MapState u = u0;
  const double t0 = u0.time;

  for (long step = 1; step <= n_steps; ++step) {
    try {
      if (cfg.scheme == Scheme::ImplicitMidpoint) {
        StepStats st;
        u = step_implicit_midpoint(u, cfg, &st);
        res.max_solver_residual = std::max(res.max_solver_residual, st.residual);
        res.max_solver_iterations =
            std::max(res.max_solver_iterations, st.iterations);
      } else {
        u = step_rk4_projected(u, cfg);
      }
    } catch (const NonconvergenceError& e) {
      res.aborted = true;
      res.abort_reason = e.what();
      break;
    }
    u.time = t0 + static_cast<double>(step) * cfg.dt;
    res.total_steps = step;
    if (step % diag_stride == 0) {
      if (!u.is_finite()) {
        res.aborted = true;
        res.abort_reason = "non-finite state";
        break;
      }
      res.trajectory.states.push_back(u);
    }
  }

  res.series = diagnostics::analyze(res.trajectory);
  return res;
}

}  // namespace smf::flow
