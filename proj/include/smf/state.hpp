#pragma once

// Discretized maps u : S^1 -> N and tangent fields along them, with the
// along-map covariant calculus: partial_x_map, covariant_x, tension.

#include <cmath>
#include <vector>

#include "smf/geometry.hpp"
#include "smf/grid.hpp"

namespace smf::grid {

using geometry::TargetGeometry;
using geometry::TargetPoint;

/// The map u(t, .) at one time: one target point per grid node.
struct MapState {
  PeriodicGrid grid;
  TargetGeometry geometry{geometry::TargetKind::Sphere2};
  double time = 0.0;
  std::vector<TargetPoint> points;

  MapState() = default;
  MapState(const PeriodicGrid& g, const TargetGeometry& geom)
      : grid(g), geometry(geom), points(static_cast<size_t>(g.n_points)) {}

  int n() const { return grid.n_points; }

  void validate() const {
    if (static_cast<int>(points.size()) != grid.n_points)
      throw ContractViolation("MapState: point count does not match grid");
    for (const auto& p : points)
      if (!geometry.point_valid(p))
        throw ContractViolation("MapState: point violates the target invariant");
  }

  bool is_finite() const {
    for (const auto& p : points)
      if (!finite(p.coords)) return false;
    return true;
  }
};

/// Per-node tangent components along a MapState.  Components are stored in
/// each node's own chart (chart targets) or ambient coordinates (embedded).
struct TangentField {
  PeriodicGrid grid;
  std::vector<Vec3> v;

  TangentField() = default;
  explicit TangentField(const PeriodicGrid& g)
      : grid(g), v(static_cast<size_t>(g.n_points)) {}

  size_t size() const { return v.size(); }
};

namespace detail {

/// Per-thread scalar scratch rows for the along-map derivative loops.
inline std::vector<double>& scalar_scratch(int slot, size_t n) {
  thread_local std::vector<double> buf[4];
  if (buf[slot].size() < n) buf[slot].resize(n);
  return buf[slot];
}

/// Continuous lift of one periodic chart component: wraps adjacent
/// differences into (-1/2, 1/2], accumulates, and splits off the integer
/// winding so the remainder is an honestly periodic grid function.
struct UnwrappedComponent {
  std::vector<double> periodic;  // lift minus winding ramp
  int winding = 0;
};

inline UnwrappedComponent unwrap_component(const std::vector<double>& raw) {
  const int n = static_cast<int>(raw.size());
  UnwrappedComponent out;
  out.periodic.resize(n);
  double lift = raw[0];
  double total = 0.0;
  out.periodic[0] = raw[0];
  for (int j = 1; j <= n; ++j) {
    const double next = raw[j % n];
    double d = next - raw[j - 1];
    d -= std::round(d);
    total += d;
    if (j < n) {
      lift += d;
      out.periodic[j] = lift;
    }
  }
  out.winding = static_cast<int>(std::llround(total));
  for (int j = 0; j < n; ++j)
    out.periodic[j] -= out.winding * (static_cast<double>(j) / n);
  return out;
}

/// All points expressed in one common chart.  Fails with RechartRequired if
/// any point cannot live in the chart of node 0.
inline std::vector<Vec3> common_chart_coords(const MapState& u, int* chart_out) {
  const auto& geom = u.geometry;
  const int chart = u.points.empty() ? 0 : u.points[0].chart;
  if (chart_out) *chart_out = chart;
  std::vector<Vec3> coords(u.points.size());
  for (size_t j = 0; j < u.points.size(); ++j)
    coords[j] = geom.in_chart(u.points[j], chart).coords;
  return coords;
}

}  // namespace detail

/// Componentwise derivative of the map, tangent-projected node by node for
/// embedded targets.  The norm of the discarded normal component is the
/// discretization diagnostic `proj_residual` (max over nodes).
inline TangentField partial_x_map(const MapState& u, double* proj_residual = nullptr) {
  const int n = u.n();
  const auto& geom = u.geometry;
  TangentField out(u.grid);
  double resid = 0.0;

  if (geom.representation() == geometry::Representation::Embedded) {
    auto& comp = detail::scalar_scratch(0, n);
    auto& dcomp = detail::scalar_scratch(1, n);
    for (int c = 0; c < 3; ++c) {
      for (int j = 0; j < n; ++j)
        comp[j] = c == 0 ? u.points[j].coords.x
                 : c == 1 ? u.points[j].coords.y
                          : u.points[j].coords.z;
      detail::derivative_span(std::span(comp).first(n),
                              std::span(dcomp).first(n), u.grid.scheme);
      for (int j = 0; j < n; ++j)
        (c == 0 ? out.v[j].x : c == 1 ? out.v[j].y : out.v[j].z) = dcomp[j];
    }
    for (int j = 0; j < n; ++j) {
      const Vec3 raw = out.v[j];
      const Vec3 t = geom.project_tangent(u.points[j], raw).v;
      resid = std::max(resid, norm(raw - t));
      out.v[j] = t;
    }
  } else if (geom.kind() == geometry::TargetKind::FlatTorus2) {
    std::vector<double> comp(n), dcomp(n);
    for (int c = 0; c < 2; ++c) {
      for (int j = 0; j < n; ++j)
        comp[j] = c == 0 ? u.points[j].coords.x : u.points[j].coords.y;
      auto lifted = detail::unwrap_component(comp);
      detail::derivative_span(lifted.periodic, dcomp, u.grid.scheme);
      for (int j = 0; j < n; ++j)
        (c == 0 ? out.v[j].x : out.v[j].y) = dcomp[j] + lifted.winding;
    }
  } else {
    int chart = 0;
    auto coords = detail::common_chart_coords(u, &chart);
    std::vector<double> comp(n), dcomp(n);
    std::vector<Vec3> dz(n);
    for (int c = 0; c < 2; ++c) {
      for (int j = 0; j < n; ++j) comp[j] = c == 0 ? coords[j].x : coords[j].y;
      detail::derivative_span(comp, dcomp, u.grid.scheme);
      for (int j = 0; j < n; ++j) (c == 0 ? dz[j].x : dz[j].y) = dcomp[j];
    }
    for (int j = 0; j < n; ++j) {
      // map the common-chart derivative back into each node's own chart
      if (u.points[j].chart == chart) {
        out.v[j] = dz[j];
      } else {
        geometry::TargetPoint in_common{coords[j], chart};
        out.v[j] = geom.tangent_to_other_chart(in_common, dz[j]);
      }
    }
  }

  if (proj_residual) *proj_residual = resid;
  return out;
}

namespace detail {

/// covariant_x with the base derivative du = partial_x_map(u) already known.
inline TangentField covariant_x_with(const MapState& u, const TangentField& du,
                                     const TangentField& V,
                                     double* proj_residual = nullptr) {
  const int n = u.n();
  const auto& geom = u.geometry;
  TangentField out(u.grid);
  double resid = 0.0;

  const bool embedded =
      geom.representation() == geometry::Representation::Embedded;

  if (geom.has_charts()) {
    int chart = 0;
    auto coords = common_chart_coords(u, &chart);
    std::vector<double> comp(n), dcomp(n);
    std::vector<Vec3> vc(n), dvc(n);
    for (int j = 0; j < n; ++j) {
      vc[j] = u.points[j].chart == chart
                  ? V.v[j]
                  : geom.tangent_to_other_chart(u.points[j], V.v[j]);
    }
    for (int c = 0; c < 2; ++c) {
      for (int j = 0; j < n; ++j) comp[j] = c == 0 ? vc[j].x : vc[j].y;
      derivative_span(comp, dcomp, u.grid.scheme);
      for (int j = 0; j < n; ++j) (c == 0 ? dvc[j].x : dvc[j].y) = dcomp[j];
    }
    for (int j = 0; j < n; ++j) {
      geometry::TargetPoint pc{coords[j], chart};
      const Vec3 dux = u.points[j].chart == chart
                           ? du.v[j]
                           : geom.tangent_to_other_chart(u.points[j], du.v[j]);
      Vec3 w = dvc[j] + geom.connection_correction(pc, dux, vc[j]);
      out.v[j] = u.points[j].chart == chart
                     ? w
                     : geom.tangent_to_other_chart(pc, w);
    }
  } else {
    auto& comp = scalar_scratch(0, n);
    auto& dcomp = scalar_scratch(1, n);
    const int dim = geom.dim();
    for (int c = 0; c < dim; ++c) {
      for (int j = 0; j < n; ++j)
        comp[j] = c == 0 ? V.v[j].x : c == 1 ? V.v[j].y : V.v[j].z;
      derivative_span(std::span(comp).first(n), std::span(dcomp).first(n),
                      u.grid.scheme);
      for (int j = 0; j < n; ++j)
        (c == 0 ? out.v[j].x : c == 1 ? out.v[j].y : out.v[j].z) = dcomp[j];
    }
    for (int j = 0; j < n; ++j) {
      Vec3 w = out.v[j] + geom.connection_correction(u.points[j], du.v[j], V.v[j]);
      if (embedded) {
        const Vec3 t = geom.project_tangent(u.points[j], w).v;
        resid = std::max(resid, norm(w - t));
        w = t;
      }
      out.v[j] = w;
    }
  }

  if (proj_residual) *proj_residual = std::max(resid, *proj_residual);
  return out;
}

}  // namespace detail

/// nabla_x V along u: componentwise derivative plus the connection
/// correction Gamma(u)(d_x u, V), tangent-projected on embedded targets.
inline TangentField covariant_x(const MapState& u, const TangentField& V,
                                double* proj_residual = nullptr) {
  const TangentField du = partial_x_map(u, proj_residual);
  return detail::covariant_x_with(u, du, V, proj_residual);
}

/// Tension field nabla_x d_x u (trace of the second covariant derivative on
/// a one-dimensional domain).
inline TangentField tension(const MapState& u, double* proj_residual = nullptr) {
  const TangentField du = partial_x_map(u, proj_residual);
  return detail::covariant_x_with(u, du, du, proj_residual);
}

}  // namespace smf::grid
