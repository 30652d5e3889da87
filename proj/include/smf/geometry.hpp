#pragma once

// Pointwise differential geometry of the target manifold: metric, compatible
// complex structure J, connection correction, curvature operator.  Three
// concrete targets are shipped:
//
//   sphere2  unit round sphere, embedded in 3-space, J_p v = p x v
//   torus2   flat 2-torus, one periodic chart with the identity metric
//   cp1      round sphere seen through two stereographic charts with the
//            conformal metric lambda(z)^2 |dz|^2, lambda = 2/(1+|z|^2)
//
// All three have parallel curvature, so the curvature operator commutes with
// parallel transport and the source terms of the momentum balance law vanish.

#include <cmath>
#include <string>

#include "smf/errors.hpp"
#include "smf/vec.hpp"

namespace smf::geometry {

enum class TargetKind { Sphere2, FlatTorus2, FubiniStudyCP1 };
enum class Representation { Embedded, Chart };

/// A point of the target.  Embedded targets use all three coordinates;
/// chart targets use (x, y) plus the active chart index (CP^1 only).
struct TargetPoint {
  Vec3 coords;
  int chart = 0;
};

/// A tangent vector attached to a base point, in the base's representation.
struct Tangent {
  Vec3 v;
  TargetPoint base;
};

namespace detail {
inline bool same_point(const Vec3& a, const Vec3& b, double tol = 1e-9) {
  return norm_inf(a - b) <= tol;
}
}  // namespace detail

class TargetGeometry {
 public:
  explicit TargetGeometry(TargetKind kind, double chart_switch_radius = 1.5)
      : kind_(kind), chart_switch_radius_(chart_switch_radius) {
    if (chart_switch_radius_ <= 0.0)
      throw ContractViolation("chart_switch_radius must be positive");
  }

  static TargetGeometry from_name(const std::string& name) {
    if (name == "sphere2") return TargetGeometry(TargetKind::Sphere2);
    if (name == "torus2") return TargetGeometry(TargetKind::FlatTorus2);
    if (name == "cp1") return TargetGeometry(TargetKind::FubiniStudyCP1);
    throw ConfigError("target", "unknown target '" + name + "'");
  }

  TargetKind kind() const { return kind_; }

  Representation representation() const {
    return kind_ == TargetKind::Sphere2 ? Representation::Embedded
                                        : Representation::Chart;
  }

  /// Number of live coordinates per point (3 embedded, 2 chart).
  int dim() const { return kind_ == TargetKind::Sphere2 ? 3 : 2; }

  double chart_switch_radius() const { return chart_switch_radius_; }
  /// Chart coordinates stay valid inside this disc; beyond it the point
  /// must be expressed in the other chart.
  double chart_validity_radius() const { return 2.0; }

  bool has_charts() const { return kind_ == TargetKind::FubiniStudyCP1; }

  // -- metric ---------------------------------------------------------------

  /// Conformal factor lambda^2 of the chart metric; 1 for embedded/torus.
  double metric_factor(const TargetPoint& p) const {
    if (kind_ != TargetKind::FubiniStudyCP1) return 1.0;
    const double r2 = p.coords.x * p.coords.x + p.coords.y * p.coords.y;
    const double lam = 2.0 / (1.0 + r2);
    return lam * lam;
  }

  double inner(const TargetPoint& p, const Tangent& X, const Tangent& Y) const {
    check_based_at(p, X, "inner: X");
    check_based_at(p, Y, "inner: Y");
    return inner_raw(p, X.v, Y.v);
  }

  /// Metric pairing of raw component vectors at p (no base-point checks);
  /// the workhorse for field-level loops.
  double inner_raw(const TargetPoint& p, const Vec3& a, const Vec3& b) const {
    return metric_factor(p) * dot(a, b);
  }

  double norm2(const TargetPoint& p, const Vec3& a) const {
    return inner_raw(p, a, a);
  }

  // -- complex structure ----------------------------------------------------

  Tangent apply_J(const TargetPoint& p, const Tangent& X) const {
    check_based_at(p, X, "apply_J");
    if (kind_ == TargetKind::Sphere2 && std::abs(dot(p.coords, X.v)) > 1e-8)
      throw ContractViolation("apply_J: input is not tangent to the sphere");
    return {apply_J_raw(p, X.v), p};
  }

  Vec3 apply_J_raw(const TargetPoint& p, const Vec3& v) const {
    if (kind_ == TargetKind::Sphere2) return cross(p.coords, v);
    return {-v.y, v.x, 0.0};  // multiplication by i in the chart
  }

  // -- curvature ------------------------------------------------------------

  /// Gauss curvature at p (constant on each shipped target).
  double gauss_curvature(const TargetPoint&) const {
    return kind_ == TargetKind::FlatTorus2 ? 0.0 : 1.0;
  }

  /// R(X,Y)Z for the constant-curvature surface: K (<Y,Z> X - <X,Z> Y).
  /// Satisfies R(X,Y)Z = nab_X nab_Y Z - nab_Y nab_X Z - nab_[X,Y] Z and
  /// gives sectional curvature +1 on the sphere targets.
  Tangent curvature_op(const TargetPoint& p, const Tangent& X, const Tangent& Y,
                       const Tangent& Z) const {
    check_based_at(p, X, "curvature_op: X");
    check_based_at(p, Y, "curvature_op: Y");
    check_based_at(p, Z, "curvature_op: Z");
    return {curvature_op_raw(p, X.v, Y.v, Z.v), p};
  }

  Vec3 curvature_op_raw(const TargetPoint& p, const Vec3& X, const Vec3& Y,
                        const Vec3& Z) const {
    const double K = gauss_curvature(p);
    if (K == 0.0) return {};
    return K * (inner_raw(p, Y, Z) * X - inner_raw(p, X, Z) * Y);
  }

  /// <R(X, JX) X, JX>; quartic in X, and equal to -K |X|^4 on a surface.
  double curvature_quartic(const TargetPoint& p, const Vec3& X) const {
    const Vec3 jx = apply_J_raw(p, X);
    return inner_raw(p, curvature_op_raw(p, X, jx, X), jx);
  }

  // -- connection -----------------------------------------------------------

  /// The correction term turning componentwise derivatives into covariant
  /// ones along a map: second fundamental form <V,W> p for the embedded
  /// sphere, Christoffel contraction Gamma(V,W) in charts.  Symmetric and
  /// bilinear in (V, W).
  Vec3 connection_correction(const TargetPoint& p, const Vec3& V,
                             const Vec3& W) const {
    switch (kind_) {
      case TargetKind::Sphere2:
        return dot(V, W) * p.coords;
      case TargetKind::FlatTorus2:
        return {};
      case TargetKind::FubiniStudyCP1: {
        // conformal metric e^{2s} |dz|^2, s = log lambda, ds_i = -2 v_i/(1+|v|^2)
        const double r2 = p.coords.x * p.coords.x + p.coords.y * p.coords.y;
        const double s1 = -2.0 * p.coords.x / (1.0 + r2);
        const double s2 = -2.0 * p.coords.y / (1.0 + r2);
        const double sym = V.x * W.y + V.y * W.x;
        return {s1 * V.x * W.x + s2 * sym - s1 * V.y * W.y,
                -s2 * V.x * W.x + s1 * sym + s2 * V.y * W.y, 0.0};
      }
    }
    return {};
  }

  // -- constraint projections -----------------------------------------------

  TargetPoint project_point(const Vec3& raw, int chart = 0) const {
    switch (kind_) {
      case TargetKind::Sphere2: {
        const double n = norm(raw);
        if (n < 1e-12) throw DegenerateInput("project_point: zero-norm input");
        return {raw * (1.0 / n), 0};
      }
      case TargetKind::FlatTorus2:
        return {{wrap01(raw.x), wrap01(raw.y), 0.0}, 0};
      case TargetKind::FubiniStudyCP1:
        return {{raw.x, raw.y, 0.0}, chart};
    }
    return {};
  }

  Tangent project_tangent(const TargetPoint& p, const Vec3& raw) const {
    if (kind_ == TargetKind::Sphere2)
      return {raw - dot(raw, p.coords) * p.coords, p};
    return {{raw.x, raw.y, 0.0}, p};
  }

  /// Point invariant check: |p| = 1 on the sphere, chart coordinates inside
  /// the validity disc on CP^1, [0,1) box on the torus.
  bool point_valid(const TargetPoint& p, double tol = 1e-10) const {
    if (!finite(p.coords)) return false;
    switch (kind_) {
      case TargetKind::Sphere2:
        return std::abs(norm(p.coords) - 1.0) <= tol;
      case TargetKind::FlatTorus2:
        return p.coords.x >= -tol && p.coords.x < 1.0 + tol &&
               p.coords.y >= -tol && p.coords.y < 1.0 + tol;
      case TargetKind::FubiniStudyCP1:
        return (p.chart == 0 || p.chart == 1) &&
               std::hypot(p.coords.x, p.coords.y) <= chart_validity_radius() + tol;
    }
    return false;
  }

  // -- CP^1 chart atlas -----------------------------------------------------

  /// Coordinates of p expressed in the other chart (w = 1/z, holomorphic).
  TargetPoint to_other_chart(const TargetPoint& p) const {
    require_charts("to_other_chart");
    const double r2 = p.coords.x * p.coords.x + p.coords.y * p.coords.y;
    if (r2 < 1e-24)
      throw RechartRequired("to_other_chart: point at the chart origin");
    return {{p.coords.x / r2, -p.coords.y / r2, 0.0}, 1 - p.chart};
  }

  /// Push a tangent vector at p into the other chart: multiply by the
  /// complex derivative of w = 1/z, i.e. -1/z^2.
  Vec3 tangent_to_other_chart(const TargetPoint& p, const Vec3& v) const {
    require_charts("tangent_to_other_chart");
    const double a = p.coords.x, b = p.coords.y;
    const double r2 = a * a + b * b;
    if (r2 < 1e-24)
      throw RechartRequired("tangent_to_other_chart: point at the chart origin");
    // -1/z^2 = -(conj z)^2 / |z|^4
    const double cr = -(a * a - b * b) / (r2 * r2);
    const double ci = (2.0 * a * b) / (r2 * r2);
    return {cr * v.x - ci * v.y, ci * v.x + cr * v.y, 0.0};
  }

  /// Express p in chart `chart`, transitioning if needed.
  TargetPoint in_chart(const TargetPoint& p, int chart) const {
    if (!has_charts() || p.chart == chart) return p;
    TargetPoint q = to_other_chart(p);
    if (std::hypot(q.coords.x, q.coords.y) > chart_validity_radius())
      throw RechartRequired("in_chart: point leaves the requested chart's disc");
    return q;
  }

  Vec3 tangent_in_chart(const TargetPoint& p, const Vec3& v, int chart) const {
    if (!has_charts() || p.chart == chart) return v;
    return tangent_to_other_chart(p, v);
  }

  /// Migrate a point to the other chart when it leaves the switch disc.
  TargetPoint migrate_if_needed(const TargetPoint& p) const {
    if (!has_charts()) return p;
    if (std::hypot(p.coords.x, p.coords.y) > chart_switch_radius_)
      return to_other_chart(p);
    return p;
  }

 private:
  static double wrap01(double x) {
    double y = x - std::floor(x);
    if (y >= 1.0) y -= 1.0;  // guard against floor rounding at the seam
    return y;
  }

  void require_charts(const char* who) const {
    if (!has_charts())
      throw ContractViolation(std::string(who) + ": target has a single chart");
  }

  void check_based_at(const TargetPoint& p, const Tangent& X, const char* who) const {
    if (!detail::same_point(p.coords, X.base.coords) || p.chart != X.base.chart)
      throw ContractViolation(std::string(who) +
                              ": tangent based at a different point");
  }

  TargetKind kind_;
  double chart_switch_radius_;
};

}  // namespace smf::geometry
