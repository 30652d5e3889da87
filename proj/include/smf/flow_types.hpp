#pragma once

#include <vector>

#include "smf/errors.hpp"
#include "smf/state.hpp"

namespace smf::flow {

enum class Scheme { ImplicitMidpoint, ProjectedRK4 };

struct SchemeConfig {
  Scheme scheme = Scheme::ImplicitMidpoint;
  double dt = 0.0;
  double fixed_point_tol = 1e-12;
  int max_fixed_point_iters = 100;
  double cfl_safety = 0.25;
  /// Lift the dt <= cfl_safety * spacing^2 gate (deliberate failure studies,
  /// or accepting a slower fixed-point solve).
  bool force_dt = false;
};

/// dt gate for the stiff dispersive semidiscretization: the fixed-point
/// solve of the midpoint step contracts comfortably below
/// cfl_safety * spacing^2.
inline void validate_dt(const SchemeConfig& cfg, const grid::PeriodicGrid& g) {
  if (cfg.dt <= 0.0) throw ConfigError("dt", "must be positive");
  const double h = g.spacing();
  if (!cfg.force_dt && cfg.dt > cfg.cfl_safety * h * h + 1e-18)
    throw ConfigError("dt", "dt exceeds cfl_safety * spacing^2; set force_dt to override");
}

/// Stored states at times 0, D, 2D, ... with D = diag_stride * dt.
struct Trajectory {
  std::vector<grid::MapState> states;
  double sample_dt = 0.0;  // uniform spacing between stored states
  SchemeConfig config;

  const grid::MapState& front() const { return states.front(); }
  const grid::MapState& back() const { return states.back(); }
  size_t size() const { return states.size(); }
};

}  // namespace smf::flow
