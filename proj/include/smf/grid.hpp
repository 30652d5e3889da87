#pragma once

// Periodic discrete calculus on the unit circle [0,1): Fourier (or 4th-order
// finite-difference) differentiation, rectangle-rule quadrature, and the
// averaged double-integral kernel K(x) = int_0^1 dy int_y^x f(z) dz used by
// the periodic div-curl verification.

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "smf/errors.hpp"
#include "smf/fft.hpp"

namespace smf::grid {

enum class DiffScheme { Spectral, Fd4 };

/// Uniform periodic grid on [0,1): nodes x_j = j / n_points.
struct PeriodicGrid {
  int n_points = 0;
  DiffScheme scheme = DiffScheme::Spectral;

  PeriodicGrid() = default;
  explicit PeriodicGrid(int n, DiffScheme s = DiffScheme::Spectral)
      : n_points(n), scheme(s) {
    if (n < 8 || n % 2 != 0)
      throw ContractViolation("PeriodicGrid: n_points must be even and >= 8");
  }

  double spacing() const { return 1.0 / n_points; }
  double node(int j) const { return static_cast<double>(j) / n_points; }
  bool operator==(const PeriodicGrid& o) const {
    return n_points == o.n_points && scheme == o.scheme;
  }
};

struct ScalarField {
  PeriodicGrid grid;
  std::vector<double> v;

  ScalarField() = default;
  explicit ScalarField(const PeriodicGrid& g, double fill = 0.0)
      : grid(g), v(static_cast<size_t>(g.n_points), fill) {}

  double& operator[](size_t j) { return v[j]; }
  double operator[](size_t j) const { return v[j]; }
  size_t size() const { return v.size(); }
};

namespace detail {

constexpr double two_pi = 2.0 * std::numbers::pi;

/// Reusable per-thread spectrum buffer for the span-level transforms.
inline std::vector<std::complex<double>>& spectrum_scratch(size_t need) {
  thread_local std::vector<std::complex<double>> buf;
  if (buf.size() < need) buf.resize(need);
  return buf;
}

/// d/dx by Fourier multiplier 2*pi*i*k; the Nyquist coefficient is zeroed
/// (it carries no usable derivative information on an even grid).
inline void spectral_derivative_span(std::span<const double> in,
                                     std::span<double> out) {
  const int n = static_cast<int>(in.size());
  auto& fft = fft_for(n);
  auto& c = spectrum_scratch(fft.spectrum_size());
  fft.forward(in, c.data());
  for (int k = 0; k < n / 2; ++k) c[k] *= std::complex<double>(0.0, two_pi * k);
  c[n / 2] = 0.0;
  fft.inverse(c.data(), out);
}

inline void fd4_derivative_span(std::span<const double> in, std::span<double> out) {
  const int n = static_cast<int>(in.size());
  const double inv12h = n / 12.0;
  for (int j = 0; j < n; ++j) {
    const double m2 = in[(j + n - 2) % n], m1 = in[(j + n - 1) % n];
    const double p1 = in[(j + 1) % n], p2 = in[(j + 2) % n];
    out[j] = (m2 - 8.0 * m1 + 8.0 * p1 - p2) * inv12h;
  }
}

inline void derivative_span(std::span<const double> in, std::span<double> out,
                            DiffScheme scheme) {
  if (scheme == DiffScheme::Fd4)
    fd4_derivative_span(in, out);
  else
    spectral_derivative_span(in, out);
}

inline double mean_span(std::span<const double> in) {
  double s = 0.0;
  for (double x : in) s += x;
  return s / static_cast<double>(in.size());
}

/// Periodic antiderivative of the mean-free part of `in` (zero-mean output).
inline void spectral_antiderivative_span(std::span<const double> in,
                                         std::span<double> out) {
  const int n = static_cast<int>(in.size());
  auto& fft = fft_for(n);
  auto& c = spectrum_scratch(fft.spectrum_size());
  fft.forward(in, c.data());
  c[0] = 0.0;
  for (int k = 1; k < n / 2; ++k) c[k] /= std::complex<double>(0.0, two_pi * k);
  c[n / 2] = 0.0;
  fft.inverse(c.data(), out);
}

/// Zero the Nyquist coefficient in place.
inline void strip_nyquist_span(std::span<double> f) {
  const int n = static_cast<int>(f.size());
  auto& fft = fft_for(n);
  auto& c = spectrum_scratch(fft.spectrum_size());
  fft.forward(f, c.data());
  c[n / 2] = 0.0;
  fft.inverse(c.data(), f);
}

/// Magnitude of the Nyquist mode of f.
inline double nyquist_amplitude_span(std::span<const double> f) {
  const int n = static_cast<int>(f.size());
  // the Nyquist coefficient of a real signal is sum_j (-1)^j f_j / n
  double s = 0.0;
  double sign = 1.0;
  for (int j = 0; j < n; ++j, sign = -sign) s += sign * f[j];
  return std::abs(s) / n;
}

}  // namespace detail

inline ScalarField spectral_derivative(const ScalarField& f) {
  for (double x : f.v)
    if (!std::isfinite(x))
      throw ContractViolation("spectral_derivative: non-finite input");
  ScalarField out(f.grid);
  detail::derivative_span(f.v, out.v, f.grid.scheme);
  return out;
}

/// Rectangle rule = mean * period; spectrally accurate for smooth periodic
/// integrands on the uniform grid.
inline double integrate_periodic(const ScalarField& f) {
  return detail::mean_span(f.v);
}

inline double integrate_periodic(std::span<const double> f) {
  return detail::mean_span(f);
}

/// K(x) = int_0^1 dy int_y^x f(z) dz = F(x) - int_0^1 F, with F an
/// antiderivative of f.  For mean-free f this is the periodic spectral
/// antiderivative; a nonzero mean adds the ramp mean * (x - 1/2).
inline ScalarField double_integral_kernel(const ScalarField& f) {
  ScalarField out(f.grid);
  detail::spectral_antiderivative_span(f.v, out.v);
  const double mean = detail::mean_span(f.v);
  if (mean != 0.0) {
    const int n = f.grid.n_points;
    for (int j = 0; j < n; ++j) out.v[j] += mean * (f.grid.node(j) - 0.5);
  }
  return out;
}

/// L2 norm over the circle, sqrt(int f^2).
inline double l2_norm(const ScalarField& f) {
  double s = 0.0;
  for (double x : f.v) s += x * x;
  return std::sqrt(s / f.v.size());
}

inline double l1_norm(std::span<const double> f) {
  double s = 0.0;
  for (double x : f) s += std::abs(x);
  return s / static_cast<double>(f.size());
}

}  // namespace smf::grid
