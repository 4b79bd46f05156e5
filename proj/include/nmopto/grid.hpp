#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace nmopto {

using cplx = std::complex<double>;
inline constexpr cplx kI{0.0, 1.0};

/// Uniform time grid t_k = k * dt, k = 0..steps (all times in units of 1/omega_m).
struct TimeGrid {
  double dt = 0.01;
  std::size_t steps = 0;

  double t(std::size_t k) const { return static_cast<double>(k) * dt; }
  double t_final() const { return t(steps); }
  std::size_t points() const { return steps + 1; }
  /// Index of the grid point nearest to time t (clamped to the grid).
  std::size_t index_of(double time) const;

  /// Grid covering [0, t_final]; t_final is rounded to a whole number of steps.
  static TimeGrid covering(double dt, double t_final);

  bool operator==(const TimeGrid&) const = default;
};

/// The grid with half the spacing: point 2k coincides with point k of `g`.
TimeGrid half_grid(const TimeGrid& g);

// Quadrature weights (already multiplied by h) for n equally spaced nodes.
// n >= 6 uses the fourth-order Gregory end corrections; fewer nodes fall back to
// closed Newton-Cotes rules of at least the same order.
std::vector<double> uniform_weights(std::size_t n, double h);

/// Sum in fixed pairwise order; the result does not depend on thread scheduling.
cplx pairwise_sum(std::span<const cplx> v);
double pairwise_sum(std::span<const double> v);

/// Kernel-weighted quadrature over s in [0, tau] with tau = t_k + (c2 / 2) h, c2 in {0, 1, 2}.
/// Nodes are s_0..s_k plus tau itself; the sliver [t_k, tau] uses the quadratic through
/// (t_{k-1}, t_k, tau). lag_table[m] must hold alpha at lag m * h / 2.
struct VolterraWeights {
  std::vector<cplx> wa;  // weights of s_0..s_k
  cplx wb;               // weight of the node s = tau

  void build(const std::vector<cplx>& lag_table, std::size_t k, int c2, double h);
  cplx dot(const cplx* v) const;
};

// Four-point Lagrange value at the midpoint between v[1] and v[2].
inline cplx midpoint_interp(cplx v0, cplx v1, cplx v2, cplx v3) {
  return (-v0 + 9.0 * v1 + 9.0 * v2 - v3) / 16.0;
}

/// Fills the odd entries of a half-grid series from its even entries by cubic interpolation
/// (one-sided at the ends).
void fill_midpoints(std::vector<cplx>& v);

}  // namespace nmopto
