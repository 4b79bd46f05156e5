#pragma once

#include <Eigen/Dense>
#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

#include "nmopto/grid.hpp"
#include "nmopto/kernel.hpp"
#include "nmopto/params.hpp"

namespace nmopto {

namespace coef {
enum : int { F1 = 0, F2, F3, F4, F5 };
}

enum class CoefficientSolver { markov, closed_ou, two_time_grid };

/// Noise-free O-operator weights: Obar(t) = F1 b + F2 b' + F3 a + F4 a'. F5 is the
/// noise-term weight, kept for diagnostics only.
///
/// Values are stored on the half grid t = i * dt / 2 so RK4 consumers stepping on `grid`
/// read their stage values without interpolation.
struct OCoefficientSeries {
  TimeGrid grid;
  std::array<std::vector<cplx>, 5> F;
  bool has_f5 = false;
  CoefficientSolver provenance = CoefficientSolver::closed_ou;

  /// F_{j+1} at grid point k.
  cplx at(int j, std::size_t k) const { return F[static_cast<std::size_t>(j)][2 * k]; }
  /// F_{j+1} at half-grid index i (time i * dt / 2).
  cplx at_half(int j, std::size_t i) const { return F[static_cast<std::size_t>(j)][i]; }
  std::size_t half_points() const { return 2 * grid.steps + 1; }
};

/// Two-time fields f_j(t_k, s_l) for s_l <= t_k, recorded by the grid solver.
struct TwoTimeField {
  TimeGrid grid;
  std::array<std::vector<cplx>, 4> f;  // row k starts at offset(k)
  std::vector<cplx> F5p;               // F5'(t_k, s'_l); empty without f5
  Eigen::MatrixXcd slab;               // f5(t_N, s, s') at the final time; empty without f5

  static std::size_t offset(std::size_t k) { return k * (k + 1) / 2; }
  cplx value(int j, std::size_t k, std::size_t l) const { return f[static_cast<std::size_t>(j)][offset(k) + l]; }
  cplx f5_prime(std::size_t k, std::size_t l) const { return F5p[offset(k) + l]; }
};

struct GridSolverOptions {
  bool include_f5 = true;
  bool capture_fields = false;
  std::size_t max_slab_bytes = std::size_t{3} << 30;
};

struct GridSolution {
  OCoefficientSeries series;
  std::optional<TwoTimeField> fields;
};

/// Constant Markov coefficients F1 = Gamma/2, F2..F5 = 0.
OCoefficientSeries markov_series(double Gamma, const TimeGrid& grid);

/// Marches f_j(t, s) on the triangular two-time grid for any kernel with pointwise values
/// (the Markov kernel is handled through its boundary convention). Fourth-order stepping
/// and quadrature; midpoint values of the series are cubic interpolants.
GridSolution solve_two_time_grid(const KernelSpec& k, const LinearizedSystem& sys, const TimeGrid& grid,
                                 const GridSolverOptions& options = {});

/// Closed five-dimensional ODE for exponential kernels. With include_f5 = false the F5
/// feedback into F2 is dropped as well (pure zeroth order).
OCoefficientSeries solve_ou_closed(const OUKernel& k, const LinearizedSystem& sys, const TimeGrid& grid,
                                   bool include_f5 = true);

/// Markov constants, closed ODE for OU, two-time grid for tabulated kernels.
OCoefficientSeries solve_coefficients(const KernelSpec& k, const LinearizedSystem& sys, const TimeGrid& grid,
                                      bool include_f5 = true);

/// Max-norm residual of the coefficient equations re-checked at interior midpoints
/// (fourth-order interpolation in t along each s row). `fields` may be null for Markov.
double consistency_residual(const OCoefficientSeries& series, const TwoTimeField* fields, const KernelSpec& k,
                            const LinearizedSystem& sys);

/// CSV columns t, F1_re, F1_im, ..., F5_re, F5_im on the grid points.
void write_series_csv(std::ostream& out, const OCoefficientSeries& series);

}  // namespace nmopto
