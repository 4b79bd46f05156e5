#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <vector>

#include "nmopto/fock.hpp"
#include "nmopto/grid.hpp"
#include "nmopto/kernel.hpp"
#include "nmopto/params.hpp"

namespace nmopto {

/// Bose-Einstein occupation 1 / (exp(omega / T) - 1); zero at T = 0.
double thermal_occupation(double omega, double T);

/// System operator coupled to the bath: L = ca a + cb b.
struct BathCoupling {
  double ca = 1.0;
  double cb = 1.0;
};

enum class ThermalKernelMethod {
  quadrature,  // integrate J(omega) (nbar + 1) and J(omega) nbar over omega > omega_ir, tabulated
  narrowband,  // nbar evaluated at the bath centre frequency, both kernels stay exponential
};

struct ThermalBathSpec {
  double temperature = 0.0;
  OUKernel base;             // Lorentzian J(omega) of the physical bath
  double omega_ir = 0.1;     // thermal occupation is only counted above this frequency
  BathCoupling coupling;
  ThermalKernelMethod method = ThermalKernelMethod::quadrature;
};

struct ExponentialFit {
  OUKernel kernel;
  double max_residual = 0.0;  // relative to |alpha(0)|
};

struct EffectiveKernels {
  KernelSpec alpha1;  // absorbs into the bath (z noise)
  KernelSpec alpha2;  // emission out of thermal excitations (w noise)
};

/// alpha1(tau) = int J (nbar + 1) exp(-i omega tau), alpha2(tau) = int J nbar exp(+i omega tau).
/// Quadrature results are tabulated on lags m * dlag, m = 0..count-1. At T = 0 both methods
/// return the base kernel and a zero-strength alpha2 exactly.
EffectiveKernels effective_kernels(const ThermalBathSpec& bath, double dlag, std::size_t count);

/// Least-squares single exponential alpha(0) exp(-(gamma + i Omega) tau) on lags [0, window].
/// Throws NumericError when the relative residual exceeds `max_residual`.
ExponentialFit fit_exponential(const KernelSpec& k, double window, double max_residual = 0.05);

/// X_ij(t) = int alpha_i(t, s) x_ij(t, s) ds, coefficients of (a, a', b, b') in Obar_1, Obar_2.
struct ThermalOCoefficients {
  TimeGrid grid;
  std::array<std::array<std::vector<cplx>, 4>, 2> X;  // half grid
  CoefficientSolver provenance = CoefficientSolver::closed_ou;

  cplx at(int i, int j, std::size_t k) const { return X[i][j][2 * k]; }
  cplx at_half(int i, int j, std::size_t h) const { return X[i][j][h]; }
};

/// Noise-free x_ij system with boundary rows O1(t, t) = L, O2(t, t) = L'. Closed ODE when both
/// kernels are exponential, two-time grid otherwise (forced with `force_grid`).
ThermalOCoefficients solve_thermal_ocoeff(const EffectiveKernels& kernels, const BathCoupling& L,
                                          const LinearizedSystem& sys, const TimeGrid& grid,
                                          bool force_grid = false);

/// Right-hand side of one x row (x1..x4 = coefficients of a, a', b, b') for the current X.
std::array<cplx, 4> thermal_row_rhs(const std::array<cplx, 4>& x, const std::array<std::array<cplx, 4>, 2>& X,
                                    const BathCoupling& L, const LinearizedSystem& sys);

/// drho/dt = -i[H, rho] + [L, rho Obar1'] - [L', Obar1 rho] + [L', rho Obar2'] - [L, Obar2 rho].
Eigen::MatrixXcd integrate_thermal_master(const ThermalOCoefficients& X, const BathCoupling& L,
                                          const FockOperators& ops, const LinearizedSystem& sys,
                                          const Eigen::MatrixXcd& rho0, const TimeGrid& grid,
                                          const RhoObserver& observer = {}, const MasterOptions& options = {});

}  // namespace nmopto
