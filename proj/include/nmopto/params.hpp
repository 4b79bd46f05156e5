#pragma once

#include <vector>

#include "nmopto/grid.hpp"

namespace nmopto {

/// Driven optomechanical cavity before linearization. Frequencies in units of omega_m.
struct PhysicalParams {
  double omega_c = 0.0;      // cavity resonance
  double omega_m = 1.0;      // mechanical frequency
  double g = 0.0;            // single-photon coupling
  double omega_drive = 0.0;  // laser frequency
  double drive = 0.0;        // drive rate Omega_d
  double kappa_a = 0.0;      // classical cavity leakage

  double bare_detuning() const { return omega_drive - omega_c; }
};

/// Classical mean fields alpha (cavity) and beta (mirror).
struct MeanFieldSolution {
  cplx alpha;
  cplx beta;
  double residual = 0.0;
  int branch_count = 0;
  /// Every admissible |alpha|^2, ascending. `alpha` corresponds to the first.
  std::vector<double> intensities;
};

/// Quadratic model H = -Delta a'a + omega_m b'b + G (a + a')(b + b').
struct LinearizedSystem {
  double omega_m = 1.0;
  double Delta = 1.0;
  double G = 0.1;
};

/// Finds every non-negative root of the intensity cubic and returns the lowest branch.
MeanFieldSolution solve_mean_field(const PhysicalParams& p);

/// Mean field for a chosen intensity root |alpha|^2 = x.
MeanFieldSolution mean_field_at(const PhysicalParams& p, double x);

LinearizedSystem linearize(const PhysicalParams& p, const MeanFieldSolution& m);

/// Bare detuning omega - omega_c that produces the effective detuning Delta at coupling G.
double bare_detuning_for(double Delta, double G, double omega_m);

}  // namespace nmopto
