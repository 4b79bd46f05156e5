#pragma once

#include <Eigen/Dense>

#include "nmopto/moments.hpp"

namespace nmopto {

/// Block-diagonal symplectic form with J = [[0, 1], [-1, 0]] per mode.
Eigen::Matrix4d symplectic_form();

struct EntanglementResult {
  double nu_minus = 1.0;
  double En = 0.0;
  double Sigma = 2.0;
};

/// Logarithmic negativity from Sigma = det A + det B - 2 det C.
/// Throws NumericError when V is unphysical beyond rounding.
EntanglementResult log_negativity(const Eigen::Matrix4d& V);
inline EntanglementResult log_negativity(const CovarianceMatrix& c) { return log_negativity(c.V); }

/// Smallest modulus among the eigenvalues of i M V.
double min_symplectic_eigenvalue(const Eigen::Matrix4d& V);

}  // namespace nmopto
