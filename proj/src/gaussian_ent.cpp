#include "nmopto/gaussian_ent.hpp"

#include <cmath>
#include <string>

#include "nmopto/errors.hpp"

namespace nmopto {

Eigen::Matrix4d symplectic_form() {
  Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
  M(0, 1) = M(2, 3) = 1.0;
  M(1, 0) = M(3, 2) = -1.0;
  return M;
}

EntanglementResult log_negativity(const Eigen::Matrix4d& V) {
  if (!V.allFinite()) throw NumericError("covariance matrix has non-finite entries");
  const double detA = V.topLeftCorner<2, 2>().determinant();
  const double detB = V.bottomRightCorner<2, 2>().determinant();
  const double detC = V.topRightCorner<2, 2>().determinant();
  const double detV = V.determinant();
  if (!(detV > 0.0)) throw NumericError("covariance matrix is not positive definite (det V = " + std::to_string(detV) + ")");

  EntanglementResult r;
  r.Sigma = detA + detB - 2.0 * detC;
  const double tol = 1e-10 * std::max(1.0, r.Sigma * r.Sigma);
  double disc = r.Sigma * r.Sigma - 4.0 * detV;
  if (disc < -tol) throw NumericError("unphysical covariance matrix: Sigma^2 < 4 det V");
  disc = std::max(disc, 0.0);
  double inner = 0.5 * (r.Sigma - std::sqrt(disc));
  if (inner < -tol) throw NumericError("unphysical covariance matrix: negative symplectic radicand");
  // The smaller root loses digits by cancellation; det V = nu_-^2 nu_+^2 gives it stably.
  const double outer = 0.5 * (r.Sigma + std::sqrt(disc));
  if (outer > 0.0 && r.Sigma > 0.0) inner = detV / outer;
  r.nu_minus = std::sqrt(std::max(inner, 0.0));
  r.En = r.nu_minus < 1.0 ? -std::log(r.nu_minus) : 0.0;
  return r;
}

double min_symplectic_eigenvalue(const Eigen::Matrix4d& V) {
  if (!V.allFinite()) throw NumericError("covariance matrix has non-finite entries");
  const Eigen::Matrix4cd X = cplx{0.0, 1.0} * (symplectic_form() * V).cast<cplx>();
  const Eigen::ComplexEigenSolver<Eigen::Matrix4cd> es(X, false);
  return es.eigenvalues().cwiseAbs().minCoeff();
}

}  // namespace nmopto
