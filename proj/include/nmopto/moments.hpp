#pragma once

#include <Eigen/Dense>
#include <array>
#include <iosfwd>
#include <vector>

#include "nmopto/grid.hpp"
#include "nmopto/ocoeff.hpp"
#include "nmopto/params.hpp"

namespace nmopto {

/// Ladder operators in the order used by MomentState::pair.
enum class Op { a, ad, b, bd };

/// Means of the four ladder operators and the ten independent ordered pairs.
struct MomentState {
  enum Index : int { a, ad, b, bd, aa, aad, ab, abd, adad, adb, adbd, bb, bbd, bdbd, count };
  static constexpr const char* names[count] = {"a",    "ad",  "b",   "bd",   "aa",  "aad", "ab",
                                               "abd", "adad", "adb", "adbd", "bb",  "bbd", "bdbd"};

  std::array<cplx, count> v{};

  cplx& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
  cplx operator[](int i) const { return v[static_cast<std::size_t>(i)]; }

  /// <X Y> for any ordered pair, reordered with [a, a'] = [b, b'] = 1.
  cplx pair(Op x, Op y) const;
  cplx first(Op x) const;

  static MomentState vacuum();
  /// Largest violation of the Hermitian conjugation pairs and reality conditions.
  double conjugation_error() const;
};

/// Covariance matrix in the quadrature basis (q1, p1, q2, p2), vacuum = identity.
struct CovarianceMatrix {
  Eigen::Matrix4d V = Eigen::Matrix4d::Identity();

  Eigen::Matrix2d A() const { return V.topLeftCorner<2, 2>(); }
  Eigen::Matrix2d B() const { return V.bottomRightCorner<2, 2>(); }
  Eigen::Matrix2d C() const { return V.topRightCorner<2, 2>(); }
};

CovarianceMatrix covariance_from_moments(const MomentState& m);

struct MomentTrajectory {
  TimeGrid grid;
  std::vector<MomentState> states;
  /// Smallest symplectic eigenvalue of V seen along the run, and how many grid points fell
  /// below 1 - 1e-6 (the approximate master equation need not stay completely positive).
  double min_symplectic = 1.0;
  std::size_t physicality_warnings = 0;
};

/// Time derivative of every mean for coefficient values F1..F4.
MomentState moment_rhs(const MomentState& m, const std::array<cplx, 4>& F, const LinearizedSystem& sys);

/// Fourth-order integration of the mean-value equations on the grid of `F`.
MomentTrajectory integrate_moments(const OCoefficientSeries& F, const LinearizedSystem& sys, const MomentState& init,
                                   const TimeGrid& grid);

/// CSV with columns t followed by re/im of every mean (28 columns).
void write_moments_csv(std::ostream& out, const MomentTrajectory& traj);

}  // namespace nmopto
