#include "nmopto/moments.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "nmopto/errors.hpp"
#include "nmopto/gaussian_ent.hpp"
#include "nmopto/output.hpp"

namespace nmopto {

using M = MomentState;

cplx MomentState::first(Op x) const {
  switch (x) {
    case Op::a: return v[a];
    case Op::ad: return v[ad];
    case Op::b: return v[b];
    case Op::bd: return v[bd];
  }
  return {};
}

cplx MomentState::pair(Op x, Op y) const {
  const int i = static_cast<int>(x), j = static_cast<int>(y);
  static constexpr int table[4][4] = {
      {aa, aad, ab, abd},
      {-1, adad, adb, adbd},
      {ab, adb, bb, bbd},
      {abd, adbd, -2, bdbd},
  };
  if (table[i][j] == -1) return v[aad] - 1.0;  // a'a
  if (table[i][j] == -2) return v[bbd] - 1.0;  // b'b
  return v[static_cast<std::size_t>(table[i][j])];
}

MomentState MomentState::vacuum() {
  MomentState m;
  m[aad] = 1.0;
  m[bbd] = 1.0;
  return m;
}

double MomentState::conjugation_error() const {
  double e = 0.0;
  e = std::max(e, std::abs(v[ad] - std::conj(v[a])));
  e = std::max(e, std::abs(v[bd] - std::conj(v[b])));
  e = std::max(e, std::abs(v[adad] - std::conj(v[aa])));
  e = std::max(e, std::abs(v[bdbd] - std::conj(v[bb])));
  e = std::max(e, std::abs(v[adbd] - std::conj(v[ab])));
  e = std::max(e, std::abs(v[adb] - std::conj(v[abd])));
  e = std::max(e, std::abs(v[aad].imag()));
  e = std::max(e, std::abs(v[bbd].imag()));
  return e;
}

CovarianceMatrix covariance_from_moments(const MomentState& m) {
  static const cplx u[4][4] = {
      {1.0, 1.0, 0.0, 0.0},
      {-kI, kI, 0.0, 0.0},
      {0.0, 0.0, 1.0, 1.0},
      {0.0, 0.0, -kI, kI},
  };
  constexpr Op ops[4] = {Op::a, Op::ad, Op::b, Op::bd};
  Eigen::Matrix4cd second = Eigen::Matrix4cd::Zero();
  Eigen::Vector4cd mean = Eigen::Vector4cd::Zero();
  for (int x = 0; x < 4; ++x)
    for (int c = 0; c < 4; ++c) {
      mean(x) += u[x][c] * m.first(ops[c]);
      for (int y = 0; y < 4; ++y)
        for (int d = 0; d < 4; ++d) second(x, y) += u[x][c] * u[y][d] * m.pair(ops[c], ops[d]);
    }
  CovarianceMatrix cv;
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 4; ++y)
      cv.V(x, y) = (0.5 * (second(x, y) + second(y, x)) - mean(x) * mean(y)).real();
  return cv;
}

MomentState moment_rhs(const MomentState& m, const std::array<cplx, 4>& F, const LinearizedSystem& sys) {
  const cplx iD = kI * sys.Delta, iw = kI * sys.omega_m, iG = kI * sys.G;
  const cplx F1 = F[0], F2 = F[1], F3 = F[2], F4 = F[3];
  const cplx c1 = std::conj(F1), c2 = std::conj(F2), c3 = std::conj(F3), c4 = std::conj(F4);

  const cplx a = m[M::a], ad = m[M::ad], b = m[M::b], bd = m[M::bd];
  const cplx aa = m[M::aa], aad = m[M::aad], ab = m[M::ab], abd = m[M::abd], adad = m[M::adad];
  const cplx adb = m[M::adb], adbd = m[M::adbd], bb = m[M::bb], bbd = m[M::bbd], bdbd = m[M::bdbd];

  // Sums over the O-operator basis O1..O4 = b, b', a, a'.
  const cplx sO = F1 * b + F2 * bd + F3 * a + F4 * ad;
  const cplx sOd = c1 * bd + c2 * b + c3 * ad + c4 * a;
  const cplx s_aO = F1 * ab + F2 * abd + F3 * aa + F4 * aad;
  const cplx s_Oda = c1 * abd + c2 * ab + c3 * (aad - 1.0) + c4 * aa;
  const cplx s_adO = F1 * adb + F2 * adbd + F3 * (aad - 1.0) + F4 * adad;
  const cplx s_Odad = c1 * adbd + c2 * adb + c3 * adad + c4 * aad;
  const cplx s_bO = F1 * bb + F2 * bbd + F3 * ab + F4 * adb;
  const cplx s_Odb = c1 * (bbd - 1.0) + c2 * bb + c3 * adb + c4 * ab;
  const cplx s_bdO = F1 * (bbd - 1.0) + F2 * bdbd + F3 * abd + F4 * adbd;
  const cplx s_Odbd = c1 * bdbd + c2 * bbd + c3 * adbd + c4 * abd;

  MomentState d;
  d[M::b] = -iw * b - iG * ad - iG * a - sO;
  d[M::bd] = iw * bd + iG * ad + iG * a - sOd;
  d[M::a] = iD * a - iG * bd - iG * b;
  d[M::ad] = -iD * ad + iG * bd + iG * b;
  d[M::aa] = 2.0 * iD * aa - 2.0 * iG * abd - 2.0 * iG * ab;
  d[M::aad] = iG * abd + iG * ab - iG * adbd - iG * adb;
  d[M::ab] = iD * ab - iw * ab - iG * (aad + bbd - 1.0) - iG * aa - iG * bb - s_aO;
  d[M::abd] = iD * abd + iw * abd - iG * bdbd - iG * (bbd - aad) + iG * aa - s_Oda;
  d[M::adad] = -2.0 * iD * adad + 2.0 * iG * adbd + 2.0 * iG * adb;
  d[M::adb] = -iD * adb - iw * adb - iG * adad - iG * (aad - bbd) + iG * bb - s_adO;
  d[M::adbd] = -iD * adbd + iw * adbd + iG * (aad + bbd - 1.0) + iG * adad + iG * bdbd - s_Odad;
  d[M::bb] = -2.0 * iw * bb - 2.0 * iG * adb - 2.0 * iG * ab - 2.0 * s_bO;
  d[M::bbd] = -iG * adbd - iG * abd + iG * adb + iG * ab - (s_Odb + s_bdO);
  d[M::bdbd] = 2.0 * iw * bdbd + 2.0 * iG * abd + 2.0 * iG * adbd - 2.0 * s_Odbd;
  return d;
}

namespace {

MomentState axpy(const MomentState& x, double s, const MomentState& y) {
  MomentState r;
  for (int i = 0; i < M::count; ++i) r[i] = x[i] + s * y[i];
  return r;
}

std::array<cplx, 4> coefficients_at(const OCoefficientSeries& F, std::size_t half) {
  return {F.at_half(0, half), F.at_half(1, half), F.at_half(2, half), F.at_half(3, half)};
}

}  // namespace

MomentTrajectory integrate_moments(const OCoefficientSeries& F, const LinearizedSystem& sys, const MomentState& init,
                                   const TimeGrid& grid) {
  if (!(F.grid == grid)) throw DomainError("moment grid does not match the coefficient grid");
  if (init.conjugation_error() > 1e-12) throw DomainError("initial moments violate the conjugation pairs");

  MomentTrajectory traj;
  traj.grid = grid;
  traj.states.reserve(grid.points());
  traj.states.push_back(init);
  const double h = grid.dt;
  auto monitor = [&](const MomentState& m, std::size_t k) {
    const double err = m.conjugation_error();
    double scale = 1.0;
    for (const auto& x : m.v) scale = std::max(scale, std::abs(x));
    if (!std::isfinite(err) || err > 1e-8 * scale)
      throw NumericError("moment integration lost the conjugation invariants at t = " + std::to_string(grid.t(k)));
    const double nu = min_symplectic_eigenvalue(covariance_from_moments(m).V);
    traj.min_symplectic = std::min(traj.min_symplectic, nu);
    if (nu < 1.0 - 1e-6) ++traj.physicality_warnings;
  };

  MomentState y = init;
  for (std::size_t k = 0; k < grid.steps; ++k) {
    const auto Fa = coefficients_at(F, 2 * k), Fm = coefficients_at(F, 2 * k + 1), Fb = coefficients_at(F, 2 * k + 2);
    const MomentState k1 = moment_rhs(y, Fa, sys);
    const MomentState k2 = moment_rhs(axpy(y, h / 2, k1), Fm, sys);
    const MomentState k3 = moment_rhs(axpy(y, h / 2, k2), Fm, sys);
    const MomentState k4 = moment_rhs(axpy(y, h, k3), Fb, sys);
    for (int i = 0; i < M::count; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    monitor(y, k + 1);
    traj.states.push_back(y);
  }
  return traj;
}

void write_moments_csv(std::ostream& out, const MomentTrajectory& traj) {
  std::vector<std::string> header{"t"};
  for (const char* n : MomentState::names) {
    header.push_back(std::string(n) + "_re");
    header.push_back(std::string(n) + "_im");
  }
  CsvWriter csv(out, header);
  std::vector<double> row(header.size());
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    row[0] = traj.grid.t(k);
    for (int i = 0; i < M::count; ++i) {
      row[1 + 2 * i] = traj.states[k][i].real();
      row[2 + 2 * i] = traj.states[k][i].imag();
    }
    csv.row(row);
  }
}

}  // namespace nmopto
