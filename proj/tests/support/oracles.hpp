#pragma once

// Independent reference computations used by the unit and acceptance tests. None of these
// reuse the library's own solvers.

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace oracle {

// Quadratures q = a + a', p = -i(a - a'); vacuum covariance = identity.
inline Eigen::MatrixXd symplectic(int modes) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * modes, 2 * modes);
  for (int m = 0; m < modes; ++m) {
    J(2 * m, 2 * m + 1) = 1.0;
    J(2 * m + 1, 2 * m) = -1.0;
  }
  return J;
}

// Symplectic eigenvalues of a 2n x 2n covariance matrix from the spectrum of i J V.
inline Eigen::VectorXd symplectic_spectrum(const Eigen::MatrixXd& V) {
  const Eigen::MatrixXcd M = std::complex<double>(0, 1) * (symplectic(static_cast<int>(V.rows() / 2)) * V);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M);
  Eigen::VectorXd ev = es.eigenvalues().cwiseAbs();
  std::sort(ev.data(), ev.data() + ev.size());
  return ev;
}

// Logarithmic negativity through the partial transpose p2 -> -p2.
inline double pt_log_negativity(const Eigen::Matrix4d& V) {
  Eigen::Matrix4d P = Eigen::Matrix4d::Identity();
  P(3, 3) = -1.0;
  const double nu = symplectic_spectrum(P * V * P)(0);
  return std::max(0.0, -std::log(nu));
}

// Random symplectic matrix: product of random single-mode squeezers, rotations and
// two-mode beam splitters.
inline Eigen::Matrix4d random_symplectic(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ang(0.0, 2 * M_PI), sq(-0.8, 0.8);
  auto rot = [&](int m) {
    const double t = ang(rng);
    Eigen::Matrix4d R = Eigen::Matrix4d::Identity();
    R(2 * m, 2 * m) = std::cos(t);
    R(2 * m, 2 * m + 1) = std::sin(t);
    R(2 * m + 1, 2 * m) = -std::sin(t);
    R(2 * m + 1, 2 * m + 1) = std::cos(t);
    return R;
  };
  auto squeeze = [&](int m) {
    const double r = sq(rng);
    Eigen::Matrix4d S = Eigen::Matrix4d::Identity();
    S(2 * m, 2 * m) = std::exp(-r);
    S(2 * m + 1, 2 * m + 1) = std::exp(r);
    return S;
  };
  auto splitter = [&] {
    const double t = ang(rng);
    Eigen::Matrix4d B = Eigen::Matrix4d::Zero();
    const double c = std::cos(t), s = std::sin(t);
    for (int k = 0; k < 2; ++k) {
      B(k, k) = c;
      B(k, 2 + k) = s;
      B(2 + k, k) = -s;
      B(2 + k, 2 + k) = c;
    }
    return B;
  };
  Eigen::Matrix4d S = Eigen::Matrix4d::Identity();
  for (int i = 0; i < 3; ++i) S = rot(0) * rot(1) * squeeze(0) * squeeze(1) * splitter() * S;
  return S;
}

// Local (block-diagonal) random symplectic.
inline Eigen::Matrix4d random_local_symplectic(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  auto block = [&] {
    Eigen::Matrix2d M;
    M << std::exp(u(rng)), u(rng), 0.0, 0.0;
    M(1, 1) = 1.0 / M(0, 0);  // upper triangular with det 1
    const double t = 4 * u(rng);
    Eigen::Matrix2d R;
    R << std::cos(t), std::sin(t), -std::sin(t), std::cos(t);
    return Eigen::Matrix2d(R * M);
  };
  Eigen::Matrix4d S = Eigen::Matrix4d::Zero();
  S.topLeftCorner<2, 2>() = block();
  S.bottomRightCorner<2, 2>() = block();
  return S;
}

// Exact zero-temperature dynamics for an exponential bath (Gamma gamma / 2) e^{-(gamma + i Omega) tau}
// coupled through b: the bath is replaced by one pseudomode c of frequency Omega, coupling
// sqrt(Gamma gamma / 2) to b and amplitude damping gamma into a white vacuum. Modes (a, b, c),
// quadrature covariance dV/dt = A V + V A' + D, integrated with RK4. Returns the (a, b) block.
struct PseudomodeModel {
  double omega_m = 1.0, Delta = 1.0, G = 0.1;
  double Gamma = 2.0, gamma = 0.6, Omega = 0.0;

  Eigen::MatrixXd drift() const {
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(6, 6);  // H = x' K x / 4
    K(0, 0) = K(1, 1) = -Delta;
    K(2, 2) = K(3, 3) = omega_m;
    K(4, 4) = K(5, 5) = Omega;
    K(0, 2) = K(2, 0) = 2 * G;
    const double g = std::sqrt(0.5 * Gamma * gamma);
    K(2, 4) = K(4, 2) = g;
    K(3, 5) = K(5, 3) = g;
    Eigen::MatrixXd A = symplectic(3) * K;
    A(4, 4) -= gamma;
    A(5, 5) -= gamma;
    return A;
  }

  Eigen::Matrix4d evolve(double t, double dt) const {
    const Eigen::MatrixXd A = drift();
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(6, 6);
    D(4, 4) = D(5, 5) = 2 * gamma;
    auto f = [&](const Eigen::MatrixXd& V) -> Eigen::MatrixXd { return A * V + V * A.transpose() + D; };
    Eigen::MatrixXd V = Eigen::MatrixXd::Identity(6, 6);
    const auto n = static_cast<long>(std::llround(t / dt));
    for (long i = 0; i < n; ++i) {
      const Eigen::MatrixXd k1 = f(V), k2 = f(V + 0.5 * dt * k1), k3 = f(V + 0.5 * dt * k2), k4 = f(V + dt * k3);
      V += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return V.topLeftCorner<4, 4>();
  }
};

// Dense two-mode ladder operators, basis index n_a * nb + n_b.
struct DenseModes {
  int na, nb;
  Eigen::MatrixXcd a, ad, b, bd, id;
  DenseModes(int na_, int nb_) : na(na_), nb(nb_) {
    auto lower = [](int n) {
      Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
      for (int k = 1; k < n; ++k) m(k - 1, k) = std::sqrt(static_cast<double>(k));
      return m;
    };
    auto kron = [](const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) {
      Eigen::MatrixXcd out(x.rows() * y.rows(), x.cols() * y.cols());
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) out.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
      return out;
    };
    const Eigen::MatrixXcd ia = Eigen::MatrixXcd::Identity(na, na), ib = Eigen::MatrixXcd::Identity(nb, nb);
    a = kron(lower(na), ib);
    b = kron(ia, lower(nb));
    ad = a.adjoint();
    bd = b.adjoint();
    id = Eigen::MatrixXcd::Identity(na * nb, na * nb);
  }
  Eigen::MatrixXcd hamiltonian(double omega_m, double Delta, double G) const {
    return -Delta * ad * a + omega_m * bd * b + G * (a + ad) * (b + bd);
  }
};

// Random density matrix supported on n_a, n_b < support.
inline Eigen::MatrixXcd random_low_state(const DenseModes& m, int support, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  const int d = m.na * m.nb;
  Eigen::MatrixXcd X = Eigen::MatrixXcd::Zero(d, d);
  for (int i = 0; i < m.na; ++i)
    for (int j = 0; j < m.nb; ++j) {
      if (i >= support || j >= support) continue;
      for (int c = 0; c < 3; ++c) X(i * m.nb + j, c) = std::complex<double>(n(rng), n(rng));
    }
  Eigen::MatrixXcd rho = X * X.adjoint();
  return rho / rho.trace();
}

}  // namespace oracle
