#include "nmopto/thermal.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <string>

#include "nmopto/errors.hpp"

namespace nmopto {

double thermal_occupation(double omega, double T) {
  if (!(omega > 0.0)) throw DomainError("thermal occupation needs a positive frequency");
  if (!(T >= 0.0)) throw DomainError("temperature must be non-negative");
  if (T == 0.0) return 0.0;
  return 1.0 / std::expm1(omega / T);
}

// ---------------------------------------------------------------- effective kernels

namespace {

struct Node {
  double omega, weight;
};

template <unsigned Order>
void gauss_panel(double a, double b, std::vector<Node>& out) {
  using Rule = boost::math::quadrature::gauss<double, Order>;
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  const auto& x = Rule::abscissa();
  const auto& w = Rule::weights();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) {
      out.push_back({mid, half * w[i]});
      continue;
    }
    out.push_back({mid - half * x[i], half * w[i]});
    out.push_back({mid + half * x[i], half * w[i]});
  }
}

// Panels over [omega_ir, omega_max]: geometric near the infrared edge where nbar ~ T / omega,
// then uniform panels short enough to resolve exp(-i omega tau_max).
template <unsigned Order>
std::vector<Node> thermal_nodes(const ThermalBathSpec& bath, double tau_max) {
  const double T = bath.temperature;
  const double lo = bath.omega_ir;
  const double hi = std::max(lo * 2, std::abs(bath.base.Omega) + 40.0 * T + 40.0 * bath.base.gamma + 10.0);
  const double width = std::min(0.5, 8.0 / std::max(tau_max, 1.0));
  std::vector<double> edges{lo};
  while (edges.back() < 1.0 && edges.back() < hi) edges.push_back(std::min({edges.back() * 2, edges.back() + width, hi}));
  while (edges.back() < hi) edges.push_back(std::min(edges.back() + width, hi));

  std::vector<Node> nodes;
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) gauss_panel<Order>(edges[p], edges[p + 1], nodes);
  for (auto& n : nodes) n.weight *= spectral_density(bath.base, n.omega) * thermal_occupation(n.omega, T);
  return nodes;
}

// S(tau_m) = sum_n w_n exp(-i omega_n tau_m) for tau_m = m * dlag.
std::vector<cplx> thermal_sum(const std::vector<Node>& nodes, double dlag, std::size_t count) {
  std::vector<cplx> S(count, cplx{});
  for (const auto& n : nodes) {
    const cplx step = std::polar(1.0, -n.omega * dlag);
    cplx phase = 1.0;
    for (std::size_t m = 0; m < count; ++m) {
      if (m % 256 == 0) phase = std::polar(1.0, -n.omega * dlag * static_cast<double>(m));
      S[m] += n.weight * phase;
      phase *= step;
    }
  }
  return S;
}

}  // namespace

EffectiveKernels effective_kernels(const ThermalBathSpec& bath, double dlag, std::size_t count) {
  if (!(bath.temperature >= 0.0)) throw DomainError("temperature must be non-negative");
  if (!(bath.base.gamma > 0.0)) throw DomainError("bath spectral density needs gamma > 0");
  EffectiveKernels out;
  if (bath.temperature == 0.0) {
    out.alpha1 = bath.base;
    out.alpha2 = OUKernel{0.0, bath.base.gamma, -bath.base.Omega};
    return out;
  }
  if (bath.method == ThermalKernelMethod::narrowband) {
    const double n = thermal_occupation(bath.base.Omega, bath.temperature);
    out.alpha1 = OUKernel{bath.base.Gamma * (n + 1.0), bath.base.gamma, bath.base.Omega};
    out.alpha2 = OUKernel{bath.base.Gamma * n, bath.base.gamma, -bath.base.Omega};
    return out;
  }
  if (!(bath.omega_ir > 0.0)) throw DomainError("infrared cutoff must be positive");
  if (!(dlag > 0.0) || count < 2) throw DomainError("kernel tabulation needs dlag > 0 and at least two lags");

  const double tau_max = dlag * static_cast<double>(count - 1);
  const auto S = thermal_sum(thermal_nodes<20>(bath, tau_max), dlag, count);
  // A higher-order rule on the same panels must agree, otherwise the panels are too coarse.
  const std::vector<cplx> probe = thermal_sum(thermal_nodes<30>(bath, tau_max), tau_max, 2);
  const double scale = std::max(std::abs(S[0]), 1e-300);
  const double err = std::max(std::abs(probe[0] - S[0]), std::abs(probe[1] - S[count - 1]));
  if (err > 1e-8 * scale + 1e-14)
    throw NumericError("thermal kernel quadrature did not converge (difference " + std::to_string(err) + ")");

  TabulatedKernel a1{dlag, std::vector<cplx>(count)}, a2{dlag, std::vector<cplx>(count)};
  for (std::size_t m = 0; m < count; ++m) {
    a1.values[m] = bath.base.at_lag(dlag * static_cast<double>(m)) + S[m];
    a2.values[m] = std::conj(S[m]);
  }
  out.alpha1 = std::move(a1);
  out.alpha2 = std::move(a2);
  return out;
}

ExponentialFit fit_exponential(const KernelSpec& k, double window, double max_residual) {
  if (!(window > 0.0)) throw DomainError("fit window must be positive");
  if (is_markov(k)) throw DomainError("cannot fit an exponential to the Markov kernel");
  constexpr int samples = 200;
  std::vector<double> tau(samples + 1);
  std::vector<cplx> y(samples + 1);
  for (int m = 0; m <= samples; ++m) {
    tau[m] = window * m / samples;
    y[m] = eval_kernel(k, tau[m], 0.0);
  }
  const double a0 = y[0].real();
  ExponentialFit fit;
  if (std::abs(y[0]) < 1e-300) {
    fit.kernel = OUKernel{0.0, 1.0 / window, 0.0};
    return fit;
  }
  const int probe = samples / 10;
  const cplx ratio = y[probe] / y[0];
  double g = std::max(-std::log(std::abs(ratio)) / tau[probe], 1e-3 / window);
  double w = -std::arg(ratio) / tau[probe];

  auto cost = [&](double gg, double ww) {
    double c = 0.0;
    for (int m = 0; m <= samples; ++m) c += std::norm(y[m] - a0 * std::exp(-cplx{gg, ww} * tau[m]));
    return c;
  };
  // Levenberg-Marquardt on (gamma, Omega).
  double lambda = 1e-3, c = cost(g, w);
  for (int it = 0; it < 200; ++it) {
    Eigen::Matrix2d JtJ = Eigen::Matrix2d::Zero();
    Eigen::Vector2d Jtr = Eigen::Vector2d::Zero();
    for (int m = 0; m <= samples; ++m) {
      const cplx model = a0 * std::exp(-cplx{g, w} * tau[m]);
      const cplx r = y[m] - model;
      const cplx dg = -tau[m] * model, dw = -kI * tau[m] * model;
      JtJ(0, 0) += std::norm(dg);
      JtJ(1, 1) += std::norm(dw);
      JtJ(0, 1) += (std::conj(dg) * dw).real();
      Jtr(0) += (std::conj(dg) * r).real();
      Jtr(1) += (std::conj(dw) * r).real();
    }
    JtJ(1, 0) = JtJ(0, 1);
    Eigen::Matrix2d A = JtJ;
    A.diagonal() *= 1.0 + lambda;
    const Eigen::Vector2d step = A.ldlt().solve(Jtr);
    const double cn = cost(std::max(g + step(0), 1e-6), w + step(1));
    if (cn < c) {
      g = std::max(g + step(0), 1e-6);
      w += step(1);
      const bool done = c - cn < 1e-14 * c;
      c = cn;
      lambda *= 0.3;
      if (done) break;
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
  }
  fit.kernel = OUKernel{2.0 * a0 / g, g, w};
  for (int m = 0; m <= samples; ++m)
    fit.max_residual = std::max(fit.max_residual, std::abs(y[m] - fit.kernel.at_lag(tau[m])) / std::abs(y[0]));
  if (fit.max_residual > max_residual)
    throw NumericError("single-exponential fit residual " + std::to_string(fit.max_residual) + " above threshold " +
                       std::to_string(max_residual));
  return fit;
}

// ---------------------------------------------------------------- x_ij system

using XMat = std::array<std::array<cplx, 4>, 2>;

std::array<cplx, 4> thermal_row_rhs(const std::array<cplx, 4>& x, const XMat& X, const BathCoupling& L,
                                    const LinearizedSystem& sys) {
  const cplx iD = kI * sys.Delta, iw = kI * sys.omega_m, iG = kI * sys.G;
  const cplx x1 = x[0], x2 = x[1], x3 = x[2], x4 = x[3];
  // c-number commutators [Obar_1, O] and [Obar_2, O]
  const cplx K1 = X[0][0] * x2 - X[0][1] * x1 + X[0][2] * x4 - X[0][3] * x3;
  const cplx K2 = X[1][0] * x2 - X[1][1] * x1 + X[1][2] * x4 - X[1][3] * x3;
  const cplx S1 = L.ca * x1 + L.cb * x3, S2 = L.ca * x2 + L.cb * x4;
  return {
      -iD * x1 + iG * x3 - iG * x4 - L.ca * K2 + X[0][0] * S1 - X[1][0] * S2,
      iD * x2 + iG * x3 - iG * x4 - L.ca * K1 + X[0][1] * S1 - X[1][1] * S2,
      iw * x3 + iG * x1 - iG * x2 - L.cb * K2 + X[0][2] * S1 - X[1][2] * S2,
      -iw * x4 + iG * x1 - iG * x2 - L.cb * K1 + X[0][3] * S1 - X[1][3] * S2,
  };
}

namespace {

XMat boundary_rows(const BathCoupling& L) { return {{{L.ca, 0.0, L.cb, 0.0}, {0.0, L.ca, 0.0, L.cb}}}; }

XMat closed_rhs(const XMat& X, const std::array<OUKernel, 2>& k, const BathCoupling& L, const LinearizedSystem& sys) {
  const XMat bc = boundary_rows(L);
  XMat d;
  for (int i = 0; i < 2; ++i) {
    const auto r = thermal_row_rhs(X[i], X, L, sys);
    for (int j = 0; j < 4; ++j) d[i][j] = k[i].alpha0() * bc[i][j] - k[i].mu() * X[i][j] + r[j];
  }
  return d;
}

XMat axpy(const XMat& a, double s, const XMat& b) {
  XMat r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) r[i][j] = a[i][j] + s * b[i][j];
  return r;
}

XMat closed_step(const XMat& y, double h, const std::array<OUKernel, 2>& k, const BathCoupling& L,
                 const LinearizedSystem& sys) {
  const XMat k1 = closed_rhs(y, k, L, sys);
  const XMat k2 = closed_rhs(axpy(y, h / 2, k1), k, L, sys);
  const XMat k3 = closed_rhs(axpy(y, h / 2, k2), k, L, sys);
  const XMat k4 = closed_rhs(axpy(y, h, k3), k, L, sys);
  XMat r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) r[i][j] = y[i][j] + h / 6 * (k1[i][j] + 2.0 * k2[i][j] + 2.0 * k3[i][j] + k4[i][j]);
  return r;
}

ThermalOCoefficients solve_closed(const std::array<OUKernel, 2>& k, const BathCoupling& L, const LinearizedSystem& sys,
                                  const TimeGrid& grid) {
  ThermalOCoefficients out;
  out.grid = grid;
  out.provenance = CoefficientSolver::closed_ou;
  const std::size_t n = 2 * grid.steps + 1;
  for (auto& row : out.X)
    for (auto& v : row) v.assign(n, cplx{});
  const double h = grid.dt / 2;
  XMat fine{}, coarse{};
  double scale = std::max(k[0].alpha0(), k[1].alpha0()) * grid.dt, err = 0.0;
  for (std::size_t s = 1; s < n; ++s) {
    fine = closed_step(fine, h, k, L, sys);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 4; ++j) {
        if (!std::isfinite(std::abs(fine[i][j])))
          throw NumericError("thermal coefficient system diverged at t = " + std::to_string(h * s));
        out.X[i][j][s] = fine[i][j];
        scale = std::max(scale, std::abs(fine[i][j]));
      }
    if (s % 2 == 0) {
      coarse = closed_step(coarse, grid.dt, k, L, sys);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 4; ++j) err = std::max(err, std::abs(coarse[i][j] - fine[i][j]) / 15.0);
      coarse = fine;
    }
  }
  if (err > 1e-4 * scale)
    throw NumericError("thermal coefficient system is stiff at dt = " + std::to_string(grid.dt) + "; reduce dt");
  return out;
}

ThermalOCoefficients solve_grid(const EffectiveKernels& kernels, const BathCoupling& L, const LinearizedSystem& sys,
                                const TimeGrid& grid) {
  const double h = grid.dt;
  const std::size_t N = grid.steps;
  double rate = 0.0;
  for (const KernelSpec* k : {&kernels.alpha1, &kernels.alpha2}) {
    if (is_markov(*k)) throw DomainError("the thermal grid solver needs pointwise kernels");
    if (const auto* ou = std::get_if<OUKernel>(k)) rate = std::max(rate, std::abs(ou->mu()));
    if (const auto* tk = std::get_if<TabulatedKernel>(k); tk && tk->max_lag() < grid.t_final() - 1e-12)
      throw DomainError("tabulated kernel does not cover the requested time span");
  }
  if (h * (std::abs(sys.omega_m) + std::abs(sys.Delta) + 2 * std::abs(sys.G) + rate) > 1.0)
    throw NumericError("two-time grid too coarse for the thermal coefficient system");

  std::array<std::vector<cplx>, 2> lag;
  for (int i = 0; i < 2; ++i) {
    const KernelSpec& k = i == 0 ? kernels.alpha1 : kernels.alpha2;
    lag[i].resize(2 * N + 1);
    for (std::size_t m = 0; m < lag[i].size(); ++m) lag[i][m] = eval_kernel(k, 0.5 * h * static_cast<double>(m), 0.0);
  }

  ThermalOCoefficients out;
  out.grid = grid;
  out.provenance = CoefficientSolver::two_time_grid;
  for (auto& row : out.X)
    for (auto& v : row) v.assign(2 * N + 1, cplx{});

  using Field = std::array<std::array<std::vector<cplx>, 4>, 2>;  // [i][j][l]
  auto make = [&] {
    Field f;
    for (auto& r : f)
      for (auto& v : r) v.assign(N + 1, cplx{});
    return f;
  };
  const XMat bc = boundary_rows(L);
  Field x = make(), s = make(), d1 = make(), d2 = make(), d3 = make(), d4 = make();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) x[i][j][0] = bc[i][j];

  std::array<VolterraWeights, 2> w0, wh, w1;
  auto contract = [&](const std::array<VolterraWeights, 2>& w, const Field& f) {
    XMat X;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 4; ++j) X[i][j] = w[i].dot(f[i][j].data()) + w[i].wb * bc[i][j];
    return X;
  };
  auto rhs = [&](const Field& f, std::size_t n, const XMat& X, Field& d) {
    for (int i = 0; i < 2; ++i)
      for (std::size_t l = 0; l < n; ++l) {
        const auto r = thermal_row_rhs({f[i][0][l], f[i][1][l], f[i][2][l], f[i][3][l]}, X, L, sys);
        for (int j = 0; j < 4; ++j) d[i][j][l] = r[j];
      }
  };
  auto stage = [&](const Field& base, double c, const Field& d, std::size_t n) {
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 4; ++j)
        for (std::size_t l = 0; l < n; ++l) s[i][j][l] = base[i][j][l] + c * d[i][j][l];
  };
  auto record = [&](std::size_t k, const XMat& X) {
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 4; ++j) out.X[i][j][2 * k] = X[i][j];
  };

  for (std::size_t k = 0; k < N; ++k) {
    const std::size_t n = k + 1;
    for (int i = 0; i < 2; ++i) {
      w0[i].build(lag[i], k, 0, h);
      wh[i].build(lag[i], k, 1, h);
      w1[i].build(lag[i], k, 2, h);
    }
    XMat X = contract(w0, x);
    record(k, X);
    rhs(x, n, X, d1);
    stage(x, h / 2, d1, n);
    rhs(s, n, contract(wh, s), d2);
    stage(x, h / 2, d2, n);
    rhs(s, n, contract(wh, s), d3);
    stage(x, h, d3, n);
    rhs(s, n, contract(w1, s), d4);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 4; ++j) {
        for (std::size_t l = 0; l < n; ++l)
          x[i][j][l] += h / 6 * (d1[i][j][l] + 2.0 * d2[i][j][l] + 2.0 * d3[i][j][l] + d4[i][j][l]);
        x[i][j][n] = bc[i][j];
      }
    if (!std::isfinite(std::abs(x[0][0][0])) || !std::isfinite(std::abs(x[1][1][0])))
      throw NumericError("thermal two-time grid diverged at t = " + std::to_string(grid.t(k + 1)));
  }
  for (int i = 0; i < 2; ++i) w0[i].build(lag[i], N, 0, h);
  record(N, contract(w0, x));
  for (auto& row : out.X)
    for (auto& v : row) fill_midpoints(v);
  return out;
}

}  // namespace

ThermalOCoefficients solve_thermal_ocoeff(const EffectiveKernels& kernels, const BathCoupling& L,
                                          const LinearizedSystem& sys, const TimeGrid& grid, bool force_grid) {
  const auto* k1 = std::get_if<OUKernel>(&kernels.alpha1);
  const auto* k2 = std::get_if<OUKernel>(&kernels.alpha2);
  if (k1 && k2 && !force_grid) {
    if (!(k1->gamma > 0.0) || !(k2->gamma > 0.0)) throw DomainError("exponential kernels need gamma > 0");
    return solve_closed({*k1, *k2}, L, sys, grid);
  }
  return solve_grid(kernels, L, sys, grid);
}

Eigen::MatrixXcd integrate_thermal_master(const ThermalOCoefficients& X, const BathCoupling& L,
                                          const FockOperators& ops, const LinearizedSystem& sys,
                                          const Eigen::MatrixXcd& rho0, const TimeGrid& grid,
                                          const RhoObserver& observer, const MasterOptions& options) {
  if (!(X.grid == grid)) throw DomainError("thermal master equation grid does not match the coefficient grid");
  const SparseOp H = system_hamiltonian(ops, sys);
  const SparseOp Lop = L.ca * ops.a + L.cb * ops.b;
  const SparseOp Ld = SparseOp(Lop.adjoint());
  Eigen::MatrixXcd Hr, Y, P, Q, out;
  auto rhs = [&](const Eigen::MatrixXcd& rho, std::size_t half) {
    auto obar = [&](int i) {
      return SparseOp(X.at_half(i, 0, half) * ops.a + X.at_half(i, 1, half) * ops.ad + X.at_half(i, 2, half) * ops.b +
                      X.at_half(i, 3, half) * ops.bd);
    };
    Hr.noalias() = H * rho;
    out = -kI * (Hr - Hr.adjoint());
    // [L, rho O1'] - [L', O1 rho]
    Y.noalias() = obar(0) * rho;
    P.noalias() = Lop * Y.adjoint();
    Q.noalias() = Ld * Y;
    out += P + P.adjoint() - Q - Q.adjoint();
    // [L', rho O2'] - [L, O2 rho]
    Y.noalias() = obar(1) * rho;
    P.noalias() = Ld * Y.adjoint();
    Q.noalias() = Lop * Y;
    out += P + P.adjoint() - Q - Q.adjoint();
    return out;
  };
  return integrate_density(rhs, ops.dims, rho0, grid, observer, options);
}

}  // namespace nmopto
