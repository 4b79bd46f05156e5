#include "nmopto/ocoeff.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "nmopto/errors.hpp"
#include "nmopto/output.hpp"

namespace nmopto {

OCoefficientSeries markov_series(double Gamma, const TimeGrid& grid) {
  OCoefficientSeries s;
  s.grid = grid;
  s.provenance = CoefficientSolver::markov;
  s.has_f5 = true;
  for (auto& f : s.F) f.assign(s.half_points(), cplx{});
  std::fill(s.F[coef::F1].begin(), s.F[coef::F1].end(), cplx{0.5 * Gamma, 0.0});
  return s;
}

// ---------------------------------------------------------------- closed OU system

namespace {

using Vec5 = std::array<cplx, 5>;

Vec5 closed_rhs(const Vec5& F, const OUKernel& k, const LinearizedSystem& sys, bool include_f5) {
  const cplx mu = k.mu();
  const double a0 = k.alpha0();
  const cplx iG = kI * sys.G;
  const cplx d34 = F[2] - F[3], d12 = F[0] - F[1];
  Vec5 d;
  d[0] = a0 + (kI * sys.omega_m - mu + F[0]) * F[0] + iG * d34;
  d[1] = (-kI * sys.omega_m - mu + F[0]) * F[1] + iG * d34 - (include_f5 ? F[4] : cplx{});
  d[2] = (-kI * sys.Delta - mu + F[0]) * F[2] + iG * d12;
  d[3] = (kI * sys.Delta - mu + F[0]) * F[3] + iG * d12;
  d[4] = a0 * F[1] + (F[0] - 2.0 * mu) * F[4];
  return d;
}

Vec5 rk4_step(const Vec5& y, double h, const OUKernel& k, const LinearizedSystem& sys, bool include_f5) {
  auto axpy = [](const Vec5& a, double s, const Vec5& b) {
    Vec5 r;
    for (int j = 0; j < 5; ++j) r[j] = a[j] + s * b[j];
    return r;
  };
  const Vec5 k1 = closed_rhs(y, k, sys, include_f5);
  const Vec5 k2 = closed_rhs(axpy(y, h / 2, k1), k, sys, include_f5);
  const Vec5 k3 = closed_rhs(axpy(y, h / 2, k2), k, sys, include_f5);
  const Vec5 k4 = closed_rhs(axpy(y, h, k3), k, sys, include_f5);
  Vec5 r;
  for (int j = 0; j < 5; ++j) r[j] = y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
  return r;
}

}  // namespace

OCoefficientSeries solve_ou_closed(const OUKernel& k, const LinearizedSystem& sys, const TimeGrid& grid,
                                   bool include_f5) {
  if (!(k.gamma > 0.0)) throw DomainError("OU kernel needs gamma > 0");
  OCoefficientSeries s;
  s.grid = grid;
  s.provenance = CoefficientSolver::closed_ou;
  s.has_f5 = true;
  const std::size_t n = s.half_points();
  for (auto& f : s.F) f.assign(n, cplx{});

  // Fine march on the half grid, coarse march on the full grid; the difference at shared
  // points estimates the local error (step doubling).
  const double h = grid.dt / 2;
  Vec5 fine{}, coarse{};
  double scale = k.alpha0() * grid.dt, err = 0.0;
  // Bounded solutions stay on the scale of the system rates; beyond this the Riccati
  // coefficient runs into a pole (the time-local generator does not exist there).
  const double natural = 1.0 + std::abs(k.mu()) + std::abs(sys.omega_m) + std::abs(sys.Delta) + std::abs(sys.G) +
                         k.alpha0() / std::abs(k.mu());
  const double blowup = 1e4 * natural;
  for (std::size_t i = 1; i < n; ++i) {
    fine = rk4_step(fine, h, k, sys, include_f5);
    for (int j = 0; j < 5; ++j) {
      if (!std::isfinite(fine[j].real()) || !std::isfinite(fine[j].imag()) || std::abs(fine[j]) > blowup)
        throw NumericError("O coefficients diverge near t = " + std::to_string(h * i) +
                           "; the time-local generator is singular for these bath parameters");
      s.F[j][i] = fine[j];
      scale = std::max(scale, std::abs(fine[j]));
    }
    if (i % 2 == 0) {
      coarse = rk4_step(coarse, grid.dt, k, sys, include_f5);
      for (int j = 0; j < 5; ++j) {
        err = std::max(err, std::abs(coarse[j] - fine[j]) / 15.0);
        coarse[j] = fine[j];
      }
    }
  }
  if (err > 1e-4 * scale && scale > 20 * natural)
    throw NumericError("O coefficients diverge (peak |F| = " + std::to_string(scale) +
                       "); the time-local generator is singular for these bath parameters");
  if (err > 1e-4 * scale)
    throw NumericError("closed O-coefficient system is stiff at dt = " + std::to_string(grid.dt) +
                       " (step-halving error estimate " + std::to_string(err) + "); reduce dt");
  if (!include_f5) {
    s.has_f5 = false;
    std::fill(s.F[coef::F5].begin(), s.F[coef::F5].end(), cplx{});
  }
  return s;
}

// ---------------------------------------------------------------- two-time grid

namespace {

constexpr std::array<cplx, 4> kBoundary{1.0, 0.0, 0.0, 0.0};

struct Rows {
  std::array<std::vector<cplx>, 4> f;
  explicit Rows(std::size_t n) {
    for (auto& v : f) v.assign(n, cplx{});
  }
};

void row_rhs(const Rows& s, std::size_t n, const std::array<cplx, 4>& F, const cplx* F5p,
             const LinearizedSystem& sys, Rows& d) {
  const cplx iwm = kI * sys.omega_m, iD = kI * sys.Delta, iG = kI * sys.G;
  for (std::size_t l = 0; l < n; ++l) {
    const cplx f1 = s.f[0][l], f2 = s.f[1][l], f3 = s.f[2][l], f4 = s.f[3][l];
    d.f[0][l] = iwm * f1 + iG * (f3 - f4) + f1 * F[0];
    d.f[1][l] = -iwm * f2 + iG * (f3 - f4) - f2 * F[0] + 2.0 * f1 * F[1] - f4 * F[2] + f3 * F[3] -
                (F5p ? F5p[l] : cplx{});
    d.f[2][l] = -iD * f3 + iG * (f1 - f2) + f1 * F[2];
    d.f[3][l] = iD * f4 + iG * (f1 - f2) + f1 * F[3];
  }
}

std::array<cplx, 4> contract(const VolterraWeights& w, const Rows& s) {
  std::array<cplx, 4> F;
  for (int j = 0; j < 4; ++j) F[j] = w.dot(s.f[j].data()) + w.wb * kBoundary[j];
  return F;
}

double kernel_rate(const KernelSpec& k) {
  if (const auto* ou = std::get_if<OUKernel>(&k)) return std::abs(ou->mu());
  return 0.0;
}

}  // namespace

GridSolution solve_two_time_grid(const KernelSpec& k, const LinearizedSystem& sys, const TimeGrid& grid,
                                 const GridSolverOptions& options) {
  GridSolution out;
  if (is_markov(k)) {
    out.series = markov_series(std::get<MarkovKernel>(k).Gamma, grid);
    out.series.provenance = CoefficientSolver::two_time_grid;
    return out;
  }
  const double h = grid.dt;
  const std::size_t N = grid.steps;
  const double stiff = h * (std::abs(sys.omega_m) + std::abs(sys.Delta) + 2 * std::abs(sys.G) + kernel_rate(k));
  if (stiff > 1.0)
    throw NumericError("two-time grid too coarse: dt = " + std::to_string(h) + " resolves none of the system rates");
  if (const auto* tk = std::get_if<TabulatedKernel>(&k); tk && tk->max_lag() < grid.t_final() - 1e-12)
    throw DomainError("tabulated kernel does not cover the requested time span");
  const bool f5 = options.include_f5;
  if (f5) {
    const double bytes = static_cast<double>(N + 1) * static_cast<double>(N + 1) * sizeof(cplx);
    if (bytes > static_cast<double>(options.max_slab_bytes))
      throw NumericError("f5 slab needs " + std::to_string(bytes / (1 << 20)) + " MiB, above the memory budget");
  }

  std::vector<cplx> lag(2 * N + 1);
  for (std::size_t m = 0; m < lag.size(); ++m) lag[m] = eval_kernel(k, 0.5 * h * static_cast<double>(m), 0.0);

  OCoefficientSeries& S = out.series;
  S.grid = grid;
  S.provenance = CoefficientSolver::two_time_grid;
  S.has_f5 = f5;
  for (auto& f : S.F) f.assign(S.half_points(), cplx{});

  std::optional<TwoTimeField> fields;
  if (options.capture_fields) {
    fields.emplace();
    fields->grid = grid;
    for (auto& f : fields->f) f.reserve(TwoTimeField::offset(N + 1));
    if (f5) fields->F5p.reserve(TwoTimeField::offset(N + 1));
  }
  auto capture_rows = [&](const Rows& r, std::size_t n) {
    if (!fields) return;
    for (int j = 0; j < 4; ++j) fields->f[j].insert(fields->f[j].end(), r.f[j].begin(), r.f[j].begin() + n);
  };

  Rows f(N + 1), s2(N + 1), s3(N + 1), s4(N + 1), d1(N + 1), d2(N + 1), d3(N + 1), d4(N + 1);
  f.f[0][0] = 1.0;
  capture_rows(f, 1);

  Eigen::MatrixXcd Y;
  Eigen::VectorXcd P0, Ph, P1, G1, G2, G3, G4;
  if (f5) Y = Eigen::MatrixXcd::Zero(N + 1, N + 1);

  VolterraWeights w0, wh, w1;
  auto record = [&](std::size_t k, const std::array<cplx, 4>& F, const Eigen::VectorXcd* F5p) {
    for (int j = 0; j < 4; ++j) S.F[j][2 * k] = F[j];
    if (F5p) {
      S.F[coef::F5][2 * k] = w0.dot(F5p->data());
      if (fields) fields->F5p.insert(fields->F5p.end(), F5p->data(), F5p->data() + F5p->size());
    }
  };
  auto slab_contract = [&](const VolterraWeights& w, std::size_t n, Eigen::VectorXcd& P) {
    const Eigen::Map<const Eigen::VectorXcd> wa(w.wa.data(), static_cast<Eigen::Index>(n));
    P.noalias() = Y.topLeftCorner(n, n).transpose() * wa;
  };

  for (std::size_t k = 0; k < N; ++k) {
    const std::size_t n = k + 1;
    w0.build(lag, k, 0, h);
    wh.build(lag, k, 1, h);
    w1.build(lag, k, 2, h);

    // Stage 1 at t_k.
    auto F = contract(w0, f);
    if (f5) {
      slab_contract(w0, n, P0);
      G1 = P0;
    }
    record(k, F, f5 ? &G1 : nullptr);
    row_rhs(f, n, F, f5 ? G1.data() : nullptr, sys, d1);

    // Stage 2 at t_k + h/2.
    for (int j = 0; j < 4; ++j)
      for (std::size_t l = 0; l < n; ++l) s2.f[j][l] = f.f[j][l] + 0.5 * h * d1.f[j][l];
    F = contract(wh, s2);
    if (f5) {
      slab_contract(wh, n, Ph);
      G2 = Ph + (0.5 * h * wh.dot(f.f[0].data())) * G1;
    }
    row_rhs(s2, n, F, f5 ? G2.data() : nullptr, sys, d2);

    // Stage 3 at t_k + h/2.
    for (int j = 0; j < 4; ++j)
      for (std::size_t l = 0; l < n; ++l) s3.f[j][l] = f.f[j][l] + 0.5 * h * d2.f[j][l];
    F = contract(wh, s3);
    if (f5) G3 = Ph + (0.5 * h * wh.dot(s2.f[0].data())) * G2;
    row_rhs(s3, n, F, f5 ? G3.data() : nullptr, sys, d3);

    // Stage 4 at t_k + h.
    for (int j = 0; j < 4; ++j)
      for (std::size_t l = 0; l < n; ++l) s4.f[j][l] = f.f[j][l] + h * d3.f[j][l];
    F = contract(w1, s4);
    if (f5) {
      slab_contract(w1, n, P1);
      G4 = P1 + (h * w1.dot(s3.f[0].data())) * G3;
    }
    row_rhs(s4, n, F, f5 ? G4.data() : nullptr, sys, d4);

    if (f5) {
      const auto ni = static_cast<Eigen::Index>(n);
      Eigen::MatrixXcd U(ni, 4), V(ni, 4);
      using Map = Eigen::Map<const Eigen::VectorXcd>;
      U.col(0) = Map(f.f[0].data(), ni);
      U.col(1) = 2.0 * Map(s2.f[0].data(), ni);
      U.col(2) = 2.0 * Map(s3.f[0].data(), ni);
      U.col(3) = Map(s4.f[0].data(), ni);
      V.col(0) = G1, V.col(1) = G2, V.col(2) = G3, V.col(3) = G4;
      Y.topLeftCorner(ni, ni).noalias() += (h / 6.0) * U * V.transpose();
    }
    for (int j = 0; j < 4; ++j)
      for (std::size_t l = 0; l < n; ++l)
        f.f[j][l] += h / 6.0 * (d1.f[j][l] + 2.0 * d2.f[j][l] + 2.0 * d3.f[j][l] + d4.f[j][l]);

    // New boundary row s = t_{k+1}, and the slab edges f5(t, t, s') = 0, f5(t, s, t) = f2(t, s).
    f.f[0][n] = 1.0;
    f.f[1][n] = f.f[2][n] = f.f[3][n] = 0.0;
    if (f5) {
      Y.row(static_cast<Eigen::Index>(n)).setZero();
      for (std::size_t l = 0; l <= n; ++l) Y(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(n)) = f.f[1][l];
    }
    for (int j = 0; j < 4; ++j)
      if (!std::isfinite(f.f[j][0].real()) || !std::isfinite(f.f[j][0].imag()))
        throw NumericError("two-time grid diverged at t = " + std::to_string(grid.t(k + 1)));
    capture_rows(f, n + 1);
  }

  // Final grid point.
  w0.build(lag, N, 0, h);
  const auto F = contract(w0, f);
  if (f5) slab_contract(w0, N + 1, P0);
  record(N, F, f5 ? &P0 : nullptr);
  if (fields && f5) fields->slab = std::move(Y);

  for (auto& v : S.F) fill_midpoints(v);
  out.fields = std::move(fields);
  return out;
}

OCoefficientSeries solve_coefficients(const KernelSpec& k, const LinearizedSystem& sys, const TimeGrid& grid,
                                      bool include_f5) {
  if (const auto* m = std::get_if<MarkovKernel>(&k)) return markov_series(m->Gamma, grid);
  if (const auto* ou = std::get_if<OUKernel>(&k)) return solve_ou_closed(*ou, sys, grid, include_f5);
  GridSolverOptions opt;
  opt.include_f5 = include_f5;
  return solve_two_time_grid(k, sys, grid, opt).series;
}

// ---------------------------------------------------------------- residual

namespace {

cplx fd_derivative(cplx a, cplx b, cplx c, cplx d, double h) { return (a - 27.0 * b + 27.0 * c - d) / (24.0 * h); }

}  // namespace

double consistency_residual(const OCoefficientSeries& series, const TwoTimeField* fields, const KernelSpec& k,
                            const LinearizedSystem& sys) {
  const std::size_t N = series.grid.steps;
  const double h = series.grid.dt;
  double res = 0.0;
  if (const auto* m = std::get_if<MarkovKernel>(&k)) {
    for (std::size_t i = 0; i < series.half_points(); ++i) {
      res = std::max(res, std::abs(series.at_half(coef::F1, i) - 0.5 * m->Gamma));
      for (int j = 1; j < 5; ++j) res = std::max(res, std::abs(series.at_half(j, i)));
    }
    return res;
  }
  if (N < 4) return res;

  if (!fields) {
    // Without two-time fields the closed OU equations are re-checked instead.
    const auto* ou = std::get_if<OUKernel>(&k);
    if (!ou) throw DomainError("consistency_residual needs the two-time fields for this kernel");
    const bool f5 = series.has_f5;
    for (std::size_t kk = 1; kk + 2 <= N; ++kk) {
      Vec5 Fm;
      for (int j = 0; j < 5; ++j) Fm[j] = series.at_half(j, 2 * kk + 1);
      const Vec5 rhs = closed_rhs(Fm, *ou, sys, f5);
      for (int j = 0; j < (f5 ? 5 : 4); ++j) {
        const cplx d = fd_derivative(series.at(j, kk - 1), series.at(j, kk), series.at(j, kk + 1), series.at(j, kk + 2), h);
        res = std::max(res, std::abs(d - rhs[j]));
      }
    }
    return res;
  }

  const bool f5 = !fields->F5p.empty();
  const cplx iwm = kI * sys.omega_m, iD = kI * sys.Delta, iG = kI * sys.G;
  for (std::size_t kk = 1; kk + 2 <= N; ++kk) {
    std::array<cplx, 4> F;
    for (int j = 0; j < 4; ++j) F[j] = series.at_half(j, 2 * kk + 1);
    for (std::size_t l = 0; l + 1 <= kk; ++l) {
      std::array<cplx, 4> v, d;
      for (int j = 0; j < 4; ++j) {
        const cplx a = fields->value(j, kk - 1, l), b = fields->value(j, kk, l), c = fields->value(j, kk + 1, l),
                   e = fields->value(j, kk + 2, l);
        v[j] = midpoint_interp(a, b, c, e);
        d[j] = fd_derivative(a, b, c, e, h);
      }
      cplx g5{};
      if (f5)
        g5 = midpoint_interp(fields->f5_prime(kk - 1, l), fields->f5_prime(kk, l), fields->f5_prime(kk + 1, l),
                             fields->f5_prime(kk + 2, l));
      const std::array<cplx, 4> rhs{
          iwm * v[0] + iG * (v[2] - v[3]) + v[0] * F[0],
          -iwm * v[1] + iG * (v[2] - v[3]) - v[1] * F[0] + 2.0 * v[0] * F[1] - v[3] * F[2] + v[2] * F[3] - g5,
          -iD * v[2] + iG * (v[0] - v[1]) + v[0] * F[2],
          iD * v[3] + iG * (v[0] - v[1]) + v[0] * F[3],
      };
      for (int j = 0; j < 4; ++j) res = std::max(res, std::abs(d[j] - rhs[j]));
    }
  }
  return res;
}

void write_series_csv(std::ostream& out, const OCoefficientSeries& series) {
  CsvWriter csv(out, {"t", "F1_re", "F1_im", "F2_re", "F2_im", "F3_re", "F3_im", "F4_re", "F4_im", "F5_re", "F5_im"});
  std::array<double, 11> row;
  for (std::size_t k = 0; k < series.grid.points(); ++k) {
    row[0] = series.grid.t(k);
    for (int j = 0; j < 5; ++j) {
      row[1 + 2 * j] = series.at(j, k).real();
      row[2 + 2 * j] = series.at(j, k).imag();
    }
    csv.row(row);
  }
}

}  // namespace nmopto
