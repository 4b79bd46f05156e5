#include "nmopto/fock.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>

#include "nmopto/errors.hpp"

namespace nmopto {

namespace {

SparseOp ladder(int n) {
  SparseOp m(n, n);
  std::vector<Eigen::Triplet<cplx>> t;
  for (int k = 1; k < n; ++k) t.emplace_back(k - 1, k, std::sqrt(static_cast<double>(k)));
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

SparseOp identity(int n) {
  SparseOp m(n, n);
  m.setIdentity();
  return m;
}

SparseOp kron(const SparseOp& x, const SparseOp& y) {
  SparseOp out(x.rows() * y.rows(), x.cols() * y.cols());
  std::vector<Eigen::Triplet<cplx>> t;
  for (int i = 0; i < x.outerSize(); ++i)
    for (SparseOp::InnerIterator ix(x, i); ix; ++ix)
      for (int j = 0; j < y.outerSize(); ++j)
        for (SparseOp::InnerIterator iy(y, j); iy; ++iy)
          t.emplace_back(ix.row() * y.rows() + iy.row(), ix.col() * y.cols() + iy.col(), ix.value() * iy.value());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

void check_dims(const FockOperators& ops, Eigen::Index rows, Eigen::Index cols) {
  if (rows != ops.dims.size() || cols != ops.dims.size()) throw DomainError("state does not match the Fock dimensions");
}

}  // namespace

Eigen::MatrixXcd integrate_density(const DensityGenerator& rhs, const FockDims& dims, const Eigen::MatrixXcd& rho0,
                                   const TimeGrid& grid, const RhoObserver& observer, const MasterOptions& options) {
  if (rho0.rows() != dims.size() || rho0.cols() != dims.size()) throw DomainError("state does not match the Fock dimensions");
  Eigen::MatrixXcd rho = rho0;
  const double tr0 = rho0.trace().real();
  const double h = grid.dt;
  Eigen::MatrixXcd k1, k2, k3, k4;
  auto check = [&](std::size_t k) {
    const double drift = std::abs(rho.trace() - tr0);
    if (!std::isfinite(drift) || drift > options.trace_tolerance)
      throw NumericError("trace drift " + std::to_string(drift) + " at t = " + std::to_string(grid.t(k)) +
                         "; reduce dt");
    const double leak = leakage(rho, dims);
    if (leak > options.leakage_tolerance)
      throw TruncationError("Fock truncation leakage " + std::to_string(leak) + " at t = " + std::to_string(grid.t(k)) +
                            "; increase dims beyond (" + std::to_string(dims.na) + "," + std::to_string(dims.nb) +
                            ")");
  };
  check(0);
  if (observer) observer(0, rho);
  for (std::size_t k = 0; k < grid.steps; ++k) {
    k1 = rhs(rho, 2 * k);
    k2 = rhs(rho + (h / 2) * k1, 2 * k + 1);
    k3 = rhs(rho + (h / 2) * k2, 2 * k + 1);
    k4 = rhs(rho + h * k3, 2 * k + 2);
    rho += (h / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check(k + 1);
    if (observer) observer(k + 1, rho);
  }
  return rho;
}

FockOperators build_operators(FockDims dims) {
  if (dims.na < 2 || dims.nb < 2) throw DomainError("Fock cutoffs must be at least 2");
  FockOperators ops;
  ops.dims = dims;
  const SparseOp la = ladder(dims.na), lb = ladder(dims.nb), ia = identity(dims.na), ib = identity(dims.nb);
  ops.a = kron(la, ib);
  ops.b = kron(ia, lb);
  ops.ad = SparseOp(ops.a.adjoint());
  ops.bd = SparseOp(ops.b.adjoint());
  ops.id = identity(static_cast<int>(dims.size()));
  return ops;
}

SparseOp system_hamiltonian(const FockOperators& ops, const LinearizedSystem& sys) {
  const SparseOp xa = ops.a + ops.ad, xb = ops.b + ops.bd;
  SparseOp H = (-sys.Delta) * SparseOp(ops.ad * ops.a) + sys.omega_m * SparseOp(ops.bd * ops.b) +
               sys.G * SparseOp(xa * xb);
  H.prune(cplx{0.0});
  return H;
}

SparseOp o_bar(const FockOperators& ops, const std::array<cplx, 4>& F) {
  return F[0] * ops.b + F[1] * ops.bd + F[2] * ops.a + F[3] * ops.ad;
}

Eigen::VectorXcd fock_vector(const FockDims& dims, int n_a, int n_b) {
  if (n_a < 0 || n_b < 0 || n_a >= dims.na || n_b >= dims.nb) throw DomainError("Fock cutoffs too small for the initial state");
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(dims.size());
  psi(dims.index(n_a, n_b)) = 1.0;
  return psi;
}

Eigen::MatrixXcd fock_state(const FockDims& dims, int n_a, int n_b) {
  const Eigen::VectorXcd psi = fock_vector(dims, n_a, n_b);
  return psi * psi.adjoint();
}

Eigen::VectorXcd coherent_vector(const FockDims& dims, cplx alpha, cplx beta) {
  auto mode = [](int n, cplx z) {
    Eigen::VectorXcd v(n);
    v(0) = 1.0;
    for (int k = 1; k < n; ++k) v(k) = v(k - 1) * z / std::sqrt(static_cast<double>(k));
    return v;
  };
  const Eigen::VectorXcd va = mode(dims.na, alpha), vb = mode(dims.nb, beta);
  Eigen::VectorXcd psi(dims.size());
  for (int i = 0; i < dims.na; ++i)
    for (int j = 0; j < dims.nb; ++j) psi(dims.index(i, j)) = va(i) * vb(j);
  return psi / psi.norm();
}

Eigen::MatrixXcd integrate_master(const OCoefficientSeries& F, const FockOperators& ops, const LinearizedSystem& sys,
                                  const Eigen::MatrixXcd& rho0, const TimeGrid& grid, const RhoObserver& observer,
                                  const MasterOptions& options) {
  if (!(F.grid == grid)) throw DomainError("master equation grid does not match the coefficient grid");
  check_dims(ops, rho0.rows(), rho0.cols());
  const SparseOp H = system_hamiltonian(ops, sys);
  Eigen::MatrixXcd Hr, X, P, Q, out;
  auto rhs = [&](const Eigen::MatrixXcd& rho, std::size_t half) {
    const SparseOp O = o_bar(ops, {F.at_half(0, half), F.at_half(1, half), F.at_half(2, half), F.at_half(3, half)});
    Hr.noalias() = H * rho;
    X.noalias() = O * rho;                  // Obar rho
    P.noalias() = ops.b * X.adjoint();      // b rho Obar'
    Q.noalias() = ops.bd * X;               // b' Obar rho
    // -i[H, rho] + b rho Obar' - rho Obar' b - b' Obar rho + Obar rho b'
    out = -kI * (Hr - Hr.adjoint());
    out += P + P.adjoint();
    out -= Q + Q.adjoint();
    return out;
  };
  return integrate_density(rhs, ops.dims, rho0, grid, observer, options);
}

Eigen::MatrixXcd integrate_lindblad(const FockOperators& ops, const LinearizedSystem& sys, double Gamma,
                                    const Eigen::MatrixXcd& rho0, const TimeGrid& grid, const RhoObserver& observer,
                                    const MasterOptions& options) {
  check_dims(ops, rho0.rows(), rho0.cols());
  const SparseOp H = system_hamiltonian(ops, sys);
  const SparseOp nb = ops.bd * ops.b;
  Eigen::MatrixXcd Hr, Z, N, out;
  auto rhs = [&](const Eigen::MatrixXcd& rho, std::size_t) {
    Hr.noalias() = H * rho;
    Z.noalias() = ops.b * rho;
    N.noalias() = nb * rho;
    out = -kI * (Hr - Hr.adjoint());
    out += (0.5 * Gamma) * (2.0 * (ops.b * Z.adjoint()).adjoint() - N - N.adjoint());
    return out;
  };
  return integrate_density(rhs, ops.dims, rho0, grid, observer, options);
}

Eigen::VectorXcd propagate_trajectory(const OCoefficientSeries& F, const FockOperators& ops,
                                      const LinearizedSystem& sys, const NoisePath& noise,
                                      const Eigen::VectorXcd& psi0, const TimeGrid& grid,
                                      const PsiObserver& observer) {
  if (!(F.grid == grid)) throw DomainError("trajectory grid does not match the coefficient grid");
  if (psi0.size() != ops.dims.size()) throw DomainError("state does not match the Fock dimensions");
  const bool white = noise.white;
  if (white ? !(noise.grid == grid) : !(noise.grid == half_grid(grid)))
    throw DomainError("noise path is not sampled on the trajectory grid");

  const SparseOp Hm = -kI * system_hamiltonian(ops, sys);
  // b' O_j for O_j = b, b', a, a'.
  const std::array<SparseOp, 4> P{SparseOp(ops.bd * ops.b), SparseOp(ops.bd * ops.bd), SparseOp(ops.bd * ops.a),
                                  SparseOp(ops.bd * ops.ad)};
  auto rhs = [&](const Eigen::VectorXcd& psi, std::size_t half, cplx z) -> Eigen::VectorXcd {
    Eigen::VectorXcd out = Hm * psi;
    out.noalias() += z * (ops.b * psi);
    for (int j = 0; j < 4; ++j) out.noalias() -= F.at_half(j, half) * (P[static_cast<std::size_t>(j)] * psi);
    return out;
  };
  Eigen::VectorXcd psi = psi0;
  const double h = grid.dt;
  if (observer) observer(0, psi);
  for (std::size_t k = 0; k < grid.steps; ++k) {
    const cplx z0 = white ? noise.values[k] : noise.values[2 * k];
    const cplx zm = white ? noise.values[k] : noise.values[2 * k + 1];
    const cplx z1 = white ? noise.values[k] : noise.values[2 * k + 2];
    const Eigen::VectorXcd k1 = rhs(psi, 2 * k, z0);
    const Eigen::VectorXcd k2 = rhs(psi + (h / 2) * k1, 2 * k + 1, zm);
    const Eigen::VectorXcd k3 = rhs(psi + (h / 2) * k2, 2 * k + 1, zm);
    const Eigen::VectorXcd k4 = rhs(psi + h * k3, 2 * k + 2, z1);
    psi += (h / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double n2 = psi.squaredNorm();
    if (!std::isfinite(n2) || n2 > 1e6)
      throw NumericError("trajectory norm overflow (|psi|^2 = " + std::to_string(n2) + ") at t = " +
                         std::to_string(grid.t(k + 1)));
    if (observer) observer(k + 1, psi);
  }
  return psi;
}

namespace {

Eigen::MatrixXcd pairwise_projectors(const std::vector<Eigen::VectorXcd>& psis, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return psis[lo] * psis[lo].adjoint();
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_projectors(psis, lo, mid) + pairwise_projectors(psis, mid, hi);
}

}  // namespace

AveragedState average_trajectories(const std::vector<Eigen::VectorXcd>& psis) {
  if (psis.empty()) throw DomainError("cannot average an empty ensemble");
  AveragedState out;
  out.paths = psis.size();
  const double M = static_cast<double>(psis.size());
  out.rho = pairwise_projectors(psis, 0, psis.size()) / M;
  std::vector<double> tr(psis.size());
  for (std::size_t i = 0; i < psis.size(); ++i) tr[i] = psis[i].squaredNorm();
  out.trace_mean = pairwise_sum(tr) / M;
  if (psis.size() > 1) {
    for (auto& x : tr) x = (x - out.trace_mean) * (x - out.trace_mean);
    out.trace_stderr = std::sqrt(pairwise_sum(tr) / (M - 1) / M);
  }
  return out;
}

EnsembleResult run_trajectory_ensemble(const OCoefficientSeries& F, const FockOperators& ops,
                                       const LinearizedSystem& sys, const KernelSpec& kernel,
                                       const Eigen::VectorXcd& psi0, const TimeGrid& grid,
                                       const EnsembleOptions& options) {
  if (options.paths == 0) throw DomainError("ensemble needs at least one path");
  for (auto c : options.checkpoints)
    if (c > grid.steps) throw DomainError("checkpoint beyond the final time");

  EnsembleResult res;
  res.checkpoints = options.checkpoints;
  res.psis.assign(res.checkpoints.size(), std::vector<Eigen::VectorXcd>(options.paths));
  const TimeGrid noise_grid = is_markov(kernel) ? grid : half_grid(grid);

  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const std::size_t p = next.fetch_add(1);
      if (p >= options.paths) return;
      try {
        const NoisePath noise = sample_noise_path(kernel, noise_grid, derive_seed(options.master_seed, p));
        propagate_trajectory(F, ops, sys, noise, psi0, grid, [&](std::size_t k, const Eigen::VectorXcd& psi) {
          for (std::size_t c = 0; c < res.checkpoints.size(); ++c)
            if (res.checkpoints[c] == k) res.psis[c][p] = psi;
        });
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (!error) error = std::current_exception();
        next = options.paths;
        return;
      }
    }
  };
  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, options.paths));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  for (const auto& ps : res.psis) res.averages.push_back(average_trajectories(ps));
  return res;
}

MomentState moments_from_rho(const Eigen::MatrixXcd& rho, const FockOperators& ops) {
  check_dims(ops, rho.rows(), rho.cols());
  auto ev = [&](const SparseOp& A) {
    // tr(A rho) = sum_ij A_ij rho_ji
    cplx s{};
    for (int j = 0; j < A.outerSize(); ++j)
      for (SparseOp::InnerIterator it(A, j); it; ++it) s += it.value() * rho(it.col(), it.row());
    return s;
  };
  using M = MomentState;
  MomentState m;
  m[M::a] = ev(ops.a);
  m[M::ad] = ev(ops.ad);
  m[M::b] = ev(ops.b);
  m[M::bd] = ev(ops.bd);
  m[M::aa] = ev(ops.a * ops.a);
  // a a' truncated to the Fock cutoff misses the top level; a'a + 1 does not.
  m[M::aad] = ev(ops.ad * ops.a) + 1.0;
  m[M::ab] = ev(ops.a * ops.b);
  m[M::abd] = ev(ops.a * ops.bd);
  m[M::adad] = ev(ops.ad * ops.ad);
  m[M::adb] = ev(ops.ad * ops.b);
  m[M::adbd] = ev(ops.ad * ops.bd);
  m[M::bb] = ev(ops.b * ops.b);
  m[M::bbd] = ev(ops.bd * ops.b) + 1.0;
  m[M::bdbd] = ev(ops.bd * ops.bd);
  return m;
}

double trace_distance(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols()) throw DomainError("trace distance of mismatched states");
  const Eigen::MatrixXcd d = rho - sigma;
  const Eigen::MatrixXcd herm = 0.5 * (d + d.adjoint());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

double leakage(const Eigen::MatrixXcd& rho, const FockDims& dims) {
  double p = 0.0;
  for (int i = 0; i < dims.na; ++i)
    for (int j = 0; j < dims.nb; ++j)
      if (i == dims.na - 1 || j == dims.nb - 1) p += rho(dims.index(i, j), dims.index(i, j)).real();
  return p;
}

namespace {

template <class T>
void put_le(std::ostream& out, T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw NumericError("truncated snapshot");
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace

void write_snapshot(std::ostream& out, const FockDims& dims, double t, const Eigen::MatrixXcd& rho) {
  if (rho.rows() != dims.size() || rho.cols() != dims.size()) throw DomainError("snapshot state does not match dims");
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dims.na));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dims.nb));
  put_le<double>(out, t);
  for (Eigen::Index i = 0; i < rho.rows(); ++i)
    for (Eigen::Index j = 0; j < rho.cols(); ++j) {
      put_le<double>(out, rho(i, j).real());
      put_le<double>(out, rho(i, j).imag());
    }
}

void write_snapshot(const std::filesystem::path& path, const FockDims& dims, double t, const Eigen::MatrixXcd& rho) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NumericError("cannot write " + path.string());
  write_snapshot(out, dims, t, rho);
}

Snapshot read_snapshot(std::istream& in) {
  Snapshot s;
  s.dims.na = static_cast<int>(get_le<std::uint32_t>(in));
  s.dims.nb = static_cast<int>(get_le<std::uint32_t>(in));
  s.t = get_le<double>(in);
  if (s.dims.na < 1 || s.dims.nb < 1 || s.dims.size() > 1 << 16) throw NumericError("implausible snapshot dims");
  s.rho.resize(s.dims.size(), s.dims.size());
  for (Eigen::Index i = 0; i < s.rho.rows(); ++i)
    for (Eigen::Index j = 0; j < s.rho.cols(); ++j) {
      const double re = get_le<double>(in);
      s.rho(i, j) = cplx{re, get_le<double>(in)};
    }
  return s;
}

}  // namespace nmopto
