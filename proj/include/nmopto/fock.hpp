#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <vector>

#include "nmopto/kernel.hpp"
#include "nmopto/moments.hpp"
#include "nmopto/ocoeff.hpp"
#include "nmopto/params.hpp"

namespace nmopto {

using SparseOp = Eigen::SparseMatrix<cplx>;

/// Fock cutoffs; basis index = n_a * nb + n_b.
struct FockDims {
  int na = 10;
  int nb = 10;

  Eigen::Index size() const { return static_cast<Eigen::Index>(na) * nb; }
  Eigen::Index index(int n_a, int n_b) const { return static_cast<Eigen::Index>(n_a) * nb + n_b; }
};

struct FockOperators {
  FockDims dims;
  SparseOp a, ad, b, bd, id;
};

FockOperators build_operators(FockDims dims);

/// H = -Delta a'a + omega_m b'b + G (a + a')(b + b').
SparseOp system_hamiltonian(const FockOperators& ops, const LinearizedSystem& sys);

/// Obar = F1 b + F2 b' + F3 a + F4 a'.
SparseOp o_bar(const FockOperators& ops, const std::array<cplx, 4>& F);

/// |n_a, n_b> as a density matrix.
Eigen::MatrixXcd fock_state(const FockDims& dims, int n_a, int n_b);
Eigen::VectorXcd fock_vector(const FockDims& dims, int n_a, int n_b);
/// Truncated coherent state |alpha> (x) |beta>, renormalized.
Eigen::VectorXcd coherent_vector(const FockDims& dims, cplx alpha, cplx beta);

/// Called on every grid point with the current state (k = 0..steps).
using RhoObserver = std::function<void(std::size_t k, const Eigen::MatrixXcd& rho)>;

struct MasterOptions {
  double trace_tolerance = 1e-6;
  double leakage_tolerance = 1e-4;
};

/// Generator value at half-grid index `half` (time half * dt / 2).
using DensityGenerator = std::function<Eigen::MatrixXcd(const Eigen::MatrixXcd& rho, std::size_t half)>;

/// Fourth-order march of drho/dt = generator(rho, t) with trace and leakage monitoring.
Eigen::MatrixXcd integrate_density(const DensityGenerator& generator, const FockDims& dims,
                                   const Eigen::MatrixXcd& rho0, const TimeGrid& grid,
                                   const RhoObserver& observer = {}, const MasterOptions& options = {});

/// The non-Markovian master equation
///   drho/dt = -i[H, rho] + [b, rho Obar'] - [b', Obar rho]
/// on the grid of `F`. Returns the state at the final time.
Eigen::MatrixXcd integrate_master(const OCoefficientSeries& F, const FockOperators& ops, const LinearizedSystem& sys,
                                  const Eigen::MatrixXcd& rho0, const TimeGrid& grid, const RhoObserver& observer = {},
                                  const MasterOptions& options = {});

/// drho/dt = -i[H, rho] + Gamma/2 (2 b rho b' - b'b rho - rho b'b).
Eigen::MatrixXcd integrate_lindblad(const FockOperators& ops, const LinearizedSystem& sys, double Gamma,
                                    const Eigen::MatrixXcd& rho0, const TimeGrid& grid,
                                    const RhoObserver& observer = {}, const MasterOptions& options = {});

using PsiObserver = std::function<void(std::size_t k, const Eigen::VectorXcd& psi)>;

/// Linear (unnormalized) trajectory d psi/dt = (-iH + b z*_t - b' Obar(t)) psi.
/// Colored noise must be sampled on half_grid(grid); white noise on `grid` itself.
Eigen::VectorXcd propagate_trajectory(const OCoefficientSeries& F, const FockOperators& ops,
                                      const LinearizedSystem& sys, const NoisePath& noise,
                                      const Eigen::VectorXcd& psi0, const TimeGrid& grid,
                                      const PsiObserver& observer = {});

struct AveragedState {
  Eigen::MatrixXcd rho;
  double trace_mean = 0.0;
  double trace_stderr = 0.0;
  std::size_t paths = 0;
};

/// Mean of unnormalized projectors |psi><psi|, summed pairwise in index order.
AveragedState average_trajectories(const std::vector<Eigen::VectorXcd>& psis);

struct EnsembleOptions {
  std::size_t paths = 2000;
  std::uint64_t master_seed = 1;
  std::vector<std::size_t> checkpoints;  // grid indices at which states are kept
  unsigned threads = 0;                  // 0 = hardware concurrency
};

struct EnsembleResult {
  std::vector<std::size_t> checkpoints;
  /// psis[c][p]: path p at checkpoint c. Path p always uses derive_seed(master_seed, p).
  std::vector<std::vector<Eigen::VectorXcd>> psis;
  std::vector<AveragedState> averages;
};

EnsembleResult run_trajectory_ensemble(const OCoefficientSeries& F, const FockOperators& ops,
                                       const LinearizedSystem& sys, const KernelSpec& kernel,
                                       const Eigen::VectorXcd& psi0, const TimeGrid& grid,
                                       const EnsembleOptions& options);

MomentState moments_from_rho(const Eigen::MatrixXcd& rho, const FockOperators& ops);

/// Half the trace norm of rho - sigma.
double trace_distance(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& sigma);

/// Population of the top Fock level of either mode.
double leakage(const Eigen::MatrixXcd& rho, const FockDims& dims);

// Binary snapshot: uint32 na, uint32 nb, float64 t, then row-major (re, im) float64 pairs,
// all little-endian.
void write_snapshot(std::ostream& out, const FockDims& dims, double t, const Eigen::MatrixXcd& rho);
void write_snapshot(const std::filesystem::path& path, const FockDims& dims, double t, const Eigen::MatrixXcd& rho);
struct Snapshot {
  FockDims dims;
  double t = 0.0;
  Eigen::MatrixXcd rho;
};
Snapshot read_snapshot(std::istream& in);

}  // namespace nmopto
