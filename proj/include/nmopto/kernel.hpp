#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <variant>
#include <vector>

#include "nmopto/grid.hpp"

namespace nmopto {

/// Exponential (Ornstein-Uhlenbeck) bath correlation (Gamma*gamma/2) exp(-(gamma + i Omega)|t - s|).
struct OUKernel {
  double Gamma = 2.0;  // environmental decay rate
  double gamma = 1.0;  // inverse memory time
  double Omega = 0.0;  // environment central frequency

  cplx mu() const { return {gamma, Omega}; }
  double alpha0() const { return 0.5 * Gamma * gamma; }
  /// alpha(t, s) for lag = t - s >= 0.
  cplx at_lag(double lag) const;
};

/// Memoryless bath Gamma * delta(t - s); the boundary integral picks up half the weight.
struct MarkovKernel {
  double Gamma = 2.0;
};

/// alpha(t, s) sampled on lags 0, dlag, 2 dlag, ...; linear interpolation in between.
struct TabulatedKernel {
  double dlag = 0.005;
  std::vector<cplx> values;

  double max_lag() const { return dlag * static_cast<double>(values.empty() ? 0 : values.size() - 1); }
  cplx at_lag(double lag) const;
};

using KernelSpec = std::variant<OUKernel, MarkovKernel, TabulatedKernel>;

bool is_markov(const KernelSpec& k);

/// alpha(t, s); Hermitian: alpha(s, t) = conj(alpha(t, s)). Throws for the Markov kernel.
cplx eval_kernel(const KernelSpec& k, double t, double s);

/// Lorentzian J(omega) paired with the OU kernel: integrates to alpha(t, t).
double spectral_density(const OUKernel& k, double omega);

/// Tabulates any non-Markov kernel on lags m * dlag, m = 0..count-1.
TabulatedKernel tabulate(const KernelSpec& k, double dlag, std::size_t count);

/// Samples of z*_t with M[z*_t z_s] = conj(alpha(t, s)) (equivalently M[z_t z*_s] = alpha(t, s)).
/// For white (Markov) noise, values[k] is the mean of z* over [t_k, t_k+1).
struct NoisePath {
  TimeGrid grid;
  std::vector<cplx> values;
  bool white = false;
};

enum class NoiseMethod {
  automatic,  // recursion for OU, piecewise white noise for Markov, factorization otherwise
  exact,      // factorize the covariance alpha(t_i, t_j)
  recursion,  // stationary first-order recursion (OU only)
};

NoisePath sample_noise_path(const KernelSpec& k, const TimeGrid& grid, std::uint64_t seed,
                            NoiseMethod method = NoiseMethod::automatic);

/// Counter-based per-stream seed: the same (master, index) always yields the same stream.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Text format: one header line, then whitespace separated "lag re im" rows on a uniform lag grid.
TabulatedKernel read_tabulated_kernel(std::istream& in);
TabulatedKernel read_tabulated_kernel(const std::filesystem::path& path);
void write_tabulated_kernel(std::ostream& out, const TabulatedKernel& k);

}  // namespace nmopto
