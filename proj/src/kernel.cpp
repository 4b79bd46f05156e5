#include "nmopto/kernel.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "nmopto/errors.hpp"

namespace nmopto {

cplx OUKernel::at_lag(double lag) const { return alpha0() * std::exp(-mu() * lag); }

cplx TabulatedKernel::at_lag(double lag) const {
  if (values.empty()) throw DomainError("empty kernel table");
  const double x = lag / dlag;
  const auto m = static_cast<std::size_t>(std::floor(x));
  if (m + 1 >= values.size()) {
    if (x <= static_cast<double>(values.size() - 1) * (1.0 + 1e-9)) return values.back();
    throw DomainError("lag " + std::to_string(lag) + " beyond kernel table range");
  }
  const double frac = x - static_cast<double>(m);
  return (1.0 - frac) * values[m] + frac * values[m + 1];
}

bool is_markov(const KernelSpec& k) { return std::holds_alternative<MarkovKernel>(k); }

cplx eval_kernel(const KernelSpec& k, double t, double s) {
  if (t < 0.0 || s < 0.0) throw DomainError("kernel times must be non-negative");
  const double lag = std::abs(t - s);
  cplx v;
  if (const auto* ou = std::get_if<OUKernel>(&k)) {
    v = ou->at_lag(lag);
  } else if (const auto* tab = std::get_if<TabulatedKernel>(&k)) {
    v = tab->at_lag(lag);
  } else {
    throw DomainError("the Markov delta kernel has no pointwise value");
  }
  return t >= s ? v : std::conj(v);
}

double spectral_density(const OUKernel& k, double omega) {
  if (!(k.gamma > 0.0)) throw DomainError("gamma must be positive");
  const double d = omega - k.Omega;
  return k.Gamma * k.gamma * k.gamma / (2.0 * std::numbers::pi) / (d * d + k.gamma * k.gamma);
}

TabulatedKernel tabulate(const KernelSpec& k, double dlag, std::size_t count) {
  TabulatedKernel t{dlag, std::vector<cplx>(count)};
  for (std::size_t m = 0; m < count; ++m) t.values[m] = eval_kernel(k, static_cast<double>(m) * dlag, 0.0);
  return t;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 finalizer applied to a Weyl sequence keyed by the master seed
  auto mix = [](std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(master) + 0x9e3779b97f4a7c15ULL * (index + 1));
}

namespace {

// Circular complex Gaussian with E|z|^2 = 1.
struct ComplexNormal {
  std::mt19937_64 rng;
  std::normal_distribution<double> normal{0.0, 1.0};
  explicit ComplexNormal(std::uint64_t seed) : rng(seed) {}
  cplx operator()() {
    const double re = normal(rng);
    const double im = normal(rng);
    return cplx{re, im} * std::numbers::sqrt2 * 0.5;
  }
};

NoisePath ou_recursion(const OUKernel& ou, const TimeGrid& grid, std::uint64_t seed) {
  NoisePath path{grid, std::vector<cplx>(grid.points()), false};
  if (ou.Gamma == 0.0) return path;
  ComplexNormal draw(seed);
  const cplx decay = std::exp(-std::conj(ou.mu()) * grid.dt);
  const double innovation = std::sqrt(ou.alpha0() * (1.0 - std::exp(-2.0 * ou.gamma * grid.dt)));
  path.values[0] = std::sqrt(ou.alpha0()) * draw();
  for (std::size_t k = 1; k < path.values.size(); ++k)
    path.values[k] = decay * path.values[k - 1] + innovation * draw();
  return path;
}

NoisePath factorized(const KernelSpec& k, const TimeGrid& grid, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(grid.points());
  Eigen::MatrixXcd cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) cov(i, j) = eval_kernel(k, grid.t(j), grid.t(i));

  // LDL^H tolerates the semidefinite covariance of smooth kernels on fine grids.
  Eigen::LDLT<Eigen::MatrixXcd> ldlt(cov);
  if (ldlt.info() != Eigen::Success) throw NumericError("kernel covariance factorization failed");
  Eigen::VectorXd d = ldlt.vectorD().real();
  const double scale = std::max(d.cwiseAbs().maxCoeff(), 1e-300);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d(i) < -1e-9 * scale) throw NumericError("kernel covariance is not positive semidefinite");
    d(i) = std::sqrt(std::max(d(i), 0.0));
  }
  ComplexNormal draw(seed);
  Eigen::VectorXcd xi(n);
  for (Eigen::Index i = 0; i < n; ++i) xi(i) = draw() * d(i);
  // cov = P^T L D L^H P  =>  w = P^T L sqrt(D) xi
  Eigen::VectorXcd w = ldlt.matrixL() * xi;
  w = ldlt.transpositionsP().transpose() * w;

  NoisePath path{grid, std::vector<cplx>(static_cast<std::size_t>(n)), false};
  for (Eigen::Index i = 0; i < n; ++i) path.values[static_cast<std::size_t>(i)] = w(i);
  return path;
}

}  // namespace

NoisePath sample_noise_path(const KernelSpec& k, const TimeGrid& grid, std::uint64_t seed, NoiseMethod method) {
  if (const auto* mk = std::get_if<MarkovKernel>(&k)) {
    if (method == NoiseMethod::exact || method == NoiseMethod::recursion)
      throw DomainError("white noise only supports automatic sampling");
    NoisePath path{grid, std::vector<cplx>(grid.steps), true};
    if (mk->Gamma == 0.0) return path;
    ComplexNormal draw(seed);
    const double sd = std::sqrt(mk->Gamma / grid.dt);
    for (auto& v : path.values) v = sd * draw();
    return path;
  }
  const auto* ou = std::get_if<OUKernel>(&k);
  if (method == NoiseMethod::recursion && !ou) throw DomainError("recursion sampling requires an OU kernel");
  if (ou && method != NoiseMethod::exact) return ou_recursion(*ou, grid, seed);
  if (ou && ou->Gamma == 0.0) return NoisePath{grid, std::vector<cplx>(grid.points()), false};
  return factorized(k, grid, seed);
}

TabulatedKernel read_tabulated_kernel(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("kernel table: missing header line");
  std::vector<double> lags;
  TabulatedKernel t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r,") == std::string::npos) continue;
    for (auto& c : line)
      if (c == ',') c = ' ';
    std::istringstream row(line);
    double lag, re, im;
    if (!(row >> lag >> re >> im))
      throw ConfigError("kernel table line " + std::to_string(lineno) + ": expected 'lag re im'");
    lags.push_back(lag);
    t.values.emplace_back(re, im);
  }
  if (lags.size() < 2) throw ConfigError("kernel table needs at least two rows");
  if (lags[0] != 0.0) throw ConfigError("kernel table must start at lag 0");
  t.dlag = lags[1] - lags[0];
  if (!(t.dlag > 0.0)) throw ConfigError("kernel table lags must increase");
  for (std::size_t m = 1; m < lags.size(); ++m)
    if (std::abs(lags[m] - static_cast<double>(m) * t.dlag) > 1e-9 * std::max(1.0, lags[m]))
      throw ConfigError("kernel table line " + std::to_string(m + 2) + ": lags must be uniformly spaced");
  return t;
}

TabulatedKernel read_tabulated_kernel(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open kernel table " + path.string());
  return read_tabulated_kernel(in);
}

void write_tabulated_kernel(std::ostream& out, const TabulatedKernel& k) {
  out << "lag,re,im\n" << std::setprecision(17);
  for (std::size_t m = 0; m < k.values.size(); ++m)
    out << static_cast<double>(m) * k.dlag << ',' << k.values[m].real() << ',' << k.values[m].imag() << '\n';
}

}  // namespace nmopto
