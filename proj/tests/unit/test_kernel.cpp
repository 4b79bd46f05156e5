#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <limits>
#include <sstream>

#include "nmopto/errors.hpp"
#include "nmopto/kernel.hpp"

using namespace nmopto;

TEST_CASE("OU kernel values and Hermitian symmetry") {
  CHECK(std::abs(eval_kernel(OUKernel{2, 1, 0}, 4.0, 4.0) - 1.0) < 1e-15);
  CHECK(std::abs(eval_kernel(OUKernel{2, 2, 0}, 1.0, 0.0) - 2.0 * std::exp(-2.0)) < 1e-15);
  const KernelSpec k = OUKernel{1, 0.6, 1};
  CHECK(std::abs(eval_kernel(k, 3, 1) - std::conj(eval_kernel(k, 1, 3))) < 1e-15);
  CHECK_THROWS_AS(eval_kernel(MarkovKernel{1}, 1, 0), DomainError);
}

TEST_CASE("Lorentzian spectral density integrates to alpha(t, t)") {
  const OUKernel k{2.0, 0.7, 0.4};
  CHECK(spectral_density(k, k.Omega) == doctest::Approx(k.Gamma / (2 * M_PI)).epsilon(1e-14));
  const double inf = std::numeric_limits<double>::infinity();
  const double total = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [&](double w) { return spectral_density(k, w); }, -inf, inf, 15, 1e-12);
  CHECK(std::abs(total / k.alpha0() - 1.0) < 1e-6);

  // Narrow line: half width at half maximum equals gamma.
  const OUKernel narrow{2.0 * 1.0 / 0.01, 0.01, 0.0};
  const double half = 0.5 * spectral_density(narrow, 0.0);
  const auto [lo, hi] = boost::math::tools::bisect([&](double w) { return spectral_density(narrow, w) - half; }, 0.0,
                                                   1.0, boost::math::tools::eps_tolerance<double>(50));
  CHECK(0.5 * (lo + hi) == doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("tabulated kernels interpolate and round-trip through the text format") {
  const TabulatedKernel t = tabulate(OUKernel{2, 0.5, 1}, 0.01, 501);
  CHECK(t.max_lag() == doctest::Approx(5.0));
  CHECK(std::abs(t.at_lag(1.234) - OUKernel{2, 0.5, 1}.at_lag(1.234)) < 2e-5);
  std::stringstream ss;
  write_tabulated_kernel(ss, t);
  const TabulatedKernel back = read_tabulated_kernel(ss);
  REQUIRE(back.values.size() == t.values.size());
  CHECK(back.dlag == doctest::Approx(t.dlag).epsilon(1e-15));
  for (std::size_t i = 0; i < t.values.size(); ++i) CHECK(back.values[i] == t.values[i]);

  std::stringstream bad("lag re im\n0 1 0\n0.1 0.5 0\n0.3 0.2 0\n");
  CHECK_THROWS_AS(read_tabulated_kernel(bad), ConfigError);
  std::stringstream offset("lag re im\n0.1 1 0\n0.2 0.5 0\n");
  CHECK_THROWS_AS(read_tabulated_kernel(offset), ConfigError);
}

namespace {

// Empirical M[z*_t z_s] at the last grid point for several lags, with standard errors.
struct LagEstimate {
  std::vector<cplx> mean;
  std::vector<double> se;
};

LagEstimate lag_covariance(const KernelSpec& k, const TimeGrid& g, std::size_t samples, NoiseMethod method,
                           const std::vector<std::size_t>& lags, std::uint64_t master) {
  std::vector<cplx> sum(lags.size());
  std::vector<double> sum2(lags.size());
  for (std::size_t n = 0; n < samples; ++n) {
    const auto p = sample_noise_path(k, g, derive_seed(master, n), method);
    for (std::size_t i = 0; i < lags.size(); ++i) {
      const cplx v = p.values[g.steps] * std::conj(p.values[g.steps - lags[i]]);
      sum[i] += v;
      sum2[i] += std::norm(v);
    }
  }
  LagEstimate e;
  const auto m = static_cast<double>(samples);
  for (std::size_t i = 0; i < lags.size(); ++i) {
    e.mean.push_back(sum[i] / m);
    e.se.push_back(std::sqrt((sum2[i] / m - std::norm(sum[i] / m)) / m));
  }
  return e;
}

}  // namespace

TEST_CASE("colored noise reproduces the kernel covariance") {
  const OUKernel k{2, 1, 0};
  const TimeGrid g{0.05, 400};
  const std::vector<std::size_t> lags{0, 1, 5, 20, 60};
  const auto rec = lag_covariance(k, g, 10000, NoiseMethod::recursion, lags, 11);
  for (std::size_t i = 0; i < lags.size(); ++i) {
    const cplx expect = std::conj(k.at_lag(g.t(lags[i])));
    CHECK(std::abs(rec.mean[i] - expect) < 5 * rec.se[i] + 1e-12);
  }

  // The factorization path samples the same process.
  const TimeGrid gs{0.05, 100};
  const auto a = lag_covariance(k, gs, 3000, NoiseMethod::recursion, lags, 21);
  const auto b = lag_covariance(k, gs, 3000, NoiseMethod::exact, lags, 22);
  for (std::size_t i = 0; i < lags.size(); ++i)
    CHECK(std::abs(a.mean[i] - b.mean[i]) < 5 * std::hypot(a.se[i], b.se[i]));
}

TEST_CASE("complex central frequency follows the conjugate convention in both samplers") {
  const OUKernel k{2, 1, 1.5};
  const TimeGrid g{0.05, 80};
  const std::vector<std::size_t> lags{10};
  const cplx expect = std::conj(k.at_lag(g.t(10)));
  for (auto method : {NoiseMethod::recursion, NoiseMethod::exact}) {
    const auto e = lag_covariance(k, g, 4000, method, lags, 5);
    CHECK(std::abs(e.mean[0] - expect) < 5 * e.se[0]);
  }
}

TEST_CASE("noise paths are deterministic per seed and vanish for zero coupling") {
  const TimeGrid g{0.01, 300};
  const auto p1 = sample_noise_path(OUKernel{2, 0.6, 0}, g, derive_seed(9, 3));
  const auto p2 = sample_noise_path(OUKernel{2, 0.6, 0}, g, derive_seed(9, 3));
  CHECK(p1.values == p2.values);
  CHECK(derive_seed(9, 3) != derive_seed(9, 4));
  for (const auto& v : sample_noise_path(OUKernel{0, 0.6, 0}, g, 1).values) CHECK(v == cplx{});
  for (const auto& v : sample_noise_path(MarkovKernel{0}, g, 1).values) CHECK(v == cplx{});
}

TEST_CASE("white noise has variance Gamma / dt per step") {
  const TimeGrid g{0.02, 20000};
  const auto p = sample_noise_path(MarkovKernel{1.5}, g, 3);
  CHECK(p.white);
  CHECK(p.values.size() == g.steps);
  double s = 0;
  for (const auto& v : p.values) s += std::norm(v);
  CHECK(s / static_cast<double>(p.values.size()) == doctest::Approx(1.5 / 0.02).epsilon(0.03));
}
