#include <doctest.h>

#include <cmath>

#include "nmopto/errors.hpp"
#include "nmopto/params.hpp"

using namespace nmopto;

TEST_CASE("uncoupled cavity mean field is the driven Lorentzian response") {
  PhysicalParams p;
  p.kappa_a = 1.0;
  p.drive = 1.0;
  const auto m = solve_mean_field(p);
  CHECK(std::abs(m.alpha - cplx{0.0, -1.0}) < 1e-12);
  CHECK(std::abs(m.beta) < 1e-12);
  CHECK(m.branch_count == 1);

  p.omega_drive = 1.0;  // detuned by one linewidth
  CHECK(std::norm(solve_mean_field(p).alpha) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("bistable drive yields three intensity roots of the cubic") {
  PhysicalParams p;
  p.g = 0.05;
  p.omega_drive = -2.0;
  p.kappa_a = 0.1;
  const double k = 2 * p.g * p.g / p.omega_m, d = p.bare_detuning();
  bool found = false;
  for (double drive = 0.1; drive < 60.0 && !found; drive += 0.1) {
    p.drive = drive;
    const auto m = solve_mean_field(p);
    if (m.branch_count != 3) continue;
    found = true;
    REQUIRE(m.intensities.size() == 3);
    for (double x : m.intensities) {
      const double cubic = x * ((d + k * x) * (d + k * x) + p.kappa_a * p.kappa_a) - drive * drive;
      CHECK(std::abs(cubic) < 1e-10 * std::max(1.0, drive * drive));
      CHECK(mean_field_at(p, x).residual < 1e-10 * std::max(1.0, drive));
    }
    CHECK(std::norm(m.alpha) == doctest::Approx(m.intensities.front()));
  }
  CHECK(found);
}

TEST_CASE("linearization gives G = |alpha| g and the shifted detuning") {
  PhysicalParams p;
  p.g = 0.01;
  p.omega_drive = 0.98;
  MeanFieldSolution m;
  m.alpha = 10.0;
  const auto s = linearize(p, m);
  CHECK(s.G == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(s.Delta == doctest::Approx(1.0).epsilon(1e-12));

  p.g = 0.0;
  const auto s0 = linearize(p, m);
  CHECK(s0.G == 0.0);
  CHECK(s0.Delta == doctest::Approx(0.98));
  CHECK(bare_detuning_for(1.0, 0.1, 1.0) == doctest::Approx(0.98).epsilon(1e-12));
}

TEST_CASE("mean field rejects a non-positive mechanical frequency") {
  PhysicalParams p;
  p.omega_m = 0.0;
  CHECK_THROWS_AS(solve_mean_field(p), DomainError);
}
