#include "nmopto/params.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nmopto/errors.hpp"

namespace nmopto {
namespace {

// f(x) = x[(d + k x)^2 + kappa^2] - drive^2 with d = omega - omega_c, k = 2 g^2 / omega_m.
struct IntensityCubic {
  double d, k, kappa2, drive2;

  double value(double x) const {
    const double e = d + k * x;
    return x * (e * e + kappa2) - drive2;
  }
  double slope(double x) const {
    const double e = d + k * x;
    return e * e + kappa2 + 2.0 * k * x * e;
  }
  double scale(double x) const {
    const double e = d + k * x;
    return std::max({std::abs(x) * (e * e + kappa2), drive2, 1e-300});
  }
};

// Real roots of x^3 + b x^2 + c x + e.
std::vector<double> real_cubic_roots(double b, double c, double e) {
  const double p = c - b * b / 3.0;
  const double q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + e;
  const double shift = -b / 3.0;
  const double disc = q * q / 4.0 + p * p * p / 27.0;
  std::vector<double> roots;
  if (disc > 0.0) {
    const double sq = std::sqrt(disc);
    roots.push_back(std::cbrt(-q / 2.0 + sq) + std::cbrt(-q / 2.0 - sq) + shift);
  } else if (p == 0.0) {
    roots.push_back(shift);
  } else {
    const double r = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (p * r), -1.0, 1.0);
    const double phi = std::acos(arg) / 3.0;
    for (int j = 0; j < 3; ++j)
      roots.push_back(r * std::cos(phi - 2.0 * std::numbers::pi * j / 3.0) + shift);
  }
  return roots;
}

double polish(const IntensityCubic& f, double x) {
  for (int it = 0; it < 100; ++it) {
    const double fp = f.slope(x);
    if (fp == 0.0) break;
    const double step = f.value(x) / fp;
    x -= step;
    if (std::abs(step) <= 1e-14 * std::max(1.0, std::abs(x))) break;
  }
  if (std::abs(f.value(x)) > 1e-11 * f.scale(x))
    throw NumericError("mean-field root polishing did not converge");
  return x;
}

}  // namespace

MeanFieldSolution mean_field_at(const PhysicalParams& p, double x) {
  const double d = p.bare_detuning();
  const double beta = -p.g * x / p.omega_m;
  // alpha = i Omega_d / (i (d - 2 g beta) - kappa)
  const cplx denom = kI * (d - 2.0 * p.g * beta) - p.kappa_a;
  MeanFieldSolution m;
  m.alpha = kI * p.drive / denom;
  m.beta = beta;
  const cplx e1 = (kI * (d - p.g * 2.0 * std::real(m.beta)) - p.kappa_a) * m.alpha - kI * p.drive;
  const cplx e2 = -kI * p.omega_m * m.beta - kI * p.g * std::norm(m.alpha);
  m.residual = std::max(std::abs(e1), std::abs(e2));
  return m;
}

MeanFieldSolution solve_mean_field(const PhysicalParams& p) {
  if (!(p.omega_m > 0.0)) throw DomainError("omega_m must be positive");
  if (p.kappa_a < 0.0 || p.drive < 0.0) throw DomainError("kappa_a and drive must be non-negative");

  const double d = p.bare_detuning();
  const IntensityCubic f{d, 2.0 * p.g * p.g / p.omega_m, p.kappa_a * p.kappa_a, p.drive * p.drive};

  std::vector<double> roots;
  if (f.k == 0.0) {
    const double denom = d * d + f.kappa2;
    if (denom == 0.0) {
      if (f.drive2 != 0.0) throw NumericError("resonant undamped drive has no stationary mean field");
      roots.push_back(0.0);
    } else {
      roots.push_back(f.drive2 / denom);
    }
  } else {
    const double k2 = f.k * f.k;
    for (double x : real_cubic_roots(2.0 * d * f.k / k2, (d * d + f.kappa2) / k2, -f.drive2 / k2)) {
      if (x < -1e-9 * std::max(1.0, std::abs(x))) continue;
      roots.push_back(polish(f, std::max(x, 0.0)));
    }
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }),
              roots.end());
  if (roots.empty()) throw NumericError("no real non-negative mean-field intensity");

  MeanFieldSolution m = mean_field_at(p, roots.front());
  m.branch_count = static_cast<int>(roots.size());
  m.intensities = roots;
  for (double x : roots) m.residual = std::max(m.residual, mean_field_at(p, x).residual);
  return m;
}

LinearizedSystem linearize(const PhysicalParams& p, const MeanFieldSolution& m) {
  // The phase of alpha is absorbed into the cavity quadratures, so G is real and non-negative.
  const double G = std::abs(m.alpha) * std::abs(p.g);
  return LinearizedSystem{p.omega_m, p.bare_detuning() + 2.0 * G * G / p.omega_m, G};
}

double bare_detuning_for(double Delta, double G, double omega_m) { return Delta - 2.0 * G * G / omega_m; }

}  // namespace nmopto
