#include "nmopto/grid.hpp"

#include <cmath>

#include "nmopto/errors.hpp"

namespace nmopto {

std::size_t TimeGrid::index_of(double time) const {
  if (time <= 0.0) return 0;
  auto k = static_cast<std::size_t>(std::llround(time / dt));
  return k > steps ? steps : k;
}

TimeGrid TimeGrid::covering(double dt, double t_final) {
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  if (!(t_final >= 0.0)) throw DomainError("final time must be non-negative");
  return TimeGrid{dt, static_cast<std::size_t>(std::llround(t_final / dt))};
}

TimeGrid half_grid(const TimeGrid& g) { return TimeGrid{g.dt / 2.0, 2 * g.steps}; }

std::vector<double> uniform_weights(std::size_t n, double h) {
  std::vector<double> w(n, 0.0);
  switch (n) {
    case 0:
    case 1:
      return w;
    case 2:
      w = {0.5, 0.5};
      break;
    case 3:
      w = {1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0};
      break;
    case 4:
      w = {3.0 / 8.0, 9.0 / 8.0, 9.0 / 8.0, 3.0 / 8.0};
      break;
    case 5:
      w = {14.0 / 45.0, 64.0 / 45.0, 24.0 / 45.0, 64.0 / 45.0, 14.0 / 45.0};
      break;
    default:
      for (auto& x : w) x = 1.0;
      w[0] = w[n - 1] = 3.0 / 8.0;
      w[1] = w[n - 2] = 7.0 / 6.0;
      w[2] = w[n - 3] = 23.0 / 24.0;
      break;
  }
  for (auto& x : w) x *= h;
  return w;
}

void VolterraWeights::build(const std::vector<cplx>& lag_table, std::size_t k, int c2, double h) {
  std::vector<double> w = uniform_weights(k + 1, h);
  double wt = 0.0;
  if (c2 > 0) {
    const double c = 0.5 * c2, L = c * h;
    if (k == 0) {
      w[0] += L / 2;
      wt += L / 2;
    } else {
      // Lagrange interpolant through the last min(k, 2) + 1 nodes and the sliver end, integrated
      // exactly over [t_k, t_k + L] with three-point Gauss-Legendre.
      const std::size_t back = std::min<std::size_t>(k, 2);
      std::vector<double> x;
      for (std::size_t j = back; j > 0; --j) x.push_back(-static_cast<double>(j) * h);
      x.push_back(0.0);
      x.push_back(L);
      constexpr double gx[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
      constexpr double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
      for (std::size_t i = 0; i < x.size(); ++i) {
        double acc = 0.0;
        for (int q = 0; q < 3; ++q) {
          const double s = 0.5 * L * (1.0 + gx[q]);
          double basis = 1.0;
          for (std::size_t j = 0; j < x.size(); ++j)
            if (j != i) basis *= (s - x[j]) / (x[i] - x[j]);
          acc += gw[q] * basis;
        }
        acc *= 0.5 * L;
        if (i + 1 == x.size())
          wt += acc;
        else
          w[k - back + i] += acc;
      }
    }
  }
  wa.resize(k + 1);
  for (std::size_t l = 0; l <= k; ++l) wa[l] = w[l] * lag_table[2 * (k - l) + static_cast<std::size_t>(c2)];
  wb = wt * lag_table[0];
}

cplx VolterraWeights::dot(const cplx* v) const {
  cplx acc{};
  for (std::size_t l = 0; l < wa.size(); ++l) acc += wa[l] * v[l];
  return acc;
}

void fill_midpoints(std::vector<cplx>& v) {
  if (v.size() % 2 == 0) throw DomainError("half-grid series must have an odd length");
  const std::size_t N = v.size() / 2;
  auto g = [&](std::size_t k) { return v[2 * k]; };
  if (N < 3) {
    for (std::size_t k = 0; k < N; ++k) v[2 * k + 1] = 0.5 * (g(k) + g(k + 1));
    return;
  }
  v[1] = (5.0 * g(0) + 15.0 * g(1) - 5.0 * g(2) + g(3)) / 16.0;
  for (std::size_t k = 1; k + 1 < N; ++k) v[2 * k + 1] = midpoint_interp(g(k - 1), g(k), g(k + 1), g(k + 2));
  v[2 * N - 1] = (5.0 * g(N) + 15.0 * g(N - 1) - 5.0 * g(N - 2) + g(N - 3)) / 16.0;
}

namespace {

template <class T>
T pairwise(std::span<const T> v) {
  if (v.size() <= 8) {
    T acc{};
    for (const auto& x : v) acc += x;
    return acc;
  }
  const std::size_t half = v.size() / 2;
  return pairwise(v.first(half)) + pairwise(v.subspan(half));
}

}  // namespace

cplx pairwise_sum(std::span<const cplx> v) { return pairwise(v); }
double pairwise_sum(std::span<const double> v) { return pairwise(v); }

}  // namespace nmopto
