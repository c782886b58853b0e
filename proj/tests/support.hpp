#pragma once

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "stataction/massspring.hpp"
#include "stataction/model.hpp"
#include "stataction/stationary.hpp"

namespace testing_support {

using stataction::Mat;
using stataction::Vec;
namespace ms = stataction::massspring;

inline constexpr double kPi = std::numbers::pi;

inline ms::MassSpringParams mass_spring(double T = 3.0) {
  ms::MassSpringParams p;
  p.mass = 5.0;
  p.kappa = 1.0;
  p.v = -2.0;
  p.T = T;
  return p;
}

/// Horizon T so that ω(T − t) = phase with t = 0.
inline ms::MassSpringParams mass_spring_at_phase(double phase) {
  auto p = mass_spring();
  p.T = phase / p.omega();
  return p;
}

inline Vec vec1(double a) { return Vec::Constant(1, a); }

inline Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

/// Γ as a fixed 2×2 for closed-form exponentials.
inline Mat gamma_of(const ms::MassSpringParams& p) {
  Mat G(2, 2);
  G << 0.0, -1.0 / p.mass, p.kappa, 0.0;
  return G;
}

inline Mat expm(const Mat& A) { return A.exp(); }

/// Positive root of max(h,1)·h = r by bisection.
inline double horizon_bisection(double r) {
  double lo = 0.0;
  double hi = std::max(1.0, r) + 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (std::max(mid, 1.0) * mid < r ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline std::vector<Vec> random_vectors(std::mt19937_64& rng, int count, int dim, double radius) {
  std::uniform_real_distribution<double> d(-radius, radius);
  std::vector<Vec> out;
  for (int k = 0; k < count; ++k) {
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v(i) = d(rng);
    out.push_back(v);
  }
  return out;
}

/// Smooth random directions Σ_k a_k cos(kπ(s−t)/τ) + b_k sin(kπ(s−t)/τ), k ≤ 4.
inline stataction::ControlGrid fourier_direction(std::mt19937_64& rng, const std::vector<double>& times,
                                                 int dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double t = times.front();
  const double tau = times.back() - t;
  stataction::ControlGrid d;
  d.times = times;
  std::vector<std::vector<double>> a(5, std::vector<double>(static_cast<std::size_t>(dim)));
  std::vector<std::vector<double>> b = a;
  for (int k = 0; k <= 4; ++k) {
    for (int i = 0; i < dim; ++i) {
      a[k][i] = n(rng) / (1 + k);
      b[k][i] = n(rng) / (1 + k);
    }
  }
  for (double s : times) {
    Vec u = Vec::Zero(dim);
    for (int k = 0; k <= 4; ++k) {
      for (int i = 0; i < dim; ++i) {
        u(i) += a[k][i] * std::cos(k * kPi * (s - t) / tau) + b[k][i] * std::sin(k * kPi * (s - t) / tau);
      }
    }
    d.u.push_back(u);
  }
  return d;
}

inline double rel_err(double a, double ref) { return std::abs(a - ref) / std::max(1.0, std::abs(ref)); }

}  // namespace testing_support
