#pragma once

// Independent reference computations used only by the tests. They favour
// brute force and long double over speed.

#include <cmath>
#include <random>
#include <vector>

#include "synth/dist.hpp"

namespace oracle {

inline long double plogp_sum(const std::vector<long double>& v) {
  long double h = 0;
  for (long double x : v)
    if (x > 0) h -= x * std::log(x);
  return h;
}

inline double h2_bits(double x) {
  long double h = 0;
  if (x > 0) h -= x * std::log2(static_cast<long double>(x));
  if (x < 1) h -= (1 - x) * std::log2(static_cast<long double>(1 - x));
  return static_cast<double>(h);
}

inline double h2_nats(double x) { return h2_bits(x) * std::log(2.0); }

/// Random pmf with optional zero entries.
inline Eigen::VectorXd random_mass(std::mt19937_64& rng, Eigen::Index k, double zero_prob = 0.0) {
  std::exponential_distribution<double> e(1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd v(k);
  for (Eigen::Index i = 0; i < k; ++i) v(i) = u(rng) < zero_prob ? 0.0 : e(rng);
  if (v.sum() == 0.0) v(0) = 1.0;
  return v / v.sum();
}

inline Eigen::MatrixXd random_joint_mass(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c,
                                         double zero_prob = 0.0) {
  Eigen::VectorXd v = random_mass(rng, r * c, zero_prob);
  return v.reshaped(r, c);
}

/// Best objective over a grid of the one-parameter family of 2x2 couplings.
inline double scan_2x2(double a0, double b0, const Eigen::Matrix2d& cost, bool maximize,
                       int steps = 200000) {
  const double lo = std::max(0.0, a0 + b0 - 1.0), hi = std::min(a0, b0);
  double best = maximize ? -1e300 : 1e300;
  for (int s = 0; s <= steps; ++s) {
    const double t = lo + (hi - lo) * s / steps;
    const double q00 = t, q01 = a0 - t, q10 = b0 - t, q11 = 1.0 - a0 - b0 + t;
    const double v = q00 * cost(0, 0) + q01 * cost(0, 1) + q10 * cost(1, 0) + q11 * cost(1, 1);
    best = maximize ? std::max(best, v) : std::min(best, v);
  }
  return best;
}

}  // namespace oracle

namespace oracle {

/// DSBS constraint pair in bits from the closed form, evaluated in long double.
struct DsbsPair {
  long double r, s, s_tv;
};

inline DsbsPair dsbs_pair(double p, double a) {
  using L = long double;
  auto h2 = [](L x) {
    L h = 0;
    if (x > 0) h -= x * std::log2(x);
    if (x < 1) h -= (1 - x) * std::log2(1 - x);
    return h;
  };
  const L b = (L(p) - a) / (1 - 2 * L(a));
  const L a0 = (1 - L(p)) / 2, b0 = L(p) / 2;
  return {1 - h2(a), std::log2(1 / a0) + (a + b) * std::log2(a0 / b0) - h2(a) - h2(b),
          1 + h2(p) - h2(a) - h2(b)};
}

/// min over a in [0,p] of max(r(a), s(a) - r0), in bits: dense grid, then
/// golden-section refinement around the best grid cell.
inline double dsbs_boundary_bits(double p, double r0, bool tv = false) {
  auto g = [&](long double a) {
    const DsbsPair d = dsbs_pair(p, static_cast<double>(a));
    return std::max(d.r, (tv ? d.s_tv : d.s) - r0);
  };
  const int N = 20000;
  int best = 0;
  long double bv = g(0);
  for (int i = 1; i <= N; ++i) {
    const long double v = g(static_cast<long double>(p) * i / N);
    if (v < bv) {
      bv = v;
      best = i;
    }
  }
  long double lo = static_cast<long double>(p) * std::max(best - 1, 0) / N;
  long double hi = static_cast<long double>(p) * std::min(best + 1, N) / N;
  const long double phi = (std::sqrt(5.0L) - 1) / 2;
  for (int it = 0; it < 200; ++it) {
    const long double m1 = hi - phi * (hi - lo), m2 = lo + phi * (hi - lo);
    if (g(m1) < g(m2)) hi = m2;
    else lo = m1;
  }
  return static_cast<double>(std::min(bv, g((lo + hi) / 2)));
}

}  // namespace oracle
