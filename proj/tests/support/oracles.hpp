#pragma once

// Independent reference computations used by the unit and acceptance suites.
// Nothing here calls into the code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "thermoloss/rng.hpp"

namespace thermoloss::testing {

// Minimum over all permutations of (1/n) sum_k ||x_k - y_sigma(k)||^2.
inline double brute_force_w2(const std::vector<std::vector<double>>& x,
                             const std::vector<std::vector<double>>& y) {
  const std::size_t n = x.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < x[k].size(); ++i) {
        const double d = x[k][i] - y[perm[k]][i];
        s += d * d;
      }
    }
    best = std::min(best, s / static_cast<double>(n));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Central differences of f at x, one coordinate at a time.
inline std::vector<double> central_differences(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double step) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = f(x);
    x[i] = orig - step;
    const double down = f(x);
    x[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

// max_i |a_i - b_i| / max(|b|_inf, floor). A global scale keeps components
// that are analytically zero from dominating the comparison.
inline double max_relative_error(const std::vector<double>& analytic,
                                 const std::vector<double>& numeric,
                                 double floor = 1e-8) {
  double scale = floor;
  for (double v : numeric) scale = std::max(scale, std::abs(v));
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

inline std::vector<std::vector<double>> random_points(Rng& rng, std::size_t n,
                                                      std::size_t d, double lo = 0.0,
                                                      double hi = 1.0) {
  std::vector<std::vector<double>> pts(n, std::vector<double>(d));
  for (auto& p : pts)
    for (auto& v : p) v = rng.uniform(lo, hi);
  return pts;
}

}  // namespace thermoloss::testing
