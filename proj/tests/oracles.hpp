#pragma once

// Reference computations that share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

namespace oracle {

/// p(n) by Euler's pentagonal-number recurrence.
inline std::vector<std::uint64_t> partition_numbers(int n_max) {
  std::vector<std::uint64_t> p(static_cast<std::size_t>(n_max + 1), 0);
  p[0] = 1;
  for (int n = 1; n <= n_max; ++n) {
    std::int64_t acc = 0;
    for (int k = 1;; ++k) {
      const int g1 = k * (3 * k - 1) / 2;
      const int g2 = k * (3 * k + 1) / 2;
      if (g1 > n) break;
      const std::int64_t sign = (k % 2 == 1) ? 1 : -1;
      acc += sign * static_cast<std::int64_t>(p[static_cast<std::size_t>(n - g1)]);
      if (g2 <= n) acc += sign * static_cast<std::int64_t>(p[static_cast<std::size_t>(n - g2)]);
    }
    p[static_cast<std::size_t>(n)] = static_cast<std::uint64_t>(acc);
  }
  return p;
}

/// All partitions of n as decreasing part lists, generated by brute force
/// over count vectors and sorted lexicographically.
inline std::vector<std::vector<int>> brute_partitions(int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> counts(static_cast<std::size_t>(n + 1), 0);
  std::function<void(int, int)> rec = [&](int size, int remaining) {
    if (size == 0) {
      if (remaining == 0) {
        std::vector<int> parts;
        for (int s = n; s >= 1; --s) {
          for (int c = 0; c < counts[static_cast<std::size_t>(s)]; ++c) parts.push_back(s);
        }
        out.push_back(parts);
      }
      return;
    }
    for (int c = 0; c * size <= remaining; ++c) {
      counts[static_cast<std::size_t>(size)] = c;
      rec(size - 1, remaining - c * size);
    }
    counts[static_cast<std::size_t>(size)] = 0;
  };
  rec(n, n);
  std::sort(out.begin(), out.end());
  return out;
}

/// zeta(3) = sum_{i <= N} i^-3 plus the midpoint-integral tail 1/(2 (N+1/2)^2).
inline double zeta3(std::int64_t terms = 10'000'000) {
  double s = 0.0, c = 0.0;
  for (std::int64_t i = terms; i >= 1; --i) {
    const double x = 1.0 / (static_cast<double>(i) * static_cast<double>(i) * static_cast<double>(i));
    const double y = x - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  const double h = static_cast<double>(terms) + 0.5;
  return s + 1.0 / (2.0 * h * h);
}

/// Composite Simpson rule with `panels` (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int k = 1; k < panels; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return s * h / 3.0;
}

/// Upper alpha-quantile of chi^2 with k degrees of freedom (Wilson-Hilferty),
/// with z the standard normal quantile.
inline double chi2_quantile(double k, double z) {
  const double a = 2.0 / (9.0 * k);
  return k * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

/// Stationary vector of a small dense generator by power iteration on the
/// uniformised chain P = I + G / Lambda.
inline std::vector<double> uniformised_stationary(const std::vector<std::vector<double>>& gen, int iterations) {
  const std::size_t n = gen.size();
  double lambda = 0.0;
  for (std::size_t i = 0; i < n; ++i) lambda = std::max(lambda, -gen[i][i]);
  lambda *= 1.05;
  std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n);
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = pi[j];
      for (std::size_t i = 0; i < n; ++i) s += pi[i] * gen[i][j] / lambda;
      next[j] = s;
    }
    pi.swap(next);
  }
  return pi;
}

}  // namespace oracle
