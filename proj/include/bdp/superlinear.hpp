#pragma once

// Superlinear weight phi = int_0^y p, with p piecewise linear through
// (0,0), (1,1), (N_0,2), (N_1,3), ... so that phi(x) = x^2/2 on [0,1],
// phi' = p is concave and phi(i)/i grows without bound.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bdp/errors.hpp"

namespace bdp {

class SuperlinearWeight {
 public:
  /// Thresholds N_0 < N_1 < ... with N_0 >= 2 and nondecreasing gaps,
  /// counting N_0 - 1 as the first gap. Past the last given threshold the
  /// sequence continues with the last gap.
  static SuperlinearWeight build(std::vector<std::int64_t> thresholds) {
    validate(thresholds);
    SuperlinearWeight w;
    w.n_ = std::move(thresholds);
    const auto L = w.n_.size();
    w.gap_ = L >= 2 ? w.n_[L - 1] - w.n_[L - 2] : w.n_[0] - 1;
    w.phi_at_.resize(L);
    w.phi_at_[0] = 0.5 + 1.5 * static_cast<double>(w.n_[0] - 1);
    for (std::size_t m = 1; m < L; ++m) {
      const auto g = static_cast<double>(w.n_[m] - w.n_[m - 1]);
      w.phi_at_[m] = w.phi_at_[m - 1] + g * (static_cast<double>(m + 1) + static_cast<double>(m + 2)) / 2.0;
    }
    return w;
  }

  static void validate(std::span<const std::int64_t> t) {
    if (t.empty()) throw InvalidThresholds("thresholds: at least N_0 is required");
    if (t[0] < 2) throw InvalidThresholds("thresholds: N_0 = " + std::to_string(t[0]) + " must be >= 2");
    std::int64_t prev = 1;
    std::int64_t prev_gap = 0;
    for (std::size_t m = 0; m < t.size(); ++m) {
      const std::int64_t gap = t[m] - prev;
      if (gap <= 0) throw InvalidThresholds("thresholds: N_" + std::to_string(m) + " is not increasing");
      if (gap < prev_gap) {
        throw InvalidThresholds("thresholds: gap N_" + std::to_string(m) + " - N_" + std::to_string(m) +
                                "-1 = " + std::to_string(gap) + " is smaller than the previous gap " +
                                std::to_string(prev_gap));
      }
      prev = t[m];
      prev_gap = gap;
    }
  }

  std::span<const std::int64_t> given_thresholds() const noexcept { return n_; }

  /// N_m, extended past the given list by the last gap.
  std::int64_t threshold(std::int64_t m) const {
    const auto L = static_cast<std::int64_t>(n_.size());
    if (m < L) return n_[static_cast<std::size_t>(m)];
    return n_.back() + (m - L + 1) * gap_;
  }

  /// m with N_m <= y < N_{m+1}; requires y >= N_0.
  std::int64_t segment(double y) const {
    const auto L = static_cast<std::int64_t>(n_.size());
    if (y >= static_cast<double>(n_.back())) {
      return L - 1 + static_cast<std::int64_t>(std::floor((y - static_cast<double>(n_.back())) / static_cast<double>(gap_)));
    }
    const auto it = std::upper_bound(n_.begin(), n_.end(), y, [](double v, std::int64_t e) { return v < static_cast<double>(e); });
    return static_cast<std::int64_t>(it - n_.begin()) - 1;
  }

  /// p(t) = phi'(t).
  double p(double t) const {
    if (t <= 1.0) return std::max(t, 0.0);
    const auto n0 = static_cast<double>(n_[0]);
    if (t <= n0) return 1.0 + (t - 1.0) / (n0 - 1.0);
    const std::int64_t m = segment(t);
    const auto lo = static_cast<double>(threshold(m));
    const auto hi = static_cast<double>(threshold(m + 1));
    return static_cast<double>(m + 2) + (t - lo) / (hi - lo);
  }

  /// phi(y) = int_0^y p, exact on each linear piece.
  double phi(double y) const {
    if (y <= 0.0) return 0.0;
    if (y <= 1.0) return 0.5 * y * y;
    const auto n0 = static_cast<double>(n_[0]);
    if (y <= n0) return 0.5 + (y - 1.0) * (1.0 + p(y)) / 2.0;
    const std::int64_t m = segment(y);
    const auto lo = static_cast<double>(threshold(m));
    return phi_at_threshold(m) + (y - lo) * (static_cast<double>(m + 2) + p(y)) / 2.0;
  }

  /// phi(N_m).
  double phi_at_threshold(std::int64_t m) const {
    const auto L = static_cast<std::int64_t>(n_.size());
    if (m < L) return phi_at_[static_cast<std::size_t>(m)];
    // Each extended segment j (from N_{L-1+j}) has width gap and p rising from L+1+j to L+2+j.
    const auto k = static_cast<double>(m - L + 1);
    const auto l = static_cast<double>(L);
    return phi_at_.back() + static_cast<double>(gap_) * (k * (2.0 * l + 3.0) + k * (k - 1.0)) / 2.0;
  }

  /// alpha_k = 2 for k < N_0, m + 3 for N_m <= k < N_{m+1}.
  std::int64_t alpha(std::int64_t k) const {
    if (k < n_[0]) return 2;
    return segment(static_cast<double>(k)) + 3;
  }

 private:
  SuperlinearWeight() = default;

  std::vector<std::int64_t> n_;
  std::int64_t gap_ = 1;
  std::vector<double> phi_at_;
};

/// N_m as the smallest N >= 2 with sup over the family of
/// sum_{k >= N} (k+1) M_k < 1/(m+3)^3, m = 0..levels-1, then raised as little
/// as needed to satisfy the gap conditions. measures[s][k-1] = M_k of member s.
inline std::vector<std::int64_t> thresholds_from_tail_masses(const std::vector<std::vector<double>>& measures,
                                                             std::int64_t levels) {
  if (levels < 1) throw InvalidThresholds("thresholds: need at least one level");
  std::size_t longest = 0;
  for (const auto& m : measures) longest = std::max(longest, m.size());
  // tail[N] = sup_s sum_{k >= N} (k+1) M_k^s, for N = 1..longest+1.
  std::vector<double> tail(longest + 2, 0.0);
  for (const auto& meas : measures) {
    double acc = 0.0;
    for (std::size_t k = meas.size(); k >= 1; --k) {
      acc += static_cast<double>(k + 1) * meas[k - 1];
      tail[k] = std::max(tail[k], acc);
    }
  }
  std::vector<std::int64_t> out;
  std::int64_t prev = 1;
  std::int64_t prev_gap = 1;
  for (std::int64_t m = 0; m < levels; ++m) {
    const double bound = 1.0 / std::pow(static_cast<double>(m + 3), 3);
    std::int64_t n = 2;
    while (static_cast<std::size_t>(n) < tail.size() && !(tail[static_cast<std::size_t>(n)] < bound)) ++n;
    n = std::max(n, prev + prev_gap);
    prev_gap = n - prev;
    prev = n;
    out.push_back(n);
  }
  return out;
}

}  // namespace bdp
