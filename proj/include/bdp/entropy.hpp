#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bdp/errors.hpp"
#include "bdp/kinetics.hpp"
#include "bdp/numeric.hpp"

namespace bdp {

struct EntropyValue {
  double value = 0.0;
  double tail_bound = 0.0;  // certified bound on the truncated part of sum_i Q_i z^i
};

/// H(c | c^z) = sum_i { c_i (ln(c_i / (Q_i z^i)) - 1) + Q_i z^i }, with 0 ln 0 = 0.
///
/// The reference sum sum_i Q_i z^i is computed once per (kernel, z); the
/// evaluator can then be applied to many concentration vectors.
class RelativeEntropy {
 public:
  /// `max_size` presizes the log Q_i table; longer inputs are still handled.
  RelativeEntropy(const RateKernel& kernel, double z, std::int64_t max_size = 64,
                  const SeriesOptions& opts = default_options())
      : kernel_(kernel), z_(z), log_z_(std::log(z)) {
    if (!(z > 0.0)) throw NumericalError("relative entropy: z must be positive");
    log_q_ = detailed_balance_coefficients(kernel, std::max<std::int64_t>(max_size, 1));
    reference_ = sum_equilibrium_series(kernel, z, 0, 1, opts);
    if (!reference_.converged()) {
      throw DivergentReference("relative entropy: sum_i Q_i z^i diverges at z = " + format_double(z) +
                               " (z above the critical activity)");
    }
  }

  static SeriesOptions default_options() {
    SeriesOptions o;
    o.tol = 1e-15;
    return o;
  }

  double z() const noexcept { return z_; }

  /// sum_{i >= 1} Q_i z^i (partial sum; its tail bound is reference_tail()).
  double reference_sum() const noexcept { return reference_.value; }
  double reference_tail() const noexcept { return reference_.tail_bound; }

  EntropyValue operator()(std::span<const double> c) const {
    std::vector<double> longer;
    if (c.size() > log_q_.size()) longer = detailed_balance_coefficients(kernel_, static_cast<std::int64_t>(c.size()));
    const std::vector<double>& log_q = longer.empty() ? log_q_ : longer;
    NeumaierSum s;
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double ci = c[k];
      if (ci < 0.0 || !std::isfinite(ci)) {
        throw NumericalError("relative entropy: c_" + std::to_string(k + 1) + " must be nonnegative");
      }
      if (ci == 0.0) continue;
      const double log_ref = log_q[k] + static_cast<double>(k + 1) * log_z_;
      s += ci * (std::log(ci) - log_ref - 1.0);
    }
    s += reference_.value;
    return {s.value(), reference_.tail_bound};
  }

 private:
  RateKernel kernel_;
  double z_;
  double log_z_;
  SeriesResult reference_;
  std::vector<double> log_q_;
};

inline EntropyValue relative_entropy(std::span<const double> c, const RateKernel& kernel, double z,
                                     const SeriesOptions& opts = RelativeEntropy::default_options()) {
  return RelativeEntropy(kernel, z, static_cast<std::int64_t>(c.size()), opts)(c);
}

}  // namespace bdp
