#pragma once

// Exact stationary law of the stochastic process on a fixed-mass space:
//     Pi(c) proportional to prod_i (n/rho Q_i z^i)^{x_i} / x_i!  exp(-(n/rho) Q_i z^i)
// together with the non-equilibrium potential -(rho/n) ln Pi and its
// decomposition into relative entropy, Stirling remainder and ln B_n^z.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bdp/entropy.hpp"
#include "bdp/errors.hpp"
#include "bdp/kinetics.hpp"
#include "bdp/numeric.hpp"
#include "bdp/ssa.hpp"
#include "bdp/state.hpp"

namespace bdp {

namespace detail {

// -(n/rho) sum_{i <= n} Q_i z^i, the state-independent part of every log weight.
inline double log_weight_constant(std::span<const double> log_q, std::int64_t n, double rho, double z) {
  const double log_z = std::log(z);
  NeumaierSum s;
  for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) {
    s += std::exp(log_q[k] + static_cast<double>(k + 1) * log_z);
  }
  return -(static_cast<double>(n) / rho) * s.value();
}

// sum_i [x_i ln((n/rho) Q_i z^i) - ln x_i!] over a decreasing part list.
inline double log_weight_state_part(std::span<const std::int64_t> parts, std::span<const double> log_q,
                                    double log_scale, double log_z) {
  double s = 0.0;
  std::size_t k = 0;
  while (k < parts.size()) {
    const std::int64_t size = parts[k];
    std::size_t run = k;
    while (run < parts.size() && parts[run] == size) ++run;
    const auto x = static_cast<double>(run - k);
    s += x * (log_scale + log_q[static_cast<std::size_t>(size - 1)] + static_cast<double>(size) * log_z) -
         std::lgamma(x + 1.0);
    k = run;
  }
  return s;
}

}  // namespace detail

/// log of the unnormalised weight prod_{i<=n} (n/rho Q_i z^i)^{x_i}/x_i! e^{-(n/rho)Q_i z^i}.
inline double log_stationary_weight(const Configuration& cfg, const RateKernel& kernel, double z) {
  if (!(z > 0.0)) throw NumericalError("log_stationary_weight: z must be positive");
  const std::int64_t n = cfg.n();
  const double rho = cfg.rho();
  const auto log_q = detailed_balance_coefficients(kernel, n);
  const double log_scale = std::log(static_cast<double>(n) / rho);
  const double log_z = std::log(z);
  double s = 0.0;
  for (auto [size, count] : cfg.counts()) {
    const auto x = static_cast<double>(count);
    s += x * (log_scale + log_q[static_cast<std::size_t>(size - 1)] + static_cast<double>(size) * log_z) -
         std::lgamma(x + 1.0);
  }
  return s + detail::log_weight_constant(log_q, n, rho, z);
}

/// Stationary probabilities over the canonical enumeration of the state space.
class StationaryTable {
 public:
  StationaryTable(std::int64_t n, double rho, const RateKernel& kernel, double z,
                  std::int64_t cap = kDefaultEnumerationCap)
      : space_(n, cap), rho_(rho), z_(z), kernel_(kernel) {
    if (!(rho > 0.0)) throw InvalidState("stationary table: rho must be positive");
    if (!(z > 0.0)) throw NumericalError("stationary table: z must be positive");
    log_q_ = detailed_balance_coefficients(kernel, n);
    const double log_scale = std::log(static_cast<double>(n) / rho);
    const double log_z = std::log(z);
    const auto count = static_cast<std::size_t>(space_.size());
    log_prob_.reserve(count);
    space_.for_each([&](std::span<const std::int64_t> parts) {
      log_prob_.push_back(detail::log_weight_state_part(parts, log_q_, log_scale, log_z));
    });
    log_constant_ = detail::log_weight_constant(log_q_, n, rho, z);
    log_state_sum_ = log_sum_exp(log_prob_);
    prob_.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
      log_prob_[k] -= log_state_sum_;
      prob_[k] = std::exp(log_prob_[k]);
    }
  }

  std::int64_t n() const noexcept { return space_.n(); }
  double rho() const noexcept { return rho_; }
  double z() const noexcept { return z_; }
  const RateKernel& kernel() const noexcept { return kernel_; }
  const PartitionSpace& space() const noexcept { return space_; }
  std::size_t size() const noexcept { return prob_.size(); }
  std::span<const double> log_q() const noexcept { return log_q_; }

  std::span<const double> probabilities() const noexcept { return prob_; }
  std::span<const double> log_probabilities() const noexcept { return log_prob_; }

  /// Unnormalised log weight of state k, including the exp(-(n/rho) sum Q_i z^i) factor.
  double log_weight(std::size_t k) const { return log_prob_[k] + log_bn(); }

  /// ln B_n^z at the table's own z.
  double log_bn() const noexcept { return log_state_sum_ + log_constant_; }

  /// ln B_n^{z'} for another activity. On the fixed-mass space every state
  /// part scales by (z'/z)^n, so only the constant factor needs recomputing.
  double log_bn_at(double z_other) const {
    if (!(z_other > 0.0)) throw NumericalError("log_bn_at: z must be positive");
    const double shift = static_cast<double>(n()) * (std::log(z_other) - std::log(z_));
    return log_state_sum_ + shift + detail::log_weight_constant(log_q_, n(), rho_, z_other);
  }

  std::size_t index_of(const Configuration& cfg) const {
    if (cfg.n() != n() || cfg.rho() != rho_) {
      throw InvalidState("stationary table: configuration " + cfg.to_literal() + " is not in the space (n = " +
                         std::to_string(n()) + ", rho = " + format_double(rho_) + ")");
    }
    return static_cast<std::size_t>(space_.rank(cfg));
  }

  Configuration state(std::size_t k) const { return space_.configuration(k, rho_); }

  double probability(const Configuration& cfg) const { return prob_[index_of(cfg)]; }
  double log_probability(const Configuration& cfg) const { return log_prob_[index_of(cfg)]; }

 private:
  PartitionSpace space_;
  double rho_;
  double z_;
  RateKernel kernel_;
  std::vector<double> log_q_;
  std::vector<double> log_prob_;
  std::vector<double> prob_;
  double log_state_sum_ = 0.0;
  double log_constant_ = 0.0;
};

inline StationaryTable stationary_table(std::int64_t n, double rho, const RateKernel& kernel, double z,
                                        std::int64_t cap = kDefaultEnumerationCap) {
  return StationaryTable(n, rho, kernel, z, cap);
}

/// max |A_i Pi(c) - B_{i+1} Pi(c')| / (A_i Pi(c)) over every state c and
/// every feasible forward channel, c' being the image of the jump.
inline double detailed_balance_check(const StationaryTable& table) {
  const std::int64_t n = table.n();
  const double scale = table.rho() / static_cast<double>(n);
  const auto& kernel = table.kernel();
  const auto& space = table.space();
  const auto log_p = table.log_probabilities();
  std::vector<double> a(static_cast<std::size_t>(n + 1), 0.0), b(static_cast<std::size_t>(n + 1), 0.0);
  for (std::int64_t i = 1; i <= n; ++i) {
    a[static_cast<std::size_t>(i)] = kernel.a(i);
    if (i >= 2) b[static_cast<std::size_t>(i)] = kernel.b(i);
  }
  std::vector<std::int64_t> x(static_cast<std::size_t>(n + 2), 0);
  double worst = 0.0;
  std::size_t k = 0;
  space.for_each([&](std::span<const std::int64_t> parts) {
    std::fill(x.begin(), x.end(), 0);
    for (auto p : parts) ++x[static_cast<std::size_t>(p)];
    const auto x1 = static_cast<double>(x[1]);
    for (std::int64_t i = 1; i < n; ++i) {
      const auto xi = static_cast<double>(x[static_cast<std::size_t>(i)]);
      const double fwd = i == 1 ? a[1] * scale * x1 * (x1 - 1.0) : a[static_cast<std::size_t>(i)] * scale * x1 * xi;
      if (!(fwd > 0.0)) continue;
      x[1] -= 1;
      x[static_cast<std::size_t>(i)] -= 1;
      x[static_cast<std::size_t>(i + 1)] += 1;
      const auto k2 = static_cast<std::size_t>(space.rank(std::span<const std::int64_t>(x.data(), static_cast<std::size_t>(n + 1))));
      const double bwd = b[static_cast<std::size_t>(i + 1)] * static_cast<double>(x[static_cast<std::size_t>(i + 1)]);
      x[static_cast<std::size_t>(i + 1)] -= 1;
      x[static_cast<std::size_t>(i)] += 1;
      x[1] += 1;
      const double log_ratio = (std::log(bwd) + log_p[k2]) - (std::log(fwd) + log_p[k]);
      worst = std::max(worst, std::abs(std::expm1(log_ratio)));
    }
    ++k;
  });
  return worst;
}

/// Stationary vector of the generator assembled from channel_rates and
/// apply_jump over the enumerated states, by a dense linear solve of
/// pi Q = 0, sum pi = 1. Independent of StationaryTable.
inline std::vector<double> ctmc_stationary_oracle(std::int64_t n, double rho, const RateKernel& kernel,
                                                  std::int64_t cap = 12) {
  const auto states = enumerate_states(n, rho, cap);
  const auto count = static_cast<Eigen::Index>(states.size());
  std::map<Configuration::Counts, Eigen::Index> index;
  for (Eigen::Index k = 0; k < count; ++k) index.emplace(states[static_cast<std::size_t>(k)].counts(), k);

  Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(count, count);
  for (Eigen::Index k = 0; k < count; ++k) {
    const auto& s = states[static_cast<std::size_t>(k)];
    for (const auto& ch : channel_rates(s, kernel)) {
      const auto target = apply_jump(s, ch.reaction.index, ch.reaction.direction);
      const auto j = index.at(target.counts());
      gen(k, j) += ch.rate;
      gen(k, k) -= ch.rate;
    }
  }
  Eigen::MatrixXd lhs = gen.transpose();
  lhs.row(count - 1).setOnes();
  Eigen::VectorXd rhs_vec = Eigen::VectorXd::Zero(count);
  rhs_vec(count - 1) = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
  if (lu.rank() < count) {
    throw ReducibleChain("ctmc oracle: singular balance system (rank " + std::to_string(lu.rank()) + " of " +
                         std::to_string(count) + ")");
  }
  const Eigen::VectorXd pi = lu.solve(rhs_vec);
  return {pi.data(), pi.data() + count};
}

inline double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw NumericalError("total_variation: size mismatch");
  NeumaierSum s;
  for (std::size_t k = 0; k < p.size(); ++k) s += std::abs(p[k] - q[k]);
  return 0.5 * s.value();
}

/// R_n(c) = (rho/n) sum_i { ln x_i! - x_i ln x_i + x_i }, x_i = (n/rho) c_i, 0 ln 0 = 0.
inline double stirling_remainder(const Configuration& cfg) {
  NeumaierSum s;
  for (auto [size, count] : cfg.counts()) {
    const auto x = static_cast<double>(count);
    s += std::lgamma(x + 1.0) - x * std::log(x) + x;
  }
  return cfg.rho() / static_cast<double>(cfg.n()) * s.value();
}

/// -(rho/n) ln Pi(c).
inline double nonequilibrium_potential(const Configuration& cfg, const StationaryTable& table) {
  return -(cfg.rho() / static_cast<double>(cfg.n())) * table.log_probability(cfg);
}

struct EntropyReport {
  double entropy = 0.0;         // H(c | c^z)
  double tail = 0.0;            // sum_{i > n} Q_i z^i
  double stirling = 0.0;        // R_n(c)
  double scaled_log_bn = 0.0;   // (rho/n) ln B_n^z
  double reconstructed = 0.0;   // entropy - tail + stirling + scaled_log_bn
  double direct = 0.0;          // -(rho/n) ln Pi(c) from the table
  double tail_bound = 0.0;      // certificate on the truncated series
};

/// Evaluates each term of
///     -(rho/n) ln Pi(c) = H(c|c^z) - sum_{i>n} Q_i z^i + R_n(c) + (rho/n) ln B_n^z
/// independently and throws InternalInconsistency if the two sides differ by
/// more than `tol`.
inline EntropyReport potential_decomposition(const Configuration& cfg, const RateKernel& kernel, double z,
                                             const StationaryTable& table, double tol = 1e-10) {
  if (!(kernel == table.kernel())) throw ConfigError("potential_decomposition: kernel differs from the table's kernel");
  const std::int64_t n = cfg.n();
  const double scale = cfg.rho() / static_cast<double>(n);
  EntropyReport rep;
  const auto c = cfg.to_concentrations();
  const RelativeEntropy entropy(kernel, z, static_cast<std::int64_t>(c.size()));
  rep.entropy = entropy(c).value;
  const auto tail = sum_equilibrium_series(kernel, z, 0, n + 1, RelativeEntropy::default_options());
  if (!tail.converged()) throw DivergentReference("potential_decomposition: tail sum diverges");
  rep.tail = tail.value;
  rep.tail_bound = tail.tail_bound + entropy.reference_tail();
  rep.stirling = stirling_remainder(cfg);
  rep.scaled_log_bn = scale * table.log_bn_at(z);
  rep.reconstructed = rep.entropy - rep.tail + rep.stirling + rep.scaled_log_bn;
  rep.direct = nonequilibrium_potential(cfg, table);
  if (!(std::abs(rep.reconstructed - rep.direct) <= tol)) {
    throw InternalInconsistency("potential_decomposition: reconstruction " + format_double(rep.reconstructed) +
                                " differs from the direct potential " + format_double(rep.direct) + " for " +
                                cfg.to_literal());
  }
  return rep;
}

}  // namespace bdp
