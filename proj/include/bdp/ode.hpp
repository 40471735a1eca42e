#pragma once

// Truncated deterministic Becker-Doring equations
//     J_i = a_i c_1 c_i - b_{i+1} c_{i+1},            i = 1..I-1   (J_I = 0)
//     dc_1/dt = -J_1 - sum_{i=1}^{I-1} J_i
//     dc_i/dt = J_{i-1} - J_i,                         2 <= i <= I
// and an embedded Dormand-Prince 5(4) integrator with dense output.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bdp/entropy.hpp"
#include "bdp/errors.hpp"
#include "bdp/kinetics.hpp"
#include "bdp/numeric.hpp"

namespace bdp {

struct DbdState {
  std::vector<double> c;  // c_1..c_I
  double t = 0.0;
};

struct IntegratorConfig {
  double rtol = 1e-10;
  double atol = 1e-13;
  double max_step = kInf;
  double initial_step = 0.0;  // 0 picks one automatically
  std::int64_t truncation = 64;
  std::vector<double> grid;   // output times; empty means {t_end}
  std::int64_t max_steps = 10'000'000;
};

/// Rate tables for a fixed truncation, so rhs evaluation does no kernel calls.
class DbdSystem {
 public:
  DbdSystem(const RateKernel& kernel, std::int64_t truncation) : size_(truncation) {
    if (truncation < 2) throw ConfigError("ode: truncation I must be >= 2");
    a_.resize(static_cast<std::size_t>(truncation));
    b_.resize(static_cast<std::size_t>(truncation + 1));
    for (std::int64_t i = 1; i < truncation; ++i) {
      a_[static_cast<std::size_t>(i)] = kernel.a(i);
      b_[static_cast<std::size_t>(i + 1)] = kernel.b(i + 1);
    }
  }

  std::int64_t size() const noexcept { return size_; }

  /// J_i for i = 1..I-1; element k holds J_{k+1}.
  void fluxes(std::span<const double> c, std::span<double> j) const {
    const double c1 = c[0];
    for (std::size_t k = 0; k + 1 < c.size(); ++k) {
      j[k] = a_[k + 1] * c1 * c[k] - b_[k + 2] * c[k + 1];
    }
  }

  void rhs(std::span<const double> c, std::span<double> dc) const {
    const std::size_t n = c.size();
    const double c1 = c[0];
    double flux_sum = 0.0;
    double prev = 0.0;  // J_{i-1}
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const double j = a_[k + 1] * c1 * c[k] - b_[k + 2] * c[k + 1];
      flux_sum += j;
      if (k > 0) dc[k] = prev - j;
      prev = j;
    }
    dc[n - 1] = prev;
    const double j1 = a_[1] * c1 * c1 - b_[2] * c[1];
    dc[0] = -j1 - flux_sum;
  }

  /// Largest single rate coefficient in the truncation, for scale-relative tolerances.
  double rate_scale() const {
    double s = 0.0;
    for (double v : a_) s = std::max(s, v);
    for (double v : b_) s = std::max(s, v);
    return s;
  }

 private:
  std::int64_t size_;
  std::vector<double> a_;
  std::vector<double> b_;
};

inline std::vector<double> fluxes(std::span<const double> c, const RateKernel& kernel) {
  if (c.size() < 2) throw ConfigError("fluxes: state must have length >= 2");
  DbdSystem sys(kernel, static_cast<std::int64_t>(c.size()));
  std::vector<double> j(c.size() - 1);
  sys.fluxes(c, j);
  return j;
}

inline std::vector<double> rhs(std::span<const double> c, const RateKernel& kernel) {
  if (c.size() < 2) throw ConfigError("rhs: state must have length >= 2");
  DbdSystem sys(kernel, static_cast<std::int64_t>(c.size()));
  std::vector<double> dc(c.size());
  sys.rhs(c, dc);
  return dc;
}

inline double weighted_mass(std::span<const double> c) {
  NeumaierSum s;
  for (std::size_t k = 0; k < c.size(); ++k) s += static_cast<double>(k + 1) * c[k];
  return s.value();
}

/// Piecewise quartic continuous extension of accepted Dormand-Prince steps.
class DenseOutput {
 public:
  struct Segment {
    double t0;
    double h;
    std::vector<double> r1, r2, r3, r4, r5;
  };

  void append(Segment s) { segments_.push_back(std::move(s)); }
  bool empty() const noexcept { return segments_.empty(); }
  double t_begin() const { return segments_.front().t0; }
  double t_end() const { return segments_.back().t0 + segments_.back().h; }

  void evaluate(double t, std::span<double> out) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](double v, const Segment& s) { return v < s.t0; });
    if (it != segments_.begin()) --it;
    const Segment& s = *it;
    const double theta = (t - s.t0) / s.h;
    const double theta1 = 1.0 - theta;
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] = s.r1[k] + theta * (s.r2[k] + theta1 * (s.r3[k] + theta * (s.r4[k] + theta1 * s.r5[k])));
    }
  }

  std::vector<double> operator()(double t) const {
    std::vector<double> out(segments_.front().r1.size());
    evaluate(t, out);
    return out;
  }

 private:
  std::vector<Segment> segments_;
};

struct OdeStats {
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  std::int64_t rhs_evaluations = 0;
  std::int64_t clipped = 0;
  double min_step = kInf;
  double max_step = 0.0;
};

struct OdeSolution {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  OdeStats stats;
  double initial_mass = 0.0;
  double max_mass_drift = 0.0;  // max over output times of |m(t) - m(0)| / m(0)
  DenseOutput dense;
};

namespace detail {
// Dormand-Prince 5(4) tableau and Hairer's dense-output coefficients.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                        a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                        d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                        d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
}  // namespace detail

/// Integrates the truncated system from c0 over [0, t_end] and samples it on
/// cfg.grid by dense interpolation.
///
/// Accepted components in (-atol, 0) are clipped to zero; anything more
/// negative aborts with IntegrationFailure. A step below 1e-14 (relative to
/// t) aborts with StiffnessError.
inline OdeSolution integrate(std::span<const double> c0, const RateKernel& kernel, double t_end,
                             const IntegratorConfig& cfg) {
  using namespace detail;
  if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0)) throw ConfigError("ode: tolerances must be positive");
  if (!(t_end >= 0.0)) throw ConfigError("ode: t_end must be >= 0");
  const std::int64_t I = cfg.truncation;
  if (static_cast<std::int64_t>(c0.size()) > I) {
    for (std::size_t k = static_cast<std::size_t>(I); k < c0.size(); ++k) {
      if (c0[k] != 0.0) throw ConfigError("ode: initial data has mass beyond the truncation size");
    }
  }
  const DbdSystem sys(kernel, I);
  const auto n = static_cast<std::size_t>(I);
  std::vector<double> y(n, 0.0);
  for (std::size_t k = 0; k < std::min(n, c0.size()); ++k) {
    if (c0[k] < 0.0 || !std::isfinite(c0[k])) throw ConfigError("ode: initial data must be nonnegative and finite");
    y[k] = c0[k];
  }

  OdeSolution sol;
  sol.initial_mass = weighted_mass(y);
  std::vector<double> grid = cfg.grid.empty() ? std::vector<double>{t_end} : cfg.grid;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (grid[g] < 0.0 || grid[g] > t_end || (g > 0 && !(grid[g] > grid[g - 1]))) {
      throw ConfigError("ode: output grid must be increasing within [0, t_end]");
    }
  }
  sol.times = grid;
  sol.states.reserve(grid.size());
  std::size_t next_out = 0;
  auto record = [&](std::vector<double> state) {
    const double m = weighted_mass(state);
    const double drift = sol.initial_mass > 0 ? std::abs(m - sol.initial_mass) / sol.initial_mass : std::abs(m);
    sol.max_mass_drift = std::max(sol.max_mass_drift, drift);
    sol.states.push_back(std::move(state));
    ++next_out;
  };
  while (next_out < grid.size() && grid[next_out] <= 0.0) record(y);
  if (t_end == 0.0 || next_out == grid.size()) return sol;

  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n), out(n);
  sys.rhs(y, k1);
  sol.stats.rhs_evaluations = 1;

  auto error_norm = [&](std::span<const double> e, std::span<const double> y0, std::span<const double> y1) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double sk = cfg.atol + cfg.rtol * std::max(std::abs(y0[k]), std::abs(y1[k]));
      const double r = e[k] / sk;
      s += r * r;
    }
    return std::sqrt(s / static_cast<double>(n));
  };

  double h = cfg.initial_step;
  if (!(h > 0.0)) {
    // Hairer's starting-step heuristic, first-order version.
    double d0 = 0.0, d1n = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double sk = cfg.atol + cfg.rtol * std::abs(y[k]);
      d0 += (y[k] / sk) * (y[k] / sk);
      d1n += (k1[k] / sk) * (k1[k] / sk);
    }
    d0 = std::sqrt(d0 / static_cast<double>(n));
    d1n = std::sqrt(d1n / static_cast<double>(n));
    h = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
  }
  h = std::min({h, cfg.max_step, t_end});

  double t = 0.0;
  double fac_old = 1e-4;
  while (t < t_end) {
    if (sol.stats.accepted + sol.stats.rejected >= cfg.max_steps) {
      throw IntegrationFailure("ode: step budget exhausted at t = " + format_double(t));
    }
    if (h < 1e-14 * std::max(1.0, std::abs(t))) {
      throw StiffnessError("ode: step size underflow at t = " + format_double(t) +
                           "; reduce the truncation size or the coagulation rates");
    }
    if (t + h > t_end) h = t_end - t;

    for (std::size_t k = 0; k < n; ++k) ytmp[k] = y[k] + h * a21 * k1[k];
    sys.rhs(ytmp, k2);
    for (std::size_t k = 0; k < n; ++k) ytmp[k] = y[k] + h * (a31 * k1[k] + a32 * k2[k]);
    sys.rhs(ytmp, k3);
    for (std::size_t k = 0; k < n; ++k) ytmp[k] = y[k] + h * (a41 * k1[k] + a42 * k2[k] + a43 * k3[k]);
    sys.rhs(ytmp, k4);
    for (std::size_t k = 0; k < n; ++k) {
      ytmp[k] = y[k] + h * (a51 * k1[k] + a52 * k2[k] + a53 * k3[k] + a54 * k4[k]);
    }
    sys.rhs(ytmp, k5);
    for (std::size_t k = 0; k < n; ++k) {
      ytmp[k] = y[k] + h * (a61 * k1[k] + a62 * k2[k] + a63 * k3[k] + a64 * k4[k] + a65 * k5[k]);
    }
    sys.rhs(ytmp, k6);
    for (std::size_t k = 0; k < n; ++k) {
      ynew[k] = y[k] + h * (a71 * k1[k] + a73 * k3[k] + a74 * k4[k] + a75 * k5[k] + a76 * k6[k]);
    }
    sys.rhs(ynew, k7);
    sol.stats.rhs_evaluations += 6;
    for (std::size_t k = 0; k < n; ++k) {
      err[k] = h * (e1 * k1[k] + e3 * k3[k] + e4 * k4[k] + e5 * k5[k] + e6 * k6[k] + e7 * k7[k]);
    }
    const double e = error_norm(err, y, ynew);

    if (e <= 1.0 || !std::isfinite(e)) {
      if (!std::isfinite(e)) throw IntegrationFailure("ode: non-finite error estimate at t = " + format_double(t));
      bool clipped = false;
      for (std::size_t k = 0; k < n; ++k) {
        if (ynew[k] < 0.0) {
          if (ynew[k] > -cfg.atol) {
            ynew[k] = 0.0;
            clipped = true;
            ++sol.stats.clipped;
          } else {
            throw IntegrationFailure("ode: component c_" + std::to_string(k + 1) + " = " + format_double(ynew[k]) +
                                     " went negative at t = " + format_double(t + h));
          }
        }
      }
      if (clipped) {
        sys.rhs(ynew, k7);
        ++sol.stats.rhs_evaluations;
      }

      DenseOutput::Segment seg{t, h, y, {}, {}, {}, {}};
      seg.r2.resize(n);
      seg.r3.resize(n);
      seg.r4.resize(n);
      seg.r5.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        const double ydiff = ynew[k] - y[k];
        const double bspl = h * k1[k] - ydiff;
        seg.r2[k] = ydiff;
        seg.r3[k] = bspl;
        seg.r4[k] = ydiff - h * k7[k] - bspl;
        seg.r5[k] = h * (d1 * k1[k] + d3 * k3[k] + d4 * k4[k] + d5 * k5[k] + d6 * k6[k] + d7 * k7[k]);
      }

      const double t_new = (t + h >= t_end) ? t_end : t + h;
      while (next_out < grid.size() && grid[next_out] <= t_new) {
        const double tg = grid[next_out];
        if (tg == t_new) {
          record(ynew);
        } else {
          const double theta = (tg - t) / h;
          const double theta1 = 1.0 - theta;
          for (std::size_t k = 0; k < n; ++k) {
            double v = seg.r1[k] + theta * (seg.r2[k] + theta1 * (seg.r3[k] + theta * (seg.r4[k] + theta1 * seg.r5[k])));
            if (v < 0.0 && v > -cfg.atol) v = 0.0;
            out[k] = v;
          }
          record(out);
        }
      }
      sol.dense.append(std::move(seg));

      ++sol.stats.accepted;
      sol.stats.min_step = std::min(sol.stats.min_step, h);
      sol.stats.max_step = std::max(sol.stats.max_step, h);
      t = t_new;
      y.swap(ynew);
      k1.swap(k7);

      // PI step-size control (Hairer's beta = 0.04 stabilisation)
      const double ee = std::max(e, 1e-10);
      double fac = std::pow(ee, 0.2 - 0.04 * 0.75) * std::pow(fac_old, -0.04);
      fac = std::clamp(fac / 0.9, 0.1, 5.0);
      fac_old = std::max(e, 1e-4);
      h = std::min(h / fac, cfg.max_step);
    } else {
      ++sol.stats.rejected;
      h = h / std::min(5.0, std::pow(e, 0.2) / 0.9);
    }
  }
  while (next_out < grid.size()) record(y);
  return sol;
}

inline OdeSolution integrate(const DbdState& c0, const RateKernel& kernel, double t_end, const IntegratorConfig& cfg) {
  return integrate(std::span<const double>(c0.c), kernel, t_end, cfg);
}

/// H(c(t) | c^z) at every output time of a solution.
inline std::vector<double> entropy_along_trajectory(const OdeSolution& solution, const RateKernel& kernel, double z) {
  const std::int64_t size = solution.states.empty() ? 1 : static_cast<std::int64_t>(solution.states.front().size());
  const RelativeEntropy entropy(kernel, z, size);
  std::vector<double> h;
  h.reserve(solution.states.size());
  for (const auto& c : solution.states) h.push_back(entropy(c).value);
  return h;
}

}  // namespace bdp
