#pragma once

// Rate-coefficient families for the Becker-Doring network
//     C_1 + C_i  <->  C_{i+1}     (forward a_i, backward b_{i+1})
// and the equilibrium-series analysis built on the detailed-balance
// coefficients Q_1 = 1, Q_{i+1} = Q_i a_i / b_{i+1}.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bdp/errors.hpp"
#include "bdp/numeric.hpp"

namespace bdp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Plain-data description of a kernel, as found in configuration files.
struct KernelSpec {
  std::string family;
  std::map<std::string, double> params;
  std::vector<double> a_table;
  std::vector<double> b_table;

  bool operator==(const KernelSpec&) const = default;
};

class RateKernel {
 public:
  /// a_i = a, b_i = b.
  struct Constant {
    double a = 1.0;
    double b = 1.0;
    bool operator==(const Constant&) const = default;
  };
  /// a_i = slope * i, b_i = b.
  struct LinearCoag {
    double slope = 1.0;
    double b = 1.0;
    bool operator==(const LinearCoag&) const = default;
  };
  /// a_i = 1, b_{i+1} = ((i+1)/i)^q, so that Q_i = i^{-q}.
  struct PowerDB {
    double q = 4.0;
    bool operator==(const PowerDB&) const = default;
  };
  /// a[0] is a_1, b[0] is b_2. Past the end of a table its last entry repeats.
  struct Tabulated {
    std::vector<double> a;
    std::vector<double> b;
    bool operator==(const Tabulated&) const = default;
  };
  using Family = std::variant<Constant, LinearCoag, PowerDB, Tabulated>;

  /// Bounds on the ratio a_j / b_{j+1} over all j >= i.
  struct RatioBounds {
    double inf;
    double sup;
  };

  explicit RateKernel(Family family) : family_(std::move(family)) { validate(); }

  static RateKernel constant(double a, double b) { return RateKernel(Constant{a, b}); }
  static RateKernel linear(double slope, double b) { return RateKernel(LinearCoag{slope, b}); }
  static RateKernel power_db(double q) { return RateKernel(PowerDB{q}); }
  static RateKernel tabulated(std::vector<double> a, std::vector<double> b) {
    return RateKernel(Tabulated{std::move(a), std::move(b)});
  }

  const Family& family() const noexcept { return family_; }

  std::string_view family_name() const {
    return std::visit(
        [](const auto& f) -> std::string_view {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Constant>) return "constant";
          else if constexpr (std::is_same_v<F, LinearCoag>) return "linear";
          else if constexpr (std::is_same_v<F, PowerDB>) return "powerdb";
          else return "tabulated";
        },
        family_);
  }

  double a(std::int64_t i) const {
    return std::visit(
        [i](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Constant>) return f.a;
          else if constexpr (std::is_same_v<F, LinearCoag>) return f.slope * static_cast<double>(i);
          else if constexpr (std::is_same_v<F, PowerDB>) return 1.0;
          else return f.a[static_cast<std::size_t>(std::min<std::int64_t>(i, std::ssize(f.a)) - 1)];
        },
        family_);
  }

  double b(std::int64_t i) const {
    return std::visit(
        [i](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Constant>) return f.b;
          else if constexpr (std::is_same_v<F, LinearCoag>) return f.b;
          else if constexpr (std::is_same_v<F, PowerDB>) return std::exp(power_log_b(f.q, i));
          else return f.b[static_cast<std::size_t>(std::min<std::int64_t>(i - 1, std::ssize(f.b)) - 1)];
        },
        family_);
  }

  double log_a(std::int64_t i) const { return std::log(a(i)); }

  double log_b(std::int64_t i) const {
    if (const auto* p = std::get_if<PowerDB>(&family_)) return power_log_b(p->q, i);
    return std::log(b(i));
  }

  RatioBounds ratio_bounds(std::int64_t i) const {
    return std::visit(
        [i, this](const auto& f) -> RatioBounds {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Constant>) {
            return {f.a / f.b, f.a / f.b};
          } else if constexpr (std::is_same_v<F, LinearCoag>) {
            return {f.slope * static_cast<double>(i) / f.b, kInf};
          } else if constexpr (std::is_same_v<F, PowerDB>) {
            const double r = std::exp(-f.q * std::log1p(1.0 / static_cast<double>(i)));
            return f.q >= 0 ? RatioBounds{r, 1.0} : RatioBounds{1.0, r};
          } else {
            const std::int64_t last = tail_start();
            if (i >= last) return {suffix_min_.back(), suffix_max_.back()};
            const auto k = static_cast<std::size_t>(i - 1);
            return {suffix_min_[k], suffix_max_[k]};
          }
        },
        family_);
  }

  /// Closed-form critical activity where the family determines it exactly.
  std::optional<double> analytic_zs() const {
    return std::visit(
        [](const auto& f) -> std::optional<double> {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Constant>) return f.b / f.a;
          else if constexpr (std::is_same_v<F, LinearCoag>) return 0.0;
          else if constexpr (std::is_same_v<F, PowerDB>) return 1.0;
          else return f.b.back() / f.a.back();
        },
        family_);
  }

  KernelSpec to_spec() const {
    KernelSpec spec;
    spec.family = std::string(family_name());
    std::visit(
        [&spec](const auto& f) {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Constant>) {
            spec.params = {{"a", f.a}, {"b", f.b}};
          } else if constexpr (std::is_same_v<F, LinearCoag>) {
            spec.params = {{"K", f.slope}, {"b", f.b}};
          } else if constexpr (std::is_same_v<F, PowerDB>) {
            spec.params = {{"q", f.q}};
          } else {
            spec.a_table = f.a;
            spec.b_table = f.b;
          }
        },
        family_);
    return spec;
  }

  static RateKernel from_spec(const KernelSpec& spec) {
    auto param = [&spec](const std::string& key) {
      auto it = spec.params.find(key);
      if (it == spec.params.end()) {
        throw InvalidKernel("kernel.params." + key + ": required for family '" + spec.family + "'");
      }
      return it->second;
    };
    auto allow_only = [&spec](std::initializer_list<std::string_view> keys) {
      for (const auto& [k, v] : spec.params) {
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
          throw InvalidKernel("kernel.params." + k + ": unknown parameter for family '" +
                              spec.family + "'");
        }
      }
    };
    if (spec.family == "constant") {
      allow_only({"a", "b"});
      return constant(param("a"), param("b"));
    }
    if (spec.family == "linear") {
      allow_only({"K", "b"});
      return linear(param("K"), param("b"));
    }
    if (spec.family == "powerdb") {
      allow_only({"q"});
      return power_db(param("q"));
    }
    if (spec.family == "tabulated") {
      allow_only({});
      return tabulated(spec.a_table, spec.b_table);
    }
    throw InvalidKernel("kernel.family: unknown family '" + spec.family +
                        "' (expected constant, linear, powerdb or tabulated)");
  }

  /// Parses the compact command-line form, e.g. "constant:a=1,b=1",
  /// "powerdb:q=4", "tabulated:a=2|3,b=5|7".
  static RateKernel parse(std::string_view literal) {
    KernelSpec spec;
    const auto colon = literal.find(':');
    spec.family = std::string(literal.substr(0, colon));
    if (colon != std::string_view::npos) {
      std::string rest(literal.substr(colon + 1));
      std::stringstream ss(rest);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw InvalidKernel("kernel literal: expected key=value, got '" + item + "'");
        const std::string key = item.substr(0, eq);
        const std::string value = item.substr(eq + 1);
        auto to_double = [&](const std::string& s) {
          try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
          } catch (const std::exception&) {
            throw InvalidKernel("kernel literal: '" + key + "' is not a number: '" + s + "'");
          }
        };
        if (spec.family == "tabulated" && (key == "a" || key == "b")) {
          auto& table = key == "a" ? spec.a_table : spec.b_table;
          std::stringstream vs(value);
          std::string tok;
          while (std::getline(vs, tok, '|')) table.push_back(to_double(tok));
        } else {
          spec.params[key] = to_double(value);
        }
      }
    }
    return from_spec(spec);
  }

  bool operator==(const RateKernel& other) const { return family_ == other.family_; }

 private:
  static double power_log_b(double q, std::int64_t i) {
    return q * std::log1p(1.0 / static_cast<double>(i - 1));
  }

  // First reaction index from which a_i / b_{i+1} is constant (tabulated only).
  std::int64_t tail_start() const {
    const auto& t = std::get<Tabulated>(family_);
    return std::max<std::int64_t>(std::ssize(t.a), std::ssize(t.b));
  }

  void validate() {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    std::visit(
        [&](const auto& f) {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Constant>) {
            if (!positive(f.a) || !positive(f.b)) throw InvalidKernel("constant kernel: a and b must be positive");
          } else if constexpr (std::is_same_v<F, LinearCoag>) {
            if (!positive(f.slope) || !positive(f.b)) throw InvalidKernel("linear kernel: K and b must be positive");
          } else if constexpr (std::is_same_v<F, PowerDB>) {
            if (!std::isfinite(f.q)) throw InvalidKernel("powerdb kernel: q must be finite");
          } else {
            if (f.a.empty() || f.b.empty()) throw InvalidKernel("tabulated kernel: a_table and b_table must be non-empty");
            for (std::size_t k = 0; k < f.a.size(); ++k) {
              if (!positive(f.a[k])) throw InvalidKernel("tabulated kernel: a_table[" + std::to_string(k) + "] must be positive");
            }
            for (std::size_t k = 0; k < f.b.size(); ++k) {
              if (!positive(f.b[k])) throw InvalidKernel("tabulated kernel: b_table[" + std::to_string(k) + "] must be positive");
            }
            const std::int64_t last = tail_start();
            suffix_min_.assign(static_cast<std::size_t>(last), 0.0);
            suffix_max_.assign(static_cast<std::size_t>(last), 0.0);
            double lo = a(last) / b(last + 1);
            double hi = lo;
            suffix_min_.back() = lo;
            suffix_max_.back() = hi;
            for (std::int64_t i = last - 1; i >= 1; --i) {
              const double r = a(i) / b(i + 1);
              lo = std::min(lo, r);
              hi = std::max(hi, r);
              suffix_min_[static_cast<std::size_t>(i - 1)] = lo;
              suffix_max_[static_cast<std::size_t>(i - 1)] = hi;
            }
          }
        },
        family_);
  }

  Family family_;
  std::vector<double> suffix_min_;
  std::vector<double> suffix_max_;
};

/// log Q_i for i = 1..i_max (element k holds log Q_{k+1}).
inline std::vector<double> detailed_balance_coefficients(const RateKernel& kernel, std::int64_t i_max) {
  if (i_max < 1) throw NumericalError("detailed_balance_coefficients: i_max must be >= 1");
  std::vector<double> log_q(static_cast<std::size_t>(i_max));
  log_q[0] = 0.0;
  for (std::int64_t i = 1; i < i_max; ++i) {
    const double a = kernel.a(i);
    const double b = kernel.b(i + 1);
    if (!(a > 0.0) || !(b > 0.0)) {
      throw InvalidKernel("nonpositive rate at reaction " + std::to_string(i));
    }
    log_q[static_cast<std::size_t>(i)] = log_q[static_cast<std::size_t>(i - 1)] + kernel.log_a(i) - kernel.log_b(i + 1);
  }
  return log_q;
}

enum class SeriesStatus { converged, divergent, exceeds_bound };
enum class TailCertificate { none, geometric, power_law };

struct SeriesOptions {
  double tol = 1e-13;
  std::int64_t max_terms = 50'000'000;
  /// Stop as soon as the partial sum exceeds this value.
  double stop_above = kInf;
  double divergence_threshold = 1e12;
};

struct SeriesResult {
  double value = 0.0;       // partial sum
  double tail_bound = 0.0;  // certified bound on the omitted tail
  SeriesStatus status = SeriesStatus::converged;
  TailCertificate certificate = TailCertificate::none;
  std::int64_t terms = 0;

  bool converged() const noexcept { return status == SeriesStatus::converged; }
  double upper() const noexcept { return converged() ? value + tail_bound : kInf; }
};

/// Sums  sum_{i >= first} i^power Q_i z^i  until a rigorous tail bound drops
/// below opts.tol. Two certificates are used: geometric domination from the
/// kernel's ratio bounds, and (power-law kernels, z <= 1) comparison with
/// the integral of x^{power-q}.
inline SeriesResult sum_equilibrium_series(const RateKernel& kernel, double z, int power,
                                           std::int64_t first = 1, const SeriesOptions& opts = {}) {
  if (!(z > 0.0) || !std::isfinite(z)) throw NumericalError("series: activity z must be positive and finite");
  SeriesResult res;
  double log_q = 0.0;
  for (std::int64_t j = 1; j < first; ++j) log_q += kernel.log_a(j) - kernel.log_b(j + 1);
  const double log_z = std::log(z);
  const auto* power_db = std::get_if<RateKernel::PowerDB>(&kernel.family());
  if (power_db && z == 1.0 && power_db->q <= power + 1.0) {
    // sum of i^{power-q}: harmonic or slower decay
    res.value = kInf;
    res.tail_bound = kInf;
    res.status = SeriesStatus::divergent;
    return res;
  }

  NeumaierSum sum;
  double prev_term = 0.0;
  for (std::int64_t i = first;; ++i) {
    const double log_t = power * std::log(static_cast<double>(i)) + log_q + static_cast<double>(i) * log_z;
    const double t = std::exp(log_t);
    ++res.terms;
    if (!std::isfinite(t)) {
      res.value = kInf;
      res.tail_bound = kInf;
      res.status = SeriesStatus::divergent;
      return res;
    }
    sum += t;
    res.value = sum.value();
    if (res.value > opts.stop_above) {
      res.status = SeriesStatus::exceeds_bound;
      return res;
    }

    const auto rb = kernel.ratio_bounds(i);
    if (t > 0.0 && rb.inf * z >= 1.0) {
      res.status = SeriesStatus::divergent;
      res.tail_bound = kInf;
      return res;
    }
    double bound = kInf;
    TailCertificate cert = TailCertificate::none;
    const double r = std::pow(1.0 + 1.0 / static_cast<double>(i), power) * rb.sup * z;
    if (r < 1.0) {
      bound = t * r / (1.0 - r);
      cert = TailCertificate::geometric;
    }
    if (power_db && z <= 1.0 && power_db->q > power + 1.0) {
      const double expo = power - power_db->q + 1.0;
      const double pl = std::pow(static_cast<double>(i), expo) / -expo;
      if (pl < bound) {
        bound = pl;
        cert = TailCertificate::power_law;
      }
    }
    if (bound <= opts.tol) {
      res.tail_bound = bound;
      res.certificate = cert;
      return res;
    }
    if (res.value > opts.divergence_threshold && t >= prev_term) {
      res.status = SeriesStatus::divergent;
      res.tail_bound = kInf;
      return res;
    }
    if (res.terms >= opts.max_terms) {
      throw NumericalError("series: no tail certificate after " + std::to_string(res.terms) +
                           " terms at z = " + format_double(z));
    }
    prev_term = t;
    log_q += kernel.log_a(i) - kernel.log_b(i + 1);
  }
}

struct ZsEstimate {
  double estimate;                  // exp(-max of log(Q_i)/i over the trailing half window)
  std::optional<double> analytic;   // closed form, when the family provides one
  std::vector<double> log_q_over_i; // element k holds log(Q_{k+1})/(k+1)

  double value() const { return analytic.value_or(estimate); }
};

inline ZsEstimate estimate_zs(const RateKernel& kernel, std::int64_t i_probe) {
  if (i_probe < 10) throw NumericalError("estimate_zs: i_probe must be >= 10");
  const auto log_q = detailed_balance_coefficients(kernel, i_probe);
  ZsEstimate est;
  est.log_q_over_i.resize(log_q.size());
  for (std::size_t k = 0; k < log_q.size(); ++k) est.log_q_over_i[k] = log_q[k] / static_cast<double>(k + 1);
  const auto half = static_cast<std::size_t>(i_probe / 2);
  const double m = *std::max_element(est.log_q_over_i.begin() + static_cast<std::ptrdiff_t>(half) - 1,
                                     est.log_q_over_i.end());
  est.estimate = std::exp(-m);
  est.analytic = kernel.analytic_zs();
  return est;
}

struct CriticalMass {
  double value = kInf;
  double tail_bound = 0.0;
  bool infinite = true;
};

/// rho_s = sum_i i Q_i z_s^i, or the +infinity flag when that series diverges.
inline CriticalMass critical_mass(const RateKernel& kernel, double z_s, double tol) {
  if (!(z_s > 0.0) || !std::isfinite(z_s)) throw NumericalError("critical_mass: z_s must be positive and finite");
  if (!(tol > 0.0)) throw NumericalError("critical_mass: tol must be positive");
  SeriesOptions opts;
  opts.tol = tol;
  const auto s = sum_equilibrium_series(kernel, z_s, 1, 1, opts);
  if (!s.converged()) return {};
  return {s.value, s.tail_bound, false};
}

inline double critical_activity(const RateKernel& kernel) {
  if (auto z = kernel.analytic_zs()) return *z;
  return estimate_zs(kernel, 10'000).estimate;
}

/// z(rho): the unique z < z_s with ||c^z|| = rho, by bisection.
/// At the critical mass (within tol) returns z_s itself.
inline double solve_z_of_rho(const RateKernel& kernel, double rho, double tol) {
  if (!(rho > 0.0) || !(tol > 0.0)) throw NumericalError("solve_z_of_rho: rho and tol must be positive");
  const double z_s = critical_activity(kernel);
  if (!(z_s > 0.0)) {
    throw SupercriticalMass("solve_z_of_rho: critical mass is 0 (z_s = 0); every rho > 0 is supercritical");
  }
  double hi = z_s;
  if (std::isfinite(z_s)) {
    const auto crit = critical_mass(kernel, z_s, tol / 4);
    if (!crit.infinite) {
      if (rho > crit.value + tol) {
        throw SupercriticalMass("solve_z_of_rho: rho = " + format_double(rho) + " exceeds the critical mass " +
                                format_double(crit.value) + "; use z_s = " + format_double(z_s));
      }
      if (std::abs(rho - crit.value) <= tol) return z_s;
    }
  } else {
    hi = 1.0;
    SeriesOptions o;
    o.tol = tol / 4;
    o.stop_above = rho;
    while (sum_equilibrium_series(kernel, hi, 1, 1, o).status != SeriesStatus::exceeds_bound) hi *= 2;
  }

  SeriesOptions opts;
  opts.tol = tol / 4;
  opts.stop_above = rho + tol;
  double lo = 0.0;
  double mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < 400; ++iter) {
    mid = 0.5 * (lo + hi);
    const auto s = sum_equilibrium_series(kernel, mid, 1, 1, opts);
    const double m = s.status == SeriesStatus::converged ? s.value + 0.5 * s.tail_bound : kInf;
    if (std::abs(m - rho) <= tol / 2) return mid;
    if (m < rho) lo = mid;
    else hi = mid;
    if (hi - lo <= 4 * std::numeric_limits<double>::epsilon() * hi) break;
  }
  return mid;
}

struct EquilibriumProfile {
  double z = 0.0;
  std::vector<double> coefficients;  // c^z_i for i = 1..i_max
  std::int64_t i_max = 0;
  double mass = 0.0;        // sum_{i <= i_max} i c^z_i
  double tail_bound = kInf; // bound on sum_{i > i_max} i c^z_i (infinite when divergent)

  double operator[](std::int64_t i) const { return coefficients[static_cast<std::size_t>(i - 1)]; }
};

inline EquilibriumProfile equilibrium_profile(const RateKernel& kernel, double z, std::int64_t i_max) {
  if (!(z > 0.0)) throw NumericalError("equilibrium_profile: z must be positive");
  const auto log_q = detailed_balance_coefficients(kernel, i_max);
  EquilibriumProfile prof;
  prof.z = z;
  prof.i_max = i_max;
  prof.coefficients.resize(log_q.size());
  const double log_z = std::log(z);
  NeumaierSum mass;
  for (std::size_t k = 0; k < log_q.size(); ++k) {
    const double c = std::exp(log_q[k] + static_cast<double>(k + 1) * log_z);
    if (!std::isfinite(c)) {
      throw ProfileOverflow("equilibrium_profile: c^z_" + std::to_string(k + 1) + " overflows",
                            static_cast<std::int64_t>(k + 1));
    }
    prof.coefficients[k] = c;
    mass += static_cast<double>(k + 1) * c;
  }
  prof.mass = mass.value();
  SeriesOptions opts;
  opts.tol = 1e-14;
  opts.max_terms = 10'000'000;
  try {
    const auto tail = sum_equilibrium_series(kernel, z, 1, i_max + 1, opts);
    prof.tail_bound = tail.upper();
  } catch (const NumericalError&) {
    prof.tail_bound = kInf;
  }
  return prof;
}

}  // namespace bdp
