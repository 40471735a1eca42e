#pragma once

// Experiment configuration, the three experiment drivers (law of large
// numbers, stationary potential, superlinear moment) and result emission.

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bdp/entropy.hpp"
#include "bdp/errors.hpp"
#include "bdp/kinetics.hpp"
#include "bdp/numeric.hpp"
#include "bdp/ode.hpp"
#include "bdp/parallel.hpp"
#include "bdp/rng.hpp"
#include "bdp/ssa.hpp"
#include "bdp/state.hpp"
#include "bdp/stationary.hpp"
#include "bdp/superlinear.hpp"

namespace bdp {

inline constexpr const char* kVersion = "1.0.0";

/// Seed used when neither the config nor the command line supplies one.
inline constexpr std::uint64_t kDefaultSeed = 20240601;

enum class ExperimentKind { lln, potential, moment };
enum class Regime { automatic, subcritical, supercritical };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::lln: return "lln";
    case ExperimentKind::potential: return "potential";
    case ExperimentKind::moment: return "moment";
  }
  return "lln";
}

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::automatic: return "auto";
    case Regime::subcritical: return "subcritical";
    case Regime::supercritical: return "supercritical";
  }
  return "auto";
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::lln;
  KernelSpec kernel{"constant", {{"a", 1.0}, {"b", 1.0}}, {}, {}};
  double rho = 1.0;
  std::vector<std::int64_t> n_grid{100};
  std::int64_t replicas = 1;
  double horizon = 1.0;
  std::int64_t grid_points = 101;
  std::int64_t truncation = 64;
  std::optional<std::uint64_t> seed;
  Regime regime = Regime::automatic;
  std::vector<double> target;  // empty: the equilibrium profile of the detected regime
  std::vector<std::int64_t> thresholds;  // empty: derived from the initial data
  std::int64_t report_cutoff = 20;
  std::string output = "results";
  bool exact_sup = false;

  std::uint64_t effective_seed() const { return seed.value_or(kDefaultSeed); }
  RateKernel rate_kernel() const { return RateKernel::from_spec(kernel); }
  std::vector<double> time_grid() const {
    return uniform_grid(horizon, static_cast<std::size_t>(grid_points));
  }

  bool operator==(const ExperimentConfig&) const = default;
};

inline void validate(const ExperimentConfig& cfg) {
  (void)cfg.rate_kernel();
  if (!(cfg.rho > 0.0) || !std::isfinite(cfg.rho)) throw ConfigError("rho: must be positive and finite");
  if (cfg.n_grid.empty()) throw ConfigError("n: at least one value is required");
  for (std::size_t k = 0; k < cfg.n_grid.size(); ++k) {
    if (cfg.n_grid[k] < 1) throw ConfigError("n: values must be positive");
    if (k > 0 && cfg.n_grid[k] <= cfg.n_grid[k - 1]) throw ConfigError("n: values must be strictly increasing");
  }
  if (cfg.replicas < 1) throw ConfigError("replicas: must be >= 1");
  if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon)) throw ConfigError("horizon: must be positive");
  if (cfg.grid_points < 2) throw ConfigError("grid_points: must be >= 2");
  if (cfg.truncation < 2) throw ConfigError("truncation: must be >= 2");
  if (cfg.report_cutoff < 1) throw ConfigError("report_cutoff: must be >= 1");
  for (double c : cfg.target) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("target: entries must be nonnegative and finite");
  }
  if (!cfg.thresholds.empty()) SuperlinearWeight::validate(cfg.thresholds);
}

namespace detail {

inline std::string where(const YAML::Node& node, const std::string& source) {
  const auto m = node.Mark();
  if (m.is_null()) return source;
  return source + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
}

template <class T>
T scalar_as(const YAML::Node& node, const std::string& field, const std::string& source, const char* expected) {
  if (!node.IsScalar()) throw ConfigError(where(node, source) + ": field '" + field + "': expected " + expected);
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where(node, source) + ": field '" + field + "': expected " + expected + ", got '" +
                      node.Scalar() + "'");
  }
}

template <class T>
std::vector<T> list_as(const YAML::Node& node, const std::string& field, const std::string& source,
                       const char* expected) {
  std::vector<T> out;
  if (node.IsScalar()) {
    out.push_back(scalar_as<T>(node, field, source, expected));
    return out;
  }
  if (!node.IsSequence()) throw ConfigError(where(node, source) + ": field '" + field + "': expected a list");
  for (const auto& item : node) out.push_back(scalar_as<T>(item, field, source, expected));
  return out;
}

inline KernelSpec parse_kernel(const YAML::Node& node, const std::string& source) {
  if (!node.IsMap()) throw ConfigError(where(node, source) + ": field 'kernel': expected a mapping");
  KernelSpec spec;
  spec.family.clear();
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    const auto& value = kv.second;
    if (key == "family") {
      spec.family = scalar_as<std::string>(value, "kernel.family", source, "a string");
    } else if (key == "params") {
      if (!value.IsMap()) throw ConfigError(where(value, source) + ": field 'kernel.params': expected a mapping");
      for (const auto& p : value) {
        const auto name = p.first.as<std::string>();
        spec.params[name] = scalar_as<double>(p.second, "kernel.params." + name, source, "a number");
      }
    } else if (key == "a_table") {
      spec.a_table = list_as<double>(value, "kernel.a_table", source, "a number");
    } else if (key == "b_table") {
      spec.b_table = list_as<double>(value, "kernel.b_table", source, "a number");
    } else {
      throw ConfigError(where(kv.first, source) + ": unknown field 'kernel." + key + "'");
    }
  }
  if (spec.family.empty()) throw ConfigError(where(node, source) + ": field 'kernel.family' is required");
  try {
    (void)RateKernel::from_spec(spec);
  } catch (const InvalidKernel& e) {
    throw InvalidKernel(where(node, source) + ": " + e.what());
  }
  return spec;
}

}  // namespace detail

/// Parses the YAML experiment schema. Errors carry "source:line:column".
inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                      ": " + e.msg);
  }
  if (!root.IsMap()) throw ConfigError(source + ": top level must be a mapping");
  using detail::list_as;
  using detail::scalar_as;
  ExperimentConfig cfg;
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    const auto& v = kv.second;
    if (key == "kind") {
      const auto s = scalar_as<std::string>(v, key, source, "lln, potential or moment");
      if (s == "lln") cfg.kind = ExperimentKind::lln;
      else if (s == "potential") cfg.kind = ExperimentKind::potential;
      else if (s == "moment") cfg.kind = ExperimentKind::moment;
      else throw ConfigError(detail::where(v, source) + ": field 'kind': unknown experiment '" + s + "'");
    } else if (key == "kernel") {
      cfg.kernel = detail::parse_kernel(v, source);
    } else if (key == "rho") {
      cfg.rho = scalar_as<double>(v, key, source, "a number");
    } else if (key == "n") {
      cfg.n_grid = list_as<std::int64_t>(v, key, source, "an integer");
    } else if (key == "replicas") {
      cfg.replicas = scalar_as<std::int64_t>(v, key, source, "an integer");
    } else if (key == "horizon") {
      cfg.horizon = scalar_as<double>(v, key, source, "a number");
    } else if (key == "grid_points") {
      cfg.grid_points = scalar_as<std::int64_t>(v, key, source, "an integer");
    } else if (key == "truncation") {
      cfg.truncation = scalar_as<std::int64_t>(v, key, source, "an integer");
    } else if (key == "seed") {
      cfg.seed = scalar_as<std::uint64_t>(v, key, source, "a nonnegative integer");
    } else if (key == "regime") {
      const auto s = scalar_as<std::string>(v, key, source, "auto, subcritical or supercritical");
      if (s == "auto") cfg.regime = Regime::automatic;
      else if (s == "subcritical") cfg.regime = Regime::subcritical;
      else if (s == "supercritical") cfg.regime = Regime::supercritical;
      else throw ConfigError(detail::where(v, source) + ": field 'regime': unknown regime '" + s + "'");
    } else if (key == "target") {
      if (v.IsScalar() && v.Scalar() == "equilibrium") cfg.target.clear();
      else cfg.target = list_as<double>(v, key, source, "a number or 'equilibrium'");
    } else if (key == "thresholds") {
      cfg.thresholds = list_as<std::int64_t>(v, key, source, "an integer");
    } else if (key == "report_cutoff") {
      cfg.report_cutoff = scalar_as<std::int64_t>(v, key, source, "an integer");
    } else if (key == "output") {
      cfg.output = scalar_as<std::string>(v, key, source, "a path");
    } else if (key == "exact_sup") {
      cfg.exact_sup = scalar_as<bool>(v, key, source, "true or false");
    } else {
      throw ConfigError(detail::where(kv.first, source) + ": unknown field '" + key + "'");
    }
  }
  try {
    validate(cfg);
  } catch (const InvalidThresholds&) {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

/// YAML text that parse_config maps back to an equal config.
inline std::string emit_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  auto list = [&out](const auto& v, auto fmt) {
    out << "[";
    for (std::size_t k = 0; k < v.size(); ++k) out << (k ? ", " : "") << fmt(v[k]);
    out << "]\n";
  };
  auto num = [](double x) { return format_double(x); };
  auto integer = [](std::int64_t x) { return std::to_string(x); };
  out << "kind: " << to_string(cfg.kind) << "\n";
  out << "kernel:\n  family: " << cfg.kernel.family << "\n";
  if (!cfg.kernel.params.empty()) {
    out << "  params:\n";
    for (const auto& [k, v] : cfg.kernel.params) out << "    " << k << ": " << num(v) << "\n";
  }
  if (!cfg.kernel.a_table.empty()) {
    out << "  a_table: ";
    list(cfg.kernel.a_table, num);
  }
  if (!cfg.kernel.b_table.empty()) {
    out << "  b_table: ";
    list(cfg.kernel.b_table, num);
  }
  out << "rho: " << num(cfg.rho) << "\n";
  out << "n: ";
  list(cfg.n_grid, integer);
  out << "replicas: " << cfg.replicas << "\n";
  out << "horizon: " << num(cfg.horizon) << "\n";
  out << "grid_points: " << cfg.grid_points << "\n";
  out << "truncation: " << cfg.truncation << "\n";
  if (cfg.seed) out << "seed: " << *cfg.seed << "\n";
  out << "regime: " << to_string(cfg.regime) << "\n";
  if (cfg.target.empty()) {
    out << "target: equilibrium\n";
  } else {
    out << "target: ";
    list(cfg.target, num);
  }
  if (!cfg.thresholds.empty()) {
    out << "thresholds: ";
    list(cfg.thresholds, integer);
  }
  out << "report_cutoff: " << cfg.report_cutoff << "\n";
  out << "output: \"" << cfg.output << "\"\n";
  out << "exact_sup: " << (cfg.exact_sup ? "true" : "false") << "\n";
  return out.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const ExperimentConfig& cfg) {
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << fnv1a(emit_config(cfg));
  return s.str();
}

/// Point of E_rho^n approximating the concentration profile c:
/// x_i = floor((n/rho) c_i) for i <= n-1, and the leftover particles
/// r = n - sum_i i x_i form one extra cluster of size r.
inline Configuration floor_approximation(std::span<const double> c, std::int64_t n, double rho) {
  if (n < 1 || !(rho > 0.0)) throw InvalidState("floor_approximation: n and rho must be positive");
  Configuration::Counts counts;
  std::int64_t used = 0;
  const double scale = static_cast<double>(n) / rho;
  for (std::int64_t i = 1; i <= std::min<std::int64_t>(n - 1, static_cast<std::int64_t>(c.size())); ++i) {
    const double ci = c[static_cast<std::size_t>(i - 1)];
    if (!(ci >= 0.0)) throw InvalidState("floor_approximation: negative concentration");
    const auto x = static_cast<std::int64_t>(std::floor(scale * ci));
    if (x > 0) {
      counts[i] = x;
      used += i * x;
    }
  }
  if (used > n) throw InvalidState("floor_approximation: target mass exceeds rho");
  if (used < n) ++counts[n - used];
  return Configuration(n, rho, std::move(counts));
}

// ---------------------------------------------------------------------------
// Law of large numbers

struct LlnRow {
  std::int64_t n = 0;
  double estimate = 0.0;
  double standard_error = 0.0;
  std::int64_t replicas = 0;
  double mean_jumps = 0.0;
};

struct LlnResult {
  std::vector<LlnRow> rows;
  std::int64_t truncation = 0;
  double ode_mass_drift = 0.0;
  double ode_upper_tail = 0.0;  // max_t sum_{i > I/2} i c_i(t) of the reference
};

/// Seed of replica r at the k-th value of the n grid.
inline std::uint64_t replica_seed(std::uint64_t master, std::size_t n_index, std::int64_t replica) {
  return derive_stream_seed(derive_stream_seed(master, n_index), static_cast<std::uint64_t>(replica));
}

namespace detail {

/// Welford fold of per-replica values, in index order.
inline std::pair<double, double> mean_and_stderr(std::span<const double> v) {
  double mean = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double d = v[k] - mean;
    mean += d / static_cast<double>(k + 1);
    m2 += d * (v[k] - mean);
  }
  const double var = v.size() > 1 ? m2 / static_cast<double>(v.size() - 1) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

// sum_{i <= I} i |c^n_i - ref_i| + (tail mass of c^n beyond I).
inline double lln_distance(std::span<const std::int64_t> counts, std::int64_t n, double scale,
                           std::span<const double> ref, std::int64_t tail_count) {
  double d = 0.0;
  const auto I = static_cast<std::int64_t>(ref.size());
  for (std::int64_t i = 1; i <= I; ++i) {
    const double x = i <= n ? static_cast<double>(counts[static_cast<std::size_t>(i)]) : 0.0;
    d += static_cast<double>(i) * std::abs(scale * x - ref[static_cast<std::size_t>(i - 1)]);
  }
  return d + scale * static_cast<double>(tail_count);
}

}  // namespace detail

/// For each n: the mean over replicas of max over the time grid of
/// sum_{i <= I} i |c^n_i(t) - c_i(t)| + sum_{i > I} i c^n_i(t), both
/// processes started from monomers. With exact_sup the maximum also runs
/// over every jump time.
inline LlnResult lln_experiment(const ExperimentConfig& cfg, unsigned threads = 1) {
  validate(cfg);
  const auto kernel = cfg.rate_kernel();
  const auto grid = cfg.time_grid();
  const std::int64_t I = cfg.truncation;

  IntegratorConfig ic;
  ic.truncation = I;
  ic.grid = grid;
  const std::vector<double> c0{cfg.rho};
  const auto ode = integrate(c0, kernel, cfg.horizon, ic);

  LlnResult result;
  result.truncation = I;
  result.ode_mass_drift = ode.max_mass_drift;
  for (const auto& c : ode.states) {
    double upper = 0.0;
    for (std::int64_t i = I / 2 + 1; i <= I; ++i) upper += static_cast<double>(i) * c[static_cast<std::size_t>(i - 1)];
    result.ode_upper_tail = std::max(result.ode_upper_tail, upper);
  }
  if (!(result.ode_upper_tail < 1e-8)) {
    throw TruncationInadequate("lln: reference carries mass " + format_double(result.ode_upper_tail) +
                               " in sizes above I/2 = " + std::to_string(I / 2) + "; rerun with truncation >= " +
                               std::to_string(2 * I));
  }

  const std::uint64_t master = cfg.effective_seed();
  for (std::size_t k = 0; k < cfg.n_grid.size(); ++k) {
    const std::int64_t n = cfg.n_grid[k];
    const auto cfg0 = Configuration::from_monomers(n, cfg.rho);
    const double scale = cfg.rho / static_cast<double>(n);
    std::vector<double> sup(static_cast<std::size_t>(cfg.replicas), 0.0);
    std::vector<double> jumps(sup.size(), 0.0);
    parallel_for(sup.size(), threads, [&](std::size_t r) {
      Simulator sim(cfg0, kernel, replica_seed(master, k, static_cast<std::int64_t>(r)));
      std::vector<double> ref(static_cast<std::size_t>(I));
      std::int64_t tail = 0;  // sum_{i > I} i x_i, updated per jump
      double worst = 0.0;
      std::size_t g = 0;
      auto at = [&](std::span<const double> c) {
        worst = std::max(worst, detail::lln_distance(sim.counts(), n, scale, c, tail));
      };
      while (true) {
        auto ev = sim.propose();
        const double next = ev ? ev->time : kInf;
        while (g < grid.size() && grid[g] < next) at(ode.states[g++]);
        if (!ev || ev->time > cfg.horizon) break;
        if (cfg.exact_sup) {
          ode.dense.evaluate(ev->time, ref);
          at(ref);
        }
        const std::int64_t i = ev->reaction.index;
        const std::int64_t sign = ev->reaction.direction == Direction::forward ? 1 : -1;
        if (i + 1 > I) tail += sign * (i + 1);
        if (i > I) tail -= sign * i;
        sim.commit(*ev);
        if (cfg.exact_sup) at(ref);
      }
      while (g < grid.size()) at(ode.states[g++]);
      sup[r] = worst;
      jumps[r] = static_cast<double>(sim.jumps());
    });
    const auto [mean, se] = detail::mean_and_stderr(sup);
    LlnRow row;
    row.n = n;
    row.estimate = mean;
    row.standard_error = se;
    row.replicas = cfg.replicas;
    row.mean_jumps = detail::mean_and_stderr(jumps).first;
    result.rows.push_back(row);
  }
  return result;
}

inline std::string lln_csv(const LlnResult& r) {
  std::string s = "n,estimate,stderr\n";
  for (const auto& row : r.rows) {
    s += std::to_string(row.n) + "," + format_double(row.estimate) + "," + format_double(row.standard_error) + "\n";
  }
  return s;
}

// ---------------------------------------------------------------------------
// Stationary potential

struct PotentialRow {
  std::int64_t n = 0;
  std::uint64_t states = 0;
  std::string state;  // literal of c^n
  double potential = 0.0;
  EntropyReport terms;
  double target = 0.0;
  double gap = 0.0;
};

struct PotentialResult {
  std::string regime_detected;
  std::string regime_declared;
  double z_s = 0.0;
  double rho_s = kInf;
  double z = 0.0;  // activity of the limit: z(rho) or z_s
  std::vector<PotentialRow> rows;
};

/// For each n: the exact potential -(rho/n) ln Pi^n(c^n) at the floor
/// approximation c^n of the target, and its gap to H(target | c^z) with
/// z = z(rho) when rho <= rho_s and z = z_s otherwise.
inline PotentialResult potential_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto kernel = cfg.rate_kernel();
  PotentialResult res;
  res.regime_declared = to_string(cfg.regime);
  res.z_s = critical_activity(kernel);
  if (!(res.z_s > 0.0) || !std::isfinite(res.z_s)) {
    throw NumericalError("potential: requires 0 < z_s < infinity, got z_s = " + format_double(res.z_s));
  }
  const auto cm = critical_mass(kernel, res.z_s, 1e-12);
  res.rho_s = cm.infinite ? kInf : cm.value;
  const bool sub = cm.infinite || cfg.rho <= cm.value;
  res.regime_detected = sub ? "subcritical" : "supercritical";
  res.z = sub ? solve_z_of_rho(kernel, cfg.rho, 1e-14) : res.z_s;

  const std::int64_t n_max = cfg.n_grid.back();
  std::vector<double> target = cfg.target;
  double h_target = 0.0;
  if (target.empty()) {
    // H(c^z | c^z) = 0.
    target = equilibrium_profile(kernel, res.z, std::max<std::int64_t>(n_max, 1)).coefficients;
  } else {
    if (weighted_mass(target) > cfg.rho * (1.0 + 1e-12)) throw ConfigError("target: mass exceeds rho");
    h_target = relative_entropy(target, kernel, res.z).value;
  }

  for (const auto n : cfg.n_grid) {
    const auto table = stationary_table(n, cfg.rho, kernel, res.z);
    const auto cn = floor_approximation(target, n, cfg.rho);
    PotentialRow row;
    row.n = n;
    row.states = table.size();
    row.state = cn.to_literal();
    row.potential = nonequilibrium_potential(cn, table);
    row.terms = potential_decomposition(cn, kernel, res.z, table);
    row.target = h_target;
    row.gap = std::abs(row.potential - h_target);
    res.rows.push_back(row);
  }
  return res;
}

inline std::string potential_csv(const PotentialResult& r) {
  std::string s = "n,states,potential,entropy,tail,stirling,scaled_log_bn,target,gap\n";
  for (const auto& row : r.rows) {
    s += std::to_string(row.n) + "," + std::to_string(row.states) + "," + format_double(row.potential) + "," +
         format_double(row.terms.entropy) + "," + format_double(row.terms.tail) + "," +
         format_double(row.terms.stirling) + "," + format_double(row.terms.scaled_log_bn) + "," +
         format_double(row.target) + "," + format_double(row.gap) + "\n";
  }
  return s;
}

// ---------------------------------------------------------------------------
// Superlinear moment

/// Weight from the configured thresholds, or else from the monomeric initial
/// data of every n in the grid.
inline SuperlinearWeight weight_for(const ExperimentConfig& cfg, std::int64_t levels = 8) {
  if (!cfg.thresholds.empty()) return SuperlinearWeight::build(cfg.thresholds);
  std::vector<std::vector<double>> measures(cfg.n_grid.size(), std::vector<double>{cfg.rho});
  return SuperlinearWeight::build(thresholds_from_tail_masses(measures, levels));
}

struct MomentSeries {
  std::int64_t n = 0;
  std::vector<double> mean;
  std::vector<double> standard_error;
  double max_over_t = 0.0;
};

struct MomentResult {
  std::vector<double> grid;
  std::vector<std::int64_t> thresholds;
  std::vector<MomentSeries> series;
  double max_over_n = 0.0;
  double min_over_n = kInf;
};

/// Ensemble mean of sum_i phi(i) c^n_i(t) on the time grid, for each n,
/// starting from monomers.
inline MomentResult moment_experiment(const ExperimentConfig& cfg, const SuperlinearWeight& weight,
                                      unsigned threads = 1) {
  validate(cfg);
  const auto kernel = cfg.rate_kernel();
  MomentResult res;
  res.grid = cfg.time_grid();
  const auto given = weight.given_thresholds();
  res.thresholds.assign(given.begin(), given.end());
  for (std::size_t k = 0; k < cfg.n_grid.size(); ++k) {
    const std::int64_t n = cfg.n_grid[k];
    std::vector<double> phi_table(static_cast<std::size_t>(n + 1));
    for (std::int64_t i = 0; i <= n; ++i) phi_table[static_cast<std::size_t>(i)] = weight.phi(static_cast<double>(i));
    EnsembleOptions opts;
    opts.threads = threads;
    opts.trajectory.cutoff = 1;
    opts.trajectory.weight = [&phi_table](std::int64_t i) { return phi_table[static_cast<std::size_t>(i)]; };
    const auto stats = ensemble(Configuration::from_monomers(n, cfg.rho), kernel, cfg.horizon, res.grid,
                                cfg.replicas, derive_stream_seed(cfg.effective_seed(), k), opts);
    const auto obs = stats.observable("weighted_moment");
    MomentSeries s;
    s.n = n;
    for (std::size_t g = 0; g < res.grid.size(); ++g) {
      s.mean.push_back(stats.mean(g, obs));
      s.standard_error.push_back(stats.standard_error(g, obs));
      s.max_over_t = std::max(s.max_over_t, s.mean.back());
    }
    res.max_over_n = std::max(res.max_over_n, s.max_over_t);
    res.min_over_n = std::min(res.min_over_n, s.max_over_t);
    res.series.push_back(std::move(s));
  }
  return res;
}

inline std::string moment_csv(const MomentResult& r) {
  std::string s = "n,t,moment,stderr\n";
  for (const auto& series : r.series) {
    for (std::size_t g = 0; g < r.grid.size(); ++g) {
      s += std::to_string(series.n) + "," + format_double(r.grid[g]) + "," + format_double(series.mean[g]) + "," +
           format_double(series.standard_error[g]) + "\n";
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Emission

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  out.close();
  if (!out) throw IoError("write failed for " + path.string());
}

/// Run manifest: seed (and whether it was defaulted), config hash, version,
/// thread count and the echoed config.
inline nlohmann::ordered_json manifest(const ExperimentConfig& cfg, const std::string& command, unsigned threads) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["seed"] = cfg.effective_seed();
  j["seed_source"] = cfg.seed ? "config" : "default";
  j["config_hash"] = config_hash(cfg);
  j["threads"] = threads;
  j["regime_declared"] = to_string(cfg.regime);
  j["config"] = emit_config(cfg);
  return j;
}

/// Writes each (file name, content) pair and manifest.json into dir.
inline void emit_results(const std::filesystem::path& dir, const std::vector<std::pair<std::string, std::string>>& files,
                         const nlohmann::ordered_json& manifest_json) {
  for (const auto& [name, content] : files) write_file(dir / name, content);
  write_file(dir / "manifest.json", manifest_json.dump(2) + "\n");
}

}  // namespace bdp
