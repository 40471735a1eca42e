// Command-line driver: equilibrium, simulate, ode, stationary, lln, potential, moment.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "bdp/experiments.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 1;
  std::string kernel;
  std::optional<double> rho;
};

bdp::ExperimentConfig load(const Globals& g) {
  bdp::ExperimentConfig cfg = g.config.empty() ? bdp::ExperimentConfig{} : bdp::load_config(g.config);
  if (g.seed) cfg.seed = g.seed;
  if (!g.kernel.empty()) cfg.kernel = bdp::RateKernel::parse(g.kernel).to_spec();
  if (g.rho) cfg.rho = *g.rho;
  bdp::validate(cfg);
  return cfg;
}

fs::path sibling_json(const fs::path& p) {
  fs::path j = p;
  j.replace_extension(".json");
  return j;
}

json kernel_json(const bdp::ExperimentConfig& cfg) {
  json k;
  k["family"] = cfg.kernel.family;
  for (const auto& [name, v] : cfg.kernel.params) k["params"][name] = v;
  if (!cfg.kernel.a_table.empty()) k["a_table"] = cfg.kernel.a_table;
  if (!cfg.kernel.b_table.empty()) k["b_table"] = cfg.kernel.b_table;
  return k;
}

json number_or_inf(double v) { return std::isfinite(v) ? json(v) : json("inf"); }

void write_or_print(const std::string& out, const std::string& content) {
  if (out.empty() || out == "-") std::cout << content;
  else bdp::write_file(out, content);
}

int cmd_equilibrium(const Globals& g, std::int64_t i_max) {
  const auto cfg = load(g);
  const auto kernel = cfg.rate_kernel();
  const auto zs = bdp::estimate_zs(kernel, 10'000);
  json j;
  j["kernel"] = kernel_json(cfg);
  j["rho"] = cfg.rho;
  j["z_s"] = zs.value();
  j["z_s_estimate"] = zs.estimate;
  j["z_s_analytic"] = zs.analytic ? json(*zs.analytic) : json(nullptr);
  const double z_s = zs.value();
  const auto cm = std::isfinite(z_s) && z_s > 0 ? bdp::critical_mass(kernel, z_s, 1e-12) : bdp::CriticalMass{};
  j["rho_s"] = number_or_inf(cm.value);
  j["rho_s_tail_bound"] = cm.tail_bound;
  const double z = bdp::solve_z_of_rho(kernel, cfg.rho, 1e-13);
  j["z"] = z;
  const auto prof = bdp::equilibrium_profile(kernel, z, i_max);
  j["profile"] = prof.coefficients;
  j["profile_mass"] = prof.mass;
  j["profile_tail_bound"] = number_or_inf(prof.tail_bound);
  write_or_print(g.out, j.dump(2) + "\n");
  return 0;
}

int cmd_simulate(const Globals& g, std::optional<std::int64_t> replicas, std::optional<std::int64_t> n_opt) {
  auto cfg = load(g);
  if (replicas) cfg.replicas = *replicas;
  const std::int64_t n = n_opt.value_or(cfg.n_grid.front());
  const auto kernel = cfg.rate_kernel();
  const auto grid = cfg.time_grid();
  const auto cfg0 = bdp::Configuration::from_monomers(n, cfg.rho);
  bdp::TrajectoryOptions opts;
  opts.cutoff = cfg.report_cutoff;
  const auto m = static_cast<std::size_t>(cfg.replicas);
  std::vector<bdp::Trajectory> runs(m);
  const auto start = std::chrono::steady_clock::now();
  bdp::parallel_for(m, g.threads, [&](std::size_t r) {
    runs[r] = bdp::simulate(cfg0, kernel, cfg.horizon, grid, bdp::derive_stream_seed(cfg.effective_seed(), r), opts);
  });
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::string csv = "replica,t,i,c_i\n";
  std::uint64_t jumps = 0;
  for (std::size_t r = 0; r < m; ++r) {
    jumps += runs[r].jump_count;
    for (const auto& s : runs[r].samples) {
      const std::string prefix = std::to_string(r) + "," + bdp::format_double(s.t) + ",";
      for (std::size_t i = 0; i < s.c.size(); ++i) csv += prefix + std::to_string(i + 1) + "," + bdp::format_double(s.c[i]) + "\n";
    }
  }
  const std::string out = g.out.empty() ? (fs::path(cfg.output) / "simulate.csv").string() : g.out;
  bdp::write_file(out, csv);
  json j;
  j["n"] = n;
  j["rho"] = cfg.rho;
  j["kernel"] = kernel_json(cfg);
  j["seed"] = cfg.effective_seed();
  j["seed_source"] = g.seed ? "cli" : (cfg.seed ? "config" : "default");
  j["replicas"] = cfg.replicas;
  j["jump_count"] = jumps;
  j["wall_seconds"] = wall;
  j["threads"] = g.threads;
  bdp::write_file(sibling_json(out), j.dump(2) + "\n");
  return 0;
}

int cmd_ode(const Globals& g, std::optional<std::int64_t> truncation) {
  auto cfg = load(g);
  if (truncation) cfg.truncation = *truncation;
  bdp::validate(cfg);
  const auto kernel = cfg.rate_kernel();
  bdp::IntegratorConfig ic;
  ic.truncation = cfg.truncation;
  ic.grid = cfg.time_grid();
  const auto sol = bdp::integrate(std::vector<double>{cfg.rho}, kernel, cfg.horizon, ic);
  std::string csv = "t,i,c_i\n";
  for (std::size_t k = 0; k < sol.times.size(); ++k) {
    const std::string prefix = bdp::format_double(sol.times[k]) + ",";
    for (std::size_t i = 0; i < sol.states[k].size(); ++i) {
      csv += prefix + std::to_string(i + 1) + "," + bdp::format_double(sol.states[k][i]) + "\n";
    }
  }
  const std::string out = g.out.empty() ? (fs::path(cfg.output) / "ode.csv").string() : g.out;
  bdp::write_file(out, csv);
  json j;
  j["kernel"] = kernel_json(cfg);
  j["rho"] = cfg.rho;
  j["truncation"] = cfg.truncation;
  j["horizon"] = cfg.horizon;
  j["initial_mass"] = sol.initial_mass;
  j["max_mass_drift"] = sol.max_mass_drift;
  j["steps_accepted"] = sol.stats.accepted;
  j["steps_rejected"] = sol.stats.rejected;
  j["rhs_evaluations"] = sol.stats.rhs_evaluations;
  j["clipped"] = sol.stats.clipped;
  j["min_step"] = number_or_inf(sol.stats.min_step);
  j["max_step"] = sol.stats.max_step;
  try {
    const double z = bdp::solve_z_of_rho(kernel, cfg.rho, 1e-13);
    j["entropy_z"] = z;
    j["entropy"] = bdp::entropy_along_trajectory(sol, kernel, z);
  } catch (const bdp::SupercriticalMass&) {
    j["entropy"] = nullptr;
  }
  bdp::write_file(sibling_json(out), j.dump(2) + "\n");
  return 0;
}

int cmd_stationary(const Globals& g, std::optional<std::int64_t> n_opt, std::optional<double> z_opt,
                   std::int64_t cap) {
  const auto cfg = load(g);
  const auto kernel = cfg.rate_kernel();
  const std::int64_t n = n_opt.value_or(cfg.n_grid.front());
  double z = 0.0;
  if (z_opt) {
    z = *z_opt;
  } else {
    try {
      z = bdp::solve_z_of_rho(kernel, cfg.rho, 1e-13);
    } catch (const bdp::SupercriticalMass&) {
      z = bdp::critical_activity(kernel);
    }
  }
  const auto table = bdp::stationary_table(n, cfg.rho, kernel, z, cap);
  const double scale = cfg.rho / static_cast<double>(n);
  std::string csv = "state,log_weight,probability,potential\n";
  for (std::size_t k = 0; k < table.size(); ++k) {
    csv += "\"" + table.state(k).to_literal() + "\"," + bdp::format_double(table.log_weight(k)) + "," +
           bdp::format_double(table.probabilities()[k]) + "," +
           bdp::format_double(-scale * table.log_probabilities()[k]) + "\n";
  }
  const std::string out = g.out.empty() ? (fs::path(cfg.output) / "stationary.csv").string() : g.out;
  bdp::write_file(out, csv);
  json j;
  j["log_Bn"] = table.log_bn();
  j["z"] = z;
  j["n"] = n;
  j["rho"] = cfg.rho;
  j["p_n"] = table.size();
  j["kernel"] = kernel_json(cfg);
  j["detailed_balance_violation"] = bdp::detailed_balance_check(table);
  bdp::write_file(sibling_json(out), j.dump(2) + "\n");
  return 0;
}

int cmd_experiment(const Globals& g, bdp::ExperimentKind kind) {
  auto cfg = load(g);
  cfg.kind = kind;
  const fs::path dir = g.out.empty() ? fs::path(cfg.output) : fs::path(g.out);
  auto man = bdp::manifest(cfg, bdp::to_string(kind), g.threads);
  if (g.seed) man["seed_source"] = "cli";
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::pair<std::string, std::string>> files;
  if (kind == bdp::ExperimentKind::lln) {
    const auto r = bdp::lln_experiment(cfg, g.threads);
    files.emplace_back("lln.csv", bdp::lln_csv(r));
    man["ode_mass_drift"] = r.ode_mass_drift;
    man["ode_upper_tail"] = r.ode_upper_tail;
    man["sup_mode"] = cfg.exact_sup ? "jump_times_and_grid" : "grid";
    for (const auto& row : r.rows) std::cout << "n=" << row.n << " estimate=" << row.estimate << " stderr=" << row.standard_error << "\n";
  } else if (kind == bdp::ExperimentKind::potential) {
    const auto r = bdp::potential_experiment(cfg);
    files.emplace_back("potential.csv", bdp::potential_csv(r));
    man["regime_detected"] = r.regime_detected;
    man["z_s"] = r.z_s;
    man["rho_s"] = number_or_inf(r.rho_s);
    man["z"] = r.z;
    if (cfg.regime != bdp::Regime::automatic && bdp::to_string(cfg.regime) != r.regime_detected) {
      std::cerr << "warning: declared regime " << bdp::to_string(cfg.regime) << " differs from the detected "
                << r.regime_detected << "\n";
    }
    for (const auto& row : r.rows) std::cout << "n=" << row.n << " potential=" << row.potential << " gap=" << row.gap << "\n";
  } else {
    const auto w = bdp::weight_for(cfg);
    const auto r = bdp::moment_experiment(cfg, w, g.threads);
    files.emplace_back("moment.csv", bdp::moment_csv(r));
    man["thresholds"] = r.thresholds;
    man["max_over_n"] = r.max_over_n;
    man["min_over_n"] = r.min_over_n;
    for (const auto& s : r.series) std::cout << "n=" << s.n << " max_t=" << s.max_over_t << "\n";
  }
  man["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  bdp::emit_results(dir, files, man);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic and deterministic Becker-Doring toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "YAML experiment config");
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--out", g.out, "Output file or directory");
  app.add_option("--threads", g.threads, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  app.add_option("--kernel", g.kernel, "Kernel literal, e.g. constant:a=1,b=1 or powerdb:q=4");
  app.add_option("--rho", g.rho, "Mass density")->check(CLI::PositiveNumber);

  std::int64_t i_max = 20;
  auto* eq = app.add_subcommand("equilibrium", "z_s, rho_s, z(rho) and the equilibrium profile");
  eq->add_option("--imax", i_max, "Profile length")->check(CLI::PositiveNumber);

  std::optional<std::int64_t> replicas, sim_n;
  auto* sim = app.add_subcommand("simulate", "SSA replicas from monomeric data");
  sim->add_option("--replicas", replicas, "Replica count")->check(CLI::PositiveNumber);
  sim->add_option("--n", sim_n, "Particle number (default: first entry of the n grid)")->check(CLI::PositiveNumber);

  std::optional<std::int64_t> truncation;
  auto* ode = app.add_subcommand("ode", "Integrate the truncated deterministic equations");
  ode->add_option("--truncation", truncation, "Truncation size I")->check(CLI::Range(2, 1 << 24));

  std::optional<std::int64_t> st_n;
  std::optional<double> st_z;
  std::int64_t cap = bdp::kDefaultEnumerationCap;
  auto* st = app.add_subcommand("stationary", "Exact stationary table");
  st->add_option("--n", st_n, "Particle number")->check(CLI::PositiveNumber);
  st->add_option("--z", st_z, "Activity used for the weights")->check(CLI::PositiveNumber);
  st->add_option("--cap", cap, "Enumeration cap on n")->check(CLI::PositiveNumber);

  auto* lln = app.add_subcommand("lln", "Law of large numbers experiment");
  auto* pot = app.add_subcommand("potential", "Stationary potential experiment");
  auto* mom = app.add_subcommand("moment", "Superlinear moment experiment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(bdp::ExitCode::config);
  }

  try {
    if (*eq) return cmd_equilibrium(g, i_max);
    if (*sim) return cmd_simulate(g, replicas, sim_n);
    if (*ode) return cmd_ode(g, truncation);
    if (*st) return cmd_stationary(g, st_n, st_z, cap);
    if (*lln) return cmd_experiment(g, bdp::ExperimentKind::lln);
    if (*pot) return cmd_experiment(g, bdp::ExperimentKind::potential);
    if (*mom) return cmd_experiment(g, bdp::ExperimentKind::moment);
  } catch (const bdp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(bdp::ExitCode::failure);
  }
  return 0;
}
