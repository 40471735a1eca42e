#include <catch_amalgamated.hpp>

#include <filesystem>

#include "bdp/experiments.hpp"

using namespace bdp;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

const char* kSample = R"(kind: potential
kernel:
  family: powerdb
  params:
    q: 4
rho: 2
n: [10, 20]
replicas: 3
horizon: 2.5
grid_points: 11
truncation: 48
seed: 99
regime: supercritical
thresholds: [2, 4, 6]
output: out/potential
)";

}  // namespace

TEST_CASE("config parses and round-trips") {
  const auto cfg = parse_config(kSample);
  CHECK(cfg.kind == ExperimentKind::potential);
  CHECK(cfg.kernel.family == "powerdb");
  CHECK(cfg.kernel.params.at("q") == 4.0);
  CHECK(cfg.rho == 2.0);
  CHECK(cfg.n_grid == std::vector<std::int64_t>{10, 20});
  CHECK(cfg.seed == 99u);
  CHECK(cfg.regime == Regime::supercritical);
  CHECK(parse_config(emit_config(cfg)) == cfg);

  ExperimentConfig other;
  other.kernel = RateKernel::tabulated({0.1, 1.0 / 3}, {2.5, 7}).to_spec();
  other.target = {0.3, 0.1, 1e-17};
  other.rho = 0.1 + 0.2;
  other.exact_sup = true;
  CHECK(parse_config(emit_config(other)) == other);
}

TEST_CASE("config errors name the field and line") {
  CHECK_THROWS_WITH(parse_config("kernel:\n  family: gamma\n"), ContainsSubstring("kernel.family"));
  CHECK_THROWS_AS(parse_config("kernel:\n  family: gamma\n"), InvalidKernel);
  CHECK_THROWS_WITH(parse_config("rho: 1\nreplicas: many\n", "x.yaml"), ContainsSubstring("x.yaml:2"));
  CHECK_THROWS_WITH(parse_config("rho: 1\nreplicas: many\n"), ContainsSubstring("replicas"));
  CHECK_THROWS_WITH(parse_config("rho: 1\nfoo: 2\n"), ContainsSubstring("unknown field 'foo'"));
  CHECK_THROWS_AS(parse_config("n: [10, 5]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("horizon: 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("thresholds: [2, 5, 6]\n"), InvalidThresholds);
  CHECK_THROWS_AS(parse_config("rho: [1\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/file.yaml"), ConfigError);
}

TEST_CASE("missing seed uses the documented default and is echoed") {
  const auto cfg = parse_config("rho: 1\n");
  CHECK_FALSE(cfg.seed.has_value());
  CHECK(cfg.effective_seed() == kDefaultSeed);
  const auto m = manifest(cfg, "lln", 1);
  CHECK(m["seed"] == kDefaultSeed);
  CHECK(m["seed_source"] == "default");
  CHECK(m["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("floor approximation") {
  const auto c = floor_approximation(std::vector<double>{0.3, 0.1, 0.05}, 20, 1.0);
  // x = (6, 2, 1) uses 13 particles, leaving one cluster of size 7.
  CHECK(c.counts() == Configuration::Counts{{1, 6}, {2, 2}, {3, 1}, {7, 1}});
  CHECK(floor_approximation(std::vector<double>{1.0}, 5, 1.0).counts() == Configuration::Counts{{1, 5}});
  // Remainder landing on an occupied size increments it.
  CHECK(floor_approximation(std::vector<double>{0.0, 0.4}, 10, 1.0).counts() == Configuration::Counts{{2, 5}});
  CHECK(floor_approximation(std::vector<double>{}, 1, 1.0).counts() == Configuration::Counts{{1, 1}});
  CHECK_THROWS_AS(floor_approximation(std::vector<double>{2.0}, 5, 1.0), InvalidState);
}

TEST_CASE("lln experiment is bounded and reproducible") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::lln;
  cfg.n_grid = {20, 200};
  cfg.replicas = 8;
  cfg.horizon = 2.0;
  cfg.grid_points = 21;
  cfg.seed = 5;
  const auto a = lln_experiment(cfg, 1);
  const auto b = lln_experiment(cfg, 3);
  CHECK(lln_csv(a) == lln_csv(b));
  for (const auto& row : a.rows) {
    CHECK(row.estimate >= 0.0);
    CHECK(row.estimate <= 2 * cfg.rho);
    CHECK(row.standard_error >= 0.0);
  }
  CHECK(a.ode_mass_drift <= 1e-8);
  cfg.exact_sup = true;
  const auto e = lln_experiment(cfg, 1);
  for (std::size_t k = 0; k < e.rows.size(); ++k) CHECK(e.rows[k].estimate >= a.rows[k].estimate);

  cfg.exact_sup = false;
  cfg.truncation = 6;
  CHECK_THROWS_AS(lln_experiment(cfg, 1), TruncationInadequate);
}

TEST_CASE("potential experiment on both regimes") {
  ExperimentConfig sub;
  sub.kind = ExperimentKind::potential;
  sub.n_grid = {5, 10, 15};
  const auto s = potential_experiment(sub);
  CHECK(s.regime_detected == "subcritical");
  CHECK(s.z == Approx((3 - std::sqrt(5.0)) / 2).epsilon(1e-10));
  for (const auto& row : s.rows) {
    CHECK(std::isfinite(row.potential));
    CHECK(row.target == 0.0);
    CHECK(std::abs(row.terms.reconstructed - row.potential) <= 1e-10);
  }

  ExperimentConfig sup = sub;
  sup.kernel = RateKernel::power_db(4).to_spec();
  sup.rho = 2.0;
  const auto p = potential_experiment(sup);
  CHECK(p.regime_detected == "supercritical");
  CHECK(p.z == 1.0);
  CHECK(p.rho_s == Approx(1.2020569).margin(1e-7));
  CHECK(potential_csv(p) == potential_csv(potential_experiment(sup)));

  sub.target = {0.2, 0.1};
  const auto t = potential_experiment(sub);
  CHECK(t.rows[0].target > 0.0);
}

TEST_CASE("moment experiment starts at rho/2") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::moment;
  cfg.n_grid = {50, 100};
  cfg.replicas = 4;
  cfg.horizon = 1.0;
  cfg.grid_points = 5;
  cfg.rho = 1.5;
  const auto w = weight_for(cfg);
  CHECK(w.phi(1.0) == 0.5);
  const auto r = moment_experiment(cfg, w, 2);
  for (const auto& s : r.series) {
    CHECK(s.mean[0] == Approx(0.75).epsilon(1e-15));
    CHECK(s.max_over_t >= s.mean[0]);
  }
  CHECK(moment_csv(r) == moment_csv(moment_experiment(cfg, w, 1)));
}

TEST_CASE("emission writes files and reports I/O failures") {
  const auto dir = std::filesystem::temp_directory_path() / "bdp_emit_test";
  std::filesystem::remove_all(dir);
  ExperimentConfig cfg;
  emit_results(dir, {{"a.csv", "x\n1\n"}}, manifest(cfg, "lln", 2));
  CHECK(std::filesystem::exists(dir / "a.csv"));
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  CHECK_THROWS_AS(write_file("/proc/bdp_cannot_write/x.csv", "1"), IoError);
  std::filesystem::remove_all(dir);
}
