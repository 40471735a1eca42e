#include <catch_amalgamated.hpp>

#include <map>
#include <random>

#include "bdp/ssa.hpp"
#include "bdp/stationary.hpp"
#include "oracles.hpp"

using namespace bdp;
using Catch::Approx;

namespace {

double brute_total(const Configuration& cfg, const RateKernel& k) {
  double s = 0.0;
  for (const auto& ch : channel_rates(cfg, k)) s += ch.rate;
  return s;
}

}  // namespace

TEST_CASE("channel rate examples") {
  const auto k = RateKernel::constant(1, 1);
  const auto r5 = channel_rates(Configuration::from_monomers(5, 1.0), k);
  REQUIRE(r5.size() == 1);
  CHECK(r5[0].reaction == Reaction{1, Direction::forward});
  CHECK(r5[0].rate == Approx(4.0).epsilon(1e-15));

  const auto r3 = channel_rates(Configuration(3, 1.0, {{1, 1}, {2, 1}}), k);
  REQUIRE(r3.size() == 2);
  CHECK(r3[0].reaction == Reaction{2, Direction::forward});
  CHECK(r3[0].rate == Approx(1.0 / 3).epsilon(1e-15));
  CHECK(r3[1].reaction == Reaction{1, Direction::backward});
  CHECK(r3[1].rate == Approx(1.0).epsilon(1e-15));

  CHECK(channel_rates(Configuration::from_monomers(1, 1.0), k).empty());
}

TEST_CASE("count rates reproduce the generator on coordinate functions") {
  // A^n c_k = (n/rho) sum_i [A_i (rho/n) Delta_ik - B_{i+1} (rho/n) Delta_ik], with
  // A_1 = a_1 c_1 (c_1 - rho/n), A_i = a_i c_1 c_i, B_i = b_i c_i.
  std::mt19937_64 gen(21);
  const auto k = RateKernel::tabulated({1.3, 0.4, 2.2, 0.9}, {0.7, 1.9, 0.3});
  for (std::int64_t n : {5, 12, 30}) {
    const double rho = 1.7;
    const double h = rho / static_cast<double>(n);
    // Random walk to a generic state.
    auto cfg = Configuration::from_monomers(n, rho);
    for (int rep = 0; rep < 40; ++rep) {
      const auto ch = channel_rates(cfg, k);
      const auto& pick = ch[gen() % ch.size()];
      cfg = apply_jump(cfg, pick.reaction.index, pick.reaction.direction);
    }
    const auto c = cfg.to_concentrations();
    auto conc = [&](std::int64_t i) { return i <= static_cast<std::int64_t>(c.size()) ? c[static_cast<std::size_t>(i - 1)] : 0.0; };
    std::vector<double> drift_gen(static_cast<std::size_t>(n + 1), 0.0), drift_rates(drift_gen.size(), 0.0);
    for (std::int64_t i = 1; i < n; ++i) {
      const double A = i == 1 ? k.a(1) * conc(1) * (conc(1) - h) : k.a(i) * conc(1) * conc(i);
      const double B = k.b(i + 1) * conc(i + 1);
      const double net = A - B;
      // Delta_i = e_{i+1} - e_i - e_1.
      drift_gen[static_cast<std::size_t>(i + 1)] += net;
      drift_gen[static_cast<std::size_t>(i)] -= net;
      drift_gen[1] -= net;
    }
    for (const auto& ch : channel_rates(cfg, k)) {
      const auto i = ch.reaction.index;
      const double sign = ch.reaction.direction == Direction::forward ? 1.0 : -1.0;
      drift_rates[static_cast<std::size_t>(i + 1)] += sign * ch.rate * h;
      drift_rates[static_cast<std::size_t>(i)] -= sign * ch.rate * h;
      drift_rates[1] -= sign * ch.rate * h;
    }
    for (std::size_t j = 1; j < drift_gen.size(); ++j) CHECK(drift_rates[j] == Approx(drift_gen[j]).epsilon(1e-12).margin(1e-14));
  }
}

TEST_CASE("single-channel steps") {
  const auto k = RateKernel::constant(1, 1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Simulator sim(Configuration::from_monomers(2, 1.0), k, seed);
    const auto s = sim.step();
    REQUIRE(s);
    CHECK(s->second == Reaction{1, Direction::forward});
    CHECK(sim.configuration().counts() == Configuration::Counts{{2, 1}});
  }
  // Backward only from {2:1}: waiting time ~ Exp(1).
  Simulator sim(Configuration(2, 1.0, {{2, 1}}), k, 99);
  double sum = 0.0;
  const int draws = 100000;
  for (int d = 0; d < draws; ++d) {
    auto ev = sim.propose();
    REQUIRE(ev);
    CHECK(ev->reaction == Reaction{1, Direction::backward});
    sum += ev->time - sim.time();
  }
  CHECK(std::abs(sum / draws - 1.0) <= 3.0 / std::sqrt(static_cast<double>(draws)));
  // Absorbing state.
  Simulator one(Configuration::from_monomers(1, 1.0), k, 1);
  CHECK_FALSE(one.step());
}

TEST_CASE("index root equals brute force after every update") {
  std::mt19937_64 gen(8);
  std::vector<double> a(10), b(10);
  std::uniform_real_distribution<double> u(0.1, 4.0);
  for (auto& v : a) v = u(gen);
  for (auto& v : b) v = u(gen);
  const std::vector<RateKernel> kernels{RateKernel::constant(1, 1), RateKernel::power_db(4), RateKernel::tabulated(a, b)};
  for (const auto& k : kernels) {
    for (std::int64_t n : {2, 7, 50}) {
      Simulator sim(Configuration::from_monomers(n, 0.8), k, gen());
      for (int step = 0; step < 3000; ++step) {
        if (!sim.step()) break;
        const auto cfg = sim.configuration();
        REQUIRE(sim.total_rate() == Approx(brute_total(cfg, k)).epsilon(1e-12));
        for (const auto& ch : channel_rates(cfg, k)) {
          REQUIRE(sim.index().rate(ch.reaction) == Approx(ch.rate).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("trajectory sampling") {
  const auto k = RateKernel::constant(1, 1);
  const auto cfg0 = Configuration::from_monomers(50, 1.0);
  const auto t0 = simulate(cfg0, k, 0.0, uniform_grid(0.0, 1), 3);
  REQUIRE(t0.samples.size() == 1);
  CHECK(t0.samples[0].c[0] == Approx(1.0));
  CHECK(t0.jump_count == 0);

  const auto grid = uniform_grid(5.0, 51);
  const auto tr = simulate(cfg0, k, 5.0, grid, 3);
  REQUIRE(tr.samples.size() == 51);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    CHECK(tr.samples[g].t == grid[g]);
    CHECK(tr.samples[g].mass == Approx(1.0).epsilon(1e-15));
    if (g > 0) CHECK(tr.samples[g].jumps >= tr.samples[g - 1].jumps);
  }
  const auto again = simulate(cfg0, k, 5.0, grid, 3);
  for (std::size_t g = 0; g < grid.size(); ++g) CHECK(again.samples[g].c == tr.samples[g].c);
  CHECK_THROWS_AS(simulate(cfg0, k, 1.0, std::vector<double>{0.5, 0.2}, 1), ConfigError);
}

TEST_CASE("two-state chain occupancy") {
  // {1:2} <-> {2:1} with rate (rho/n) 2 1 = 1 forward and b_2 = 1 back: pi = (1/2, 1/2).
  const auto k = RateKernel::constant(1, 1);
  const double T = 20000;
  const auto grid = uniform_grid(T, 40001);
  const auto tr = simulate(Configuration::from_monomers(2, 1.0), k, T, grid, 17, {});
  double in_pair = 0;
  for (const auto& s : tr.samples) in_pair += s.c.size() >= 2 && s.c[1] > 0 ? 1 : 0;
  CHECK(in_pair / static_cast<double>(grid.size()) == Approx(0.5).margin(0.02));

  EnsembleOptions opts;
  const std::vector<double> g2{0.0, 50.0};
  const auto stats = ensemble(Configuration::from_monomers(2, 1.0), k, 50.0, g2, 4000, 5, opts);
  const auto c2 = stats.observable("c_2");
  // c_2 = rho/n = 1/2 in {2:1}, so P({2:1}) = 2 E[c_2].
  const double p = 2 * stats.mean(1, c2);
  const double se = 2 * stats.standard_error(1, c2);
  CHECK(std::abs(p - 0.5) <= 3 * se);
}

TEST_CASE("ensemble statistics") {
  const auto k = RateKernel::constant(1, 1);
  const auto cfg0 = Configuration::from_monomers(30, 1.0);
  const auto grid = uniform_grid(2.0, 11);
  const auto one = ensemble(cfg0, k, 2.0, grid, 1, 77);
  const auto tr = simulate(cfg0, k, 2.0, grid, derive_stream_seed(77, 0));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::int64_t i = 1; i <= 30; ++i) {
      const auto obs = one.observable("c_" + std::to_string(i));
      CHECK(one.mean(g, obs) == tr.samples[g].c[static_cast<std::size_t>(i - 1)]);
      CHECK(one.variance(g, obs) == 0.0);
    }
  }
  const auto many = ensemble(cfg0, k, 2.0, grid, 100, 77);
  const auto mass = many.observable("mass");
  for (std::size_t g = 0; g < grid.size(); ++g) {
    CHECK(many.mean(g, mass) == Approx(1.0).epsilon(1e-14));
    CHECK(many.variance(g, mass) == Approx(0.0).margin(1e-28));
    for (std::size_t o = 0; o < many.observables().size(); ++o) CHECK(many.variance(g, o) >= 0.0);
  }
  CHECK(many.replicas() == 100);
}

TEST_CASE("ensembles do not depend on the thread count") {
  const auto k = RateKernel::power_db(4);
  const auto cfg0 = Configuration::from_monomers(40, 1.5);
  const auto grid = uniform_grid(3.0, 7);
  EnsembleOptions one, four;
  four.threads = 4;
  four.block = 5;
  const auto a = ensemble(cfg0, k, 3.0, grid, 23, 1234, one);
  const auto b = ensemble(cfg0, k, 3.0, grid, 23, 1234, four);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t o = 0; o < a.observables().size(); ++o) {
      REQUIRE(a.mean(g, o) == b.mean(g, o));
      REQUIRE(a.variance(g, o) == b.variance(g, o));
    }
  }
}

TEST_CASE("transition frequencies match channel proportions (chi-square)") {
  const auto k = RateKernel::tabulated({1.0, 2.0, 0.5}, {1.5, 0.5, 1.0});
  const std::int64_t n = 6;
  Simulator sim(Configuration::from_monomers(n, 1.0), k, 2024);
  std::map<Configuration::Counts, std::map<std::pair<std::int64_t, int>, int>> tally;
  for (int j = 0; j < 100000; ++j) {
    const auto before = sim.configuration();
    const auto s = sim.step();
    REQUIRE(s);
    ++tally[before.counts()][{s->second.index, static_cast<int>(s->second.direction)}];
  }
  REQUIRE(tally.size() == 11);  // p(6)
  double chi2 = 0.0;
  int dof = 0;
  for (const auto& [counts, hits] : tally) {
    const Configuration cfg(n, 1.0, counts);
    const auto chans = channel_rates(cfg, k);
    double total_rate = 0.0;
    int visits = 0;
    for (const auto& ch : chans) total_rate += ch.rate;
    for (const auto& [key, h] : hits) visits += h;
    for (const auto& ch : chans) {
      const auto it = hits.find({ch.reaction.index, static_cast<int>(ch.reaction.direction)});
      const double observed = it == hits.end() ? 0.0 : it->second;
      const double expected = visits * ch.rate / total_rate;
      chi2 += (observed - expected) * (observed - expected) / expected;
    }
    // No transitions outside the channel list.
    for (const auto& [key, h] : hits) {
      const bool known = std::any_of(chans.begin(), chans.end(), [&](const ChannelRate& ch) {
        return ch.reaction.index == key.first && static_cast<int>(ch.reaction.direction) == key.second;
      });
      CHECK(known);
    }
    dof += static_cast<int>(chans.size()) - 1;
  }
  CHECK(chi2 < oracle::chi2_quantile(dof, 3.09));
}

TEST_CASE("integer mass holds over long runs") {
  const auto k = RateKernel::constant(1, 1);
  Simulator sim(Configuration::from_monomers(1000, 1.0), k, 4);
  for (int j = 0; j < 200000; ++j) REQUIRE(sim.step());
  CHECK(sim.recount_mass() == 1000);
}

TEST_CASE("long-run occupancy approaches the exact stationary law") {
  const auto k = RateKernel::constant(1, 1);
  const std::int64_t n = 8;
  const auto table = stationary_table(n, 1.0, k, 1.0);
  Simulator sim(Configuration::from_monomers(n, 1.0), k, 31);
  for (int j = 0; j < 100000; ++j) sim.step();
  std::vector<double> occupancy(table.size(), 0.0);
  double total = 0.0;
  for (int j = 0; j < 1000000; ++j) {
    const auto state = table.index_of(sim.configuration());
    const double t0 = sim.time();
    sim.step();
    occupancy[state] += sim.time() - t0;
    total += sim.time() - t0;
  }
  for (auto& o : occupancy) o /= total;
  CHECK(total_variation(occupancy, table.probabilities()) < 0.05);
}
