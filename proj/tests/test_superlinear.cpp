#include <catch_amalgamated.hpp>

#include <random>

#include "bdp/superlinear.hpp"
#include "oracles.hpp"

using namespace bdp;
using Catch::Approx;

namespace {

constexpr double kSlopeUnset = -1.0;

std::vector<std::int64_t> random_thresholds(std::mt19937_64& gen) {
  std::vector<std::int64_t> t;
  std::int64_t prev = 1;
  std::int64_t gap = 1 + static_cast<std::int64_t>(gen() % 4);
  const int levels = 1 + static_cast<int>(gen() % 8);
  for (int m = 0; m < levels; ++m) {
    gap += static_cast<std::int64_t>(gen() % 3);
    prev += gap;
    t.push_back(prev);
  }
  return t;
}

}  // namespace

TEST_CASE("phi = x^2/2 on [0,1]") {
  const auto w = SuperlinearWeight::build({2, 4, 8, 16});
  CHECK(w.phi(0.5) == 0.125);
  CHECK(w.phi(1.0) == 0.5);
  CHECK(w.p(0.3) == 0.3);
}

TEST_CASE("doubling thresholds: phi at integers equals quadrature of p") {
  std::vector<std::int64_t> t;
  for (int m = 0; m < 8; ++m) t.push_back(2 << m);
  const auto w = SuperlinearWeight::build(t);
  // Simpson is exact on each linear piece when the breakpoints are grid nodes.
  for (std::int64_t i : {1, 2, 3, 7, 16, 100, 511, 1000}) {
    const double q = oracle::simpson([&](double x) { return w.p(x); }, 0.0, static_cast<double>(i), 2 * static_cast<int>(i) * 64);
    CHECK(w.phi(static_cast<double>(i)) == Approx(q).epsilon(1e-12));
  }
  double prev = 0.0;
  for (std::int64_t m = 0; m < 12; ++m) {
    const double n = static_cast<double>(w.threshold(m));
    const double ratio = w.phi(n) / n;
    CHECK(ratio > prev);
    prev = ratio;
  }
}

TEST_CASE("invalid thresholds") {
  CHECK_THROWS_AS(SuperlinearWeight::build({}), InvalidThresholds);
  CHECK_THROWS_AS(SuperlinearWeight::build({1, 3}), InvalidThresholds);
  CHECK_THROWS_AS(SuperlinearWeight::build({3, 4}), InvalidThresholds);     // gap 1 after gap 2
  CHECK_THROWS_AS(SuperlinearWeight::build({2, 5, 7}), InvalidThresholds);  // gap 2 after gap 3
  CHECK_THROWS_AS(SuperlinearWeight::build({4, 4}), InvalidThresholds);
  CHECK_NOTHROW(SuperlinearWeight::build({2, 3, 4}));
}

TEST_CASE("weight invariants over randomized thresholds") {
  std::mt19937_64 gen(42);
  for (int rep = 0; rep < 100; ++rep) {
    const auto t = random_thresholds(gen);
    const auto w = SuperlinearWeight::build(t);
    const double top = static_cast<double>(w.threshold(20));
    double prev_p = 0.0, prev_slope = kSlopeUnset;
    for (double x = 0.0; x <= top; x += 0.25) {
      const double p = w.p(x);
      REQUIRE(p >= prev_p);          // convex phi
      REQUIRE(p <= x + 1e-12);       // phi' <= x
      if (x > 0.0) {
        const double slope = (p - prev_p) / 0.25;
        if (prev_slope != kSlopeUnset) REQUIRE(slope <= prev_slope + 1e-9);  // concave phi'
        prev_slope = slope;
      }
      prev_p = p;
      if (x <= 1.0) REQUIRE(w.phi(x) == 0.5 * x * x);
    }
    for (std::int64_t k = 1; k < static_cast<std::int64_t>(top); ++k) {
      REQUIRE(w.phi(static_cast<double>(k + 1)) <= static_cast<double>((k + 1) * w.alpha(k + 1)) + 1e-9);
    }
    double ratio = 0.0;
    for (std::int64_t m = 0; m < 20; ++m) {
      const double n = static_cast<double>(w.threshold(m));
      REQUIRE(w.phi(n) / n > ratio);
      ratio = w.phi(n) / n;
    }
  }
}

TEST_CASE("thresholds from tail masses") {
  // Monomeric data: all mass at size 1, so N_0 = 2 and the gaps stay at 1.
  const auto t = thresholds_from_tail_masses({{1.0}, {1.0}}, 4);
  CHECK(t == std::vector<std::int64_t>{2, 3, 4, 5});
  // A geometric tail pushes the thresholds out.
  std::vector<double> geo(200);
  for (std::size_t k = 0; k < geo.size(); ++k) geo[k] = std::pow(0.5, static_cast<double>(k + 1));
  const auto g = thresholds_from_tail_masses({geo}, 5);
  CHECK_NOTHROW(SuperlinearWeight::build(g));
  for (std::size_t m = 0; m < g.size(); ++m) {
    double tail = 0.0;
    for (std::size_t k = static_cast<std::size_t>(g[m]); k <= geo.size(); ++k) tail += static_cast<double>(k + 1) * geo[k - 1];
    CHECK(tail < 1.0 / std::pow(static_cast<double>(m + 3), 3));
  }
}
