#include <catch_amalgamated.hpp>

#include <random>

#include "bdp/sum_tree.hpp"

using bdp::SumTree;

TEST_CASE("root tracks the leaf sum under random updates") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (std::size_t leaves : {1u, 2u, 3u, 17u, 64u, 1000u}) {
    SumTree t(leaves);
    std::vector<double> w(leaves, 0.0);
    for (int rep = 0; rep < 5000; ++rep) {
      const auto k = gen() % leaves;
      w[k] = (gen() % 4 == 0) ? 0.0 : u(gen);
      t.set(k, w[k]);
      double brute = 0.0;
      for (double v : w) brute += v;
      REQUIRE(t.total() == Catch::Approx(brute).epsilon(1e-12));
    }
  }
}

TEST_CASE("find selects by cumulative weight and skips empty leaves") {
  SumTree t(5);
  t.set(0, 1.0);
  t.set(1, 0.0);
  t.set(2, 2.0);
  t.set(3, 0.0);
  t.set(4, 3.0);
  CHECK(t.find(0.0) == 0);
  CHECK(t.find(0.999) == 0);
  CHECK(t.find(1.0) == 2);
  CHECK(t.find(2.999) == 2);
  CHECK(t.find(3.0) == 4);
  CHECK(t.find(5.999) == 4);
  // u at the very top must not land on a trailing zero leaf.
  SumTree z(4);
  z.set(0, 1.0);
  CHECK(z.find(std::nextafter(1.0, 0.0)) == 0);
}

TEST_CASE("selection frequencies match weights") {
  SumTree t(7);
  const std::vector<double> w{0.5, 0.0, 1.5, 2.0, 0.0, 3.0, 1.0};
  for (std::size_t k = 0; k < w.size(); ++k) t.set(k, w[k]);
  std::mt19937_64 gen(1);
  std::vector<int> hits(w.size(), 0);
  const int draws = 200000;
  for (int d = 0; d < draws; ++d) {
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53 * t.total();
    ++hits[t.find(u)];
  }
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double p = w[k] / t.total();
    const double sigma = std::sqrt(p * (1 - p) / draws);
    CHECK(std::abs(hits[k] / static_cast<double>(draws) - p) <= 4 * sigma + 1e-12);
  }
}

TEST_CASE("rebuild reproduces incremental sums") {
  SumTree t(33);
  for (std::size_t k = 0; k < 33; ++k) t.set(k, 0.1 * static_cast<double>(k));
  const double before = t.total();
  t.rebuild();
  CHECK(t.total() == before);
}
