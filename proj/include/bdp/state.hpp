#pragma once

// Configurations of the finite state space: integer cluster counts x_i with
// sum_i i x_i = n, scaled to concentrations c_i = (rho/n) x_i. The state
// space is in bijection with the integer partitions of n.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bdp/errors.hpp"
#include "bdp/numeric.hpp"

namespace bdp {

enum class Direction { forward, backward };

/// Default ceiling for exact enumeration; p(60) = 966467 states.
inline constexpr std::int64_t kDefaultEnumerationCap = 60;

class Configuration {
 public:
  using Counts = std::map<std::int64_t, std::int64_t>;

  static Configuration from_monomers(std::int64_t n, double rho) {
    return Configuration(n, rho, Counts{{1, n}});
  }

  /// Validates the mass invariant and drops zero entries.
  Configuration(std::int64_t n, double rho, Counts counts) : n_(n), rho_(rho) {
    if (n < 1) throw InvalidState("configuration: n must be >= 1");
    if (!(rho > 0.0) || !std::isfinite(rho)) throw InvalidState("configuration: rho must be positive");
    std::int64_t mass = 0;
    for (auto [size, count] : counts) {
      if (size < 1 || size > n) throw InvalidState("configuration: cluster size " + std::to_string(size) + " outside [1, n]");
      if (count < 0) throw InvalidState("configuration: negative count at size " + std::to_string(size));
      if (count == 0) continue;
      counts_.emplace(size, count);
      mass += size * count;
    }
    if (mass != n) {
      throw InvalidState("configuration: sum of i*x_i is " + std::to_string(mass) + ", expected n = " + std::to_string(n));
    }
  }

  /// Parses "1:2,2:1" (size:count pairs).
  static Configuration parse(std::string_view literal, std::int64_t n, double rho) {
    Counts counts;
    std::size_t pos = 0;
    while (pos < literal.size()) {
      auto comma = literal.find(',', pos);
      if (comma == std::string_view::npos) comma = literal.size();
      const auto item = literal.substr(pos, comma - pos);
      const auto colon = item.find(':');
      if (colon == std::string_view::npos) {
        throw InvalidState("configuration literal: expected size:count, got '" + std::string(item) + "'");
      }
      const auto size = parse_int(item.substr(0, colon));
      const auto count = parse_int(item.substr(colon + 1));
      if (!counts.emplace(size, count).second) {
        throw InvalidState("configuration literal: size " + std::to_string(size) + " listed twice");
      }
      pos = comma + 1;
    }
    return Configuration(n, rho, std::move(counts));
  }

  std::string to_literal() const {
    std::string out;
    for (auto [size, count] : counts_) {
      if (!out.empty()) out += ',';
      out += std::to_string(size) + ':' + std::to_string(count);
    }
    return out;
  }

  std::int64_t n() const noexcept { return n_; }
  double rho() const noexcept { return rho_; }
  const Counts& counts() const noexcept { return counts_; }

  std::int64_t count(std::int64_t size) const {
    auto it = counts_.find(size);
    return it == counts_.end() ? 0 : it->second;
  }

  std::int64_t max_size() const { return counts_.empty() ? 0 : counts_.rbegin()->first; }

  /// ||c|| = sum_i i c_i; equals rho for every valid configuration.
  double mass() const {
    std::int64_t m = 0;
    for (auto [size, count] : counts_) m += size * count;
    return rho_ * (static_cast<double>(m) / static_cast<double>(n_));
  }

  /// Dense c_i = (rho/n) x_i for i = 1..max stored size.
  std::vector<double> to_concentrations() const {
    std::vector<double> c(static_cast<std::size_t>(max_size()), 0.0);
    const double scale = rho_ / static_cast<double>(n_);
    for (auto [size, count] : counts_) c[static_cast<std::size_t>(size - 1)] = scale * static_cast<double>(count);
    return c;
  }

  bool operator==(const Configuration&) const = default;

 private:
  friend Configuration apply_jump(Configuration cfg, std::int64_t reaction, Direction dir);

  static std::int64_t parse_int(std::string_view s) {
    if (s.empty()) throw InvalidState("configuration literal: empty number");
    std::int64_t v = 0;
    for (char ch : s) {
      if (ch < '0' || ch > '9') throw InvalidState("configuration literal: not an integer: '" + std::string(s) + "'");
      v = v * 10 + (ch - '0');
    }
    return v;
  }

  void add(std::int64_t size, std::int64_t delta) {
    auto& x = counts_[size];
    x += delta;
    if (x == 0) counts_.erase(size);
  }

  std::int64_t n_;
  double rho_;
  Counts counts_;
};

/// Fires reaction `reaction` (C_1 + C_i -> C_{i+1} forward, the reverse backward).
inline Configuration apply_jump(Configuration cfg, std::int64_t reaction, Direction dir) {
  const std::int64_t i = reaction;
  if (i < 1 || i >= cfg.n()) throw InfeasibleJump("apply_jump: reaction index " + std::to_string(i) + " out of range");
  if (dir == Direction::forward) {
    const std::int64_t need_monomers = i == 1 ? 2 : 1;
    if (cfg.count(1) < need_monomers || cfg.count(i) < 1) {
      throw InfeasibleJump("apply_jump: forward reaction " + std::to_string(i) + " infeasible in " + cfg.to_literal());
    }
    cfg.add(1, -1);
    cfg.add(i, -1);
    cfg.add(i + 1, 1);
  } else {
    if (cfg.count(i + 1) < 1) {
      throw InfeasibleJump("apply_jump: backward reaction " + std::to_string(i) + " infeasible in " + cfg.to_literal());
    }
    cfg.add(i + 1, -1);
    cfg.add(i, 1);
    cfg.add(1, 1);
  }
  return cfg;
}

/// Hardy-Ramanujan asymptotic for p(n).
inline double estimate_partition_count(std::int64_t n) {
  const double x = static_cast<double>(n);
  return std::exp(std::numbers::pi * std::sqrt(2.0 * x / 3.0)) / (4.0 * x * std::sqrt(3.0));
}

/// Integer partitions of n in canonical order: lexicographic on the parts
/// written in decreasing order ([1,1,1,1] < [2,1,1] < [2,2] < [3,1] < [4]).
/// States are addressed by rank, so large spaces never need to be stored.
class PartitionSpace {
 public:
  explicit PartitionSpace(std::int64_t n, std::int64_t cap = kDefaultEnumerationCap) : n_(n) {
    if (n < 1) throw InvalidState("partition space: n must be >= 1");
    if (n > cap) {
      const double est = estimate_partition_count(n);
      throw StateSpaceTooLarge("state space for n = " + std::to_string(n) + " has about " + format_double(est) +
                                   " states, above the enumeration cap n <= " + std::to_string(cap),
                               est);
    }
    const auto w = static_cast<std::size_t>(n + 1);
    table_.assign(w * w, 0);
    for (std::size_t k = 0; k < w; ++k) table_[k] = 1;  // P(0, k)
    for (std::size_t m = 1; m < w; ++m) {
      for (std::size_t k = 1; k < w; ++k) {
        std::uint64_t v = at(m, k - 1);
        if (k <= m) v += at(m - k, k);
        table_[m * w + k] = v;
      }
    }
  }

  std::int64_t n() const noexcept { return n_; }
  std::uint64_t size() const { return at(static_cast<std::size_t>(n_), static_cast<std::size_t>(n_)); }

  /// Number of partitions of m with all parts <= k.
  std::uint64_t restricted_count(std::int64_t m, std::int64_t k) const {
    if (m < 0) return 0;
    if (k > m) k = m;
    return at(static_cast<std::size_t>(m), static_cast<std::size_t>(k));
  }

  /// Rank of a count vector (dense, index = size) in canonical order.
  std::uint64_t rank(std::span<const std::int64_t> dense_counts) const {
    std::uint64_t r = 0;
    std::int64_t remaining = n_;
    for (std::int64_t size = static_cast<std::int64_t>(dense_counts.size()) - 1; size >= 1; --size) {
      for (std::int64_t c = 0; c < dense_counts[static_cast<std::size_t>(size)]; ++c) {
        for (std::int64_t f = 1; f < size; ++f) r += restricted_count(remaining - f, f);
        remaining -= size;
      }
    }
    if (remaining != 0) throw InvalidState("partition rank: counts do not sum to n");
    return r;
  }

  std::uint64_t rank(const Configuration& cfg) const {
    if (cfg.n() != n_) throw InvalidState("partition rank: configuration has n = " + std::to_string(cfg.n()));
    std::vector<std::int64_t> dense(static_cast<std::size_t>(cfg.max_size() + 1), 0);
    for (auto [size, count] : cfg.counts()) dense[static_cast<std::size_t>(size)] = count;
    return rank(dense);
  }

  /// Decreasing part list of the partition with the given rank.
  std::vector<std::int64_t> unrank(std::uint64_t r) const {
    if (r >= size()) throw InvalidState("partition unrank: rank out of range");
    std::vector<std::int64_t> parts;
    std::int64_t remaining = n_;
    std::int64_t max_part = n_;
    while (remaining > 0) {
      for (std::int64_t f = 1; f <= std::min(remaining, max_part); ++f) {
        const auto cnt = restricted_count(remaining - f, f);
        if (r < cnt) {
          parts.push_back(f);
          remaining -= f;
          max_part = f;
          break;
        }
        r -= cnt;
      }
    }
    return parts;
  }

  Configuration configuration(std::uint64_t r, double rho) const { return from_parts(unrank(r), rho); }

  Configuration from_parts(std::span<const std::int64_t> parts, double rho) const {
    Configuration::Counts counts;
    for (auto p : parts) ++counts[p];
    return Configuration(n_, rho, std::move(counts));
  }

  /// Calls visit(parts) for every partition in canonical order, where parts
  /// is the decreasing part list.
  void for_each(const std::function<void(std::span<const std::int64_t>)>& visit) const {
    std::vector<std::int64_t> parts;
    parts.reserve(static_cast<std::size_t>(n_));
    generate(n_, n_, parts, visit);
  }

 private:
  std::uint64_t at(std::size_t m, std::size_t k) const { return table_[m * static_cast<std::size_t>(n_ + 1) + k]; }

  static void generate(std::int64_t remaining, std::int64_t max_part, std::vector<std::int64_t>& parts,
                       const std::function<void(std::span<const std::int64_t>)>& visit) {
    if (remaining == 0) {
      visit(parts);
      return;
    }
    for (std::int64_t f = 1; f <= std::min(remaining, max_part); ++f) {
      parts.push_back(f);
      generate(remaining - f, f, parts, visit);
      parts.pop_back();
    }
  }

  std::int64_t n_;
  std::vector<std::uint64_t> table_;
};

inline std::vector<Configuration> enumerate_states(std::int64_t n, double rho,
                                                   std::int64_t cap = kDefaultEnumerationCap) {
  const PartitionSpace space(n, cap);
  std::vector<Configuration> states;
  states.reserve(space.size());
  space.for_each([&](std::span<const std::int64_t> parts) { states.push_back(space.from_parts(parts, rho)); });
  return states;
}

}  // namespace bdp
