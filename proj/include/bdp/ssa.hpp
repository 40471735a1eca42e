#pragma once

// Exact stochastic simulation (Gillespie direct method) of the stochastic
// Becker-Doring process. In count variables x_i = (n/rho) c_i the jump rates
// are
//     forward, reaction 1:     a_1 (rho/n) x_1 (x_1 - 1)
//     forward, reaction i>=2:  a_i (rho/n) x_1 x_i
//     backward, reaction i:    b_{i+1} x_{i+1}
// i.e. (n/rho) times the concentration rates A_i(c), B_{i+1}(c).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bdp/errors.hpp"
#include "bdp/kinetics.hpp"
#include "bdp/parallel.hpp"
#include "bdp/rng.hpp"
#include "bdp/state.hpp"
#include "bdp/sum_tree.hpp"

namespace bdp {

struct Reaction {
  std::int64_t index = 1;
  Direction direction = Direction::forward;

  bool operator==(const Reaction&) const = default;
};

struct ChannelRate {
  Reaction reaction;
  double rate = 0.0;
};

/// All channels with nonzero rate: forward channels by increasing index,
/// then backward channels by increasing index.
inline std::vector<ChannelRate> channel_rates(const Configuration& cfg, const RateKernel& kernel) {
  std::vector<ChannelRate> out;
  const double scale = cfg.rho() / static_cast<double>(cfg.n());
  const auto x1 = static_cast<double>(cfg.count(1));
  for (auto [size, count] : cfg.counts()) {
    if (size >= cfg.n()) continue;
    double rate = 0.0;
    if (size == 1) rate = kernel.a(1) * scale * x1 * (x1 - 1.0);
    else rate = kernel.a(size) * scale * x1 * static_cast<double>(count);
    if (rate > 0.0) out.push_back({{size, Direction::forward}, rate});
  }
  for (auto [size, count] : cfg.counts()) {
    if (size < 2) continue;
    out.push_back({{size - 1, Direction::backward}, kernel.b(size) * static_cast<double>(count)});
  }
  return out;
}

/// Sum-tree index over the reaction channels of one configuration.
///
/// Every forward rate for i >= 2 carries the common factor (rho/n) x_1, so the
/// forward tree stores a_i x_i and the factor is applied at the root. A jump
/// then touches at most two leaves per tree plus the monomer scalar.
class PropensityIndex {
 public:
  PropensityIndex(const RateKernel& kernel, std::int64_t n, double rho)
      : n_(n), scale_(rho / static_cast<double>(n)) {
    a_.assign(static_cast<std::size_t>(n + 1), 0.0);
    b_.assign(static_cast<std::size_t>(n + 1), 0.0);
    for (std::int64_t i = 1; i <= n; ++i) {
      a_[static_cast<std::size_t>(i)] = kernel.a(i);
      if (i >= 2) b_[static_cast<std::size_t>(i)] = kernel.b(i);
    }
    const auto reactions = static_cast<std::size_t>(std::max<std::int64_t>(n - 1, 1));
    forward_.resize(reactions);
    backward_.resize(reactions);
  }

  /// counts[i] = x_i for i = 0..n (counts[0] ignored).
  void build(std::span<const std::int64_t> counts) {
    x1_ = counts[1];
    for (std::int64_t s = 2; s <= n_; ++s) set_size(s, counts[static_cast<std::size_t>(s)]);
  }

  void set_size(std::int64_t size, std::int64_t count) {
    if (size == 1) {
      x1_ = count;
      return;
    }
    const auto x = static_cast<double>(count);
    if (size <= n_ - 1) forward_.set(static_cast<std::size_t>(size - 1), a_[static_cast<std::size_t>(size)] * x);
    backward_.set(static_cast<std::size_t>(size - 2), b_[static_cast<std::size_t>(size)] * x);
  }

  void rebuild() {
    forward_.rebuild();
    backward_.rebuild();
  }

  double monomer_rate() const {
    const auto x1 = static_cast<double>(x1_);
    return a_[1] * scale_ * x1 * (x1 - 1.0);
  }
  double forward_factor() const { return scale_ * static_cast<double>(x1_); }
  double total() const { return monomer_rate() + forward_factor() * forward_.total() + backward_.total(); }

  /// Channel containing u in [0, total()).
  Reaction select(double u) const {
    const double m = monomer_rate();
    if (u < m) return {1, Direction::forward};
    u -= m;
    const double fwd = forward_factor() * forward_.total();
    if ((u < fwd && fwd > 0.0) || backward_.total() <= 0.0) {
      const auto leaf = forward_.find(u / forward_factor());
      return {static_cast<std::int64_t>(leaf) + 1, Direction::forward};
    }
    u -= fwd;
    const auto leaf = backward_.find(u);
    return {static_cast<std::int64_t>(leaf) + 1, Direction::backward};
  }

  /// Rate of one channel as currently indexed.
  double rate(Reaction r) const {
    const auto i = static_cast<std::size_t>(r.index);
    if (r.direction == Direction::forward) {
      if (r.index == 1) return monomer_rate();
      return forward_factor() * forward_.weight(i - 1);
    }
    return backward_.weight(i - 1);
  }

 private:
  std::int64_t n_;
  double scale_;
  std::vector<double> a_;
  std::vector<double> b_;
  SumTree forward_;
  SumTree backward_;
  std::int64_t x1_ = 0;
};

/// A proposed jump: the absolute time at which it fires and the channel.
struct Event {
  double time = 0.0;
  Reaction reaction;
};

/// One SSA trajectory. The state is held as dense counts; the Configuration
/// value type is produced on demand at the API boundary.
class Simulator {
 public:
  static constexpr std::uint64_t kRebuildInterval = 1'000'000;
  static constexpr std::uint64_t kMassAuditInterval = 1 << 16;

  Simulator(const Configuration& cfg0, const RateKernel& kernel, std::uint64_t seed)
      : n_(cfg0.n()), rho_(cfg0.rho()), rng_(seed), index_(kernel, cfg0.n(), cfg0.rho()) {
    counts_.assign(static_cast<std::size_t>(n_ + 2), 0);
    for (auto [size, count] : cfg0.counts()) counts_[static_cast<std::size_t>(size)] = count;
    index_.build(counts_);
    mass_ = n_;
  }

  double time() const noexcept { return time_; }
  std::uint64_t jumps() const noexcept { return jumps_; }
  std::int64_t n() const noexcept { return n_; }
  double rho() const noexcept { return rho_; }
  std::span<const std::int64_t> counts() const { return {counts_.data(), static_cast<std::size_t>(n_ + 1)}; }
  double total_rate() const { return index_.total(); }
  const PropensityIndex& index() const noexcept { return index_; }

  Configuration configuration() const {
    Configuration::Counts c;
    for (std::int64_t s = 1; s <= n_; ++s) {
      if (counts_[static_cast<std::size_t>(s)] > 0) c.emplace(s, counts_[static_cast<std::size_t>(s)]);
    }
    return Configuration(n_, rho_, std::move(c));
  }

  /// Draws the next event without applying it; nullopt in an absorbing state.
  std::optional<Event> propose() {
    const double total = index_.total();
    if (!(total > 0.0)) return std::nullopt;
    const double tau = rng_.exponential(total);
    const double u = rng_.uniform() * total;
    return Event{time_ + tau, index_.select(std::min(u, std::nextafter(total, 0.0)))};
  }

  void commit(const Event& ev) {
    apply(ev.reaction);
    time_ = ev.time;
  }

  /// propose + commit. Returns the waiting time and fired channel.
  std::optional<std::pair<double, Reaction>> step() {
    auto ev = propose();
    if (!ev) return std::nullopt;
    const double wait = ev->time - time_;
    commit(*ev);
    return std::make_pair(wait, ev->reaction);
  }

  /// Full O(n) recount of sum_i i x_i.
  std::int64_t recount_mass() const {
    std::int64_t m = 0;
    for (std::int64_t s = 1; s <= n_; ++s) m += s * counts_[static_cast<std::size_t>(s)];
    return m;
  }

 private:
  void change(std::int64_t size, std::int64_t delta) {
    auto& x = counts_[static_cast<std::size_t>(size)];
    x += delta;
    if (x < 0) {
      throw InfeasibleJump("simulator: negative count at size " + std::to_string(size) + " after jump " +
                           std::to_string(jumps_));
    }
    mass_ += size * delta;
    index_.set_size(size, x);
  }

  void apply(Reaction r) {
    const std::int64_t i = r.index;
    if (i < 1 || i >= n_) throw InfeasibleJump("simulator: reaction index out of range");
    if (r.direction == Direction::forward) {
      change(1, -1);
      change(i, -1);
      change(i + 1, 1);
    } else {
      change(i + 1, -1);
      change(i, 1);
      change(1, 1);
    }
    ++jumps_;
    if (mass_ != n_) throw InfeasibleJump("simulator: mass invariant broken at jump " + std::to_string(jumps_));
    if (jumps_ % kMassAuditInterval == 0 && recount_mass() != n_) {
      throw InfeasibleJump("simulator: mass audit failed at jump " + std::to_string(jumps_));
    }
    if (jumps_ % kRebuildInterval == 0) index_.rebuild();
  }

  std::int64_t n_;
  double rho_;
  Rng rng_;
  PropensityIndex index_;
  std::vector<std::int64_t> counts_;
  std::int64_t mass_ = 0;
  double time_ = 0.0;
  std::uint64_t jumps_ = 0;
};

/// Observables recorded at one grid time.
struct Sample {
  double t = 0.0;
  std::vector<double> c;   // c_1..c_cutoff
  double tail_mass = 0.0;  // sum_{i > cutoff} i c_i
  double mass = 0.0;
  double weighted_moment = 0.0;  // sum_i w(i) c_i, when a weight is supplied
  std::uint64_t jumps = 0;
};

struct Trajectory {
  std::vector<Sample> samples;
  std::uint64_t jump_count = 0;
  double wall_seconds = 0.0;
  bool absorbed = false;
};

struct TrajectoryOptions {
  /// Largest size whose concentration is recorded; 0 means n.
  std::int64_t cutoff = 0;
  /// Optional weight w for the moment sum_i w(i) c_i.
  std::function<double(std::int64_t)> weight;
};

inline Sample observe(std::span<const std::int64_t> counts, std::int64_t n, double rho, double t,
                      std::uint64_t jumps, const TrajectoryOptions& opts) {
  Sample s;
  s.t = t;
  s.jumps = jumps;
  const std::int64_t cutoff = opts.cutoff > 0 ? std::min(opts.cutoff, n) : n;
  s.c.assign(static_cast<std::size_t>(cutoff), 0.0);
  const double scale = rho / static_cast<double>(n);
  std::int64_t mass = 0;
  std::int64_t tail = 0;
  NeumaierSum moment;
  for (std::int64_t i = 1; i <= n; ++i) {
    const auto x = counts[static_cast<std::size_t>(i)];
    if (x == 0) continue;
    mass += i * x;
    if (i <= cutoff) s.c[static_cast<std::size_t>(i - 1)] = scale * static_cast<double>(x);
    else tail += i * x;
    if (opts.weight) moment += opts.weight(i) * scale * static_cast<double>(x);
  }
  s.mass = rho * (static_cast<double>(mass) / static_cast<double>(n));
  s.tail_mass = rho * (static_cast<double>(tail) / static_cast<double>(n));
  s.weighted_moment = moment.value();
  return s;
}

inline void validate_grid(std::span<const double> grid, double t_end) {
  if (!(t_end >= 0.0)) throw ConfigError("time grid: t_end must be >= 0");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid[k] < 0.0 || grid[k] > t_end) throw ConfigError("time grid: point outside [0, t_end]");
    if (k > 0 && !(grid[k] > grid[k - 1])) throw ConfigError("time grid: points must be strictly increasing");
  }
}

/// `count` equally spaced points on [0, t_end] (a single point 0 when t_end = 0).
inline std::vector<double> uniform_grid(double t_end, std::size_t count) {
  if (t_end == 0.0 || count <= 1) return {0.0};
  std::vector<double> g(count);
  for (std::size_t k = 0; k < count; ++k) g[k] = t_end * static_cast<double>(k) / static_cast<double>(count - 1);
  g.back() = t_end;
  return g;
}

/// Runs the simulator to t_end, reporting the state at each grid time as the
/// last state before or at that time. on_jump, when given, sees every fired
/// event before it is applied.
template <class OnSample, class OnJump>
void run_sampled(Simulator& sim, double t_end, std::span<const double> grid, OnSample&& on_sample, OnJump&& on_jump) {
  std::size_t g = 0;
  while (true) {
    auto ev = sim.propose();
    const double next = ev ? ev->time : kInf;
    while (g < grid.size() && grid[g] < next) on_sample(grid[g++]);
    if (!ev || ev->time > t_end) break;
    on_jump(*ev);
    sim.commit(*ev);
  }
  while (g < grid.size()) on_sample(grid[g++]);
}

inline Trajectory simulate(const Configuration& cfg0, const RateKernel& kernel, double t_end,
                           std::span<const double> grid, std::uint64_t seed, const TrajectoryOptions& opts = {}) {
  validate_grid(grid, t_end);
  const auto start = std::chrono::steady_clock::now();
  Simulator sim(cfg0, kernel, seed);
  Trajectory traj;
  traj.samples.reserve(grid.size());
  run_sampled(
      sim, t_end, grid,
      [&](double t) { traj.samples.push_back(observe(sim.counts(), sim.n(), sim.rho(), t, sim.jumps(), opts)); },
      [](const Event&) {});
  traj.jump_count = sim.jumps();
  traj.absorbed = !(sim.total_rate() > 0.0);
  traj.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return traj;
}

/// Streaming mean/variance per (grid point, observable).
class EnsembleStats {
 public:
  EnsembleStats() = default;
  EnsembleStats(std::vector<double> grid, std::vector<std::string> observables)
      : grid_(std::move(grid)), names_(std::move(observables)) {
    mean_.assign(grid_.size() * names_.size(), 0.0);
    m2_.assign(mean_.size(), 0.0);
  }

  /// Folds one replica's values, laid out [grid][observable].
  void add(std::span<const double> values) {
    ++replicas_;
    const double k = static_cast<double>(replicas_);
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double delta = values[j] - mean_[j];
      mean_[j] += delta / k;
      m2_[j] += delta * (values[j] - mean_[j]);
    }
  }

  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<std::string>& observables() const noexcept { return names_; }
  std::int64_t replicas() const noexcept { return replicas_; }

  std::size_t observable(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw ConfigError("ensemble: unknown observable '" + name + "'");
    return static_cast<std::size_t>(it - names_.begin());
  }

  double mean(std::size_t g, std::size_t obs) const { return mean_[g * names_.size() + obs]; }
  double variance(std::size_t g, std::size_t obs) const {
    return replicas_ > 1 ? m2_[g * names_.size() + obs] / static_cast<double>(replicas_ - 1) : 0.0;
  }
  double standard_error(std::size_t g, std::size_t obs) const {
    return std::sqrt(variance(g, obs) / static_cast<double>(replicas_));
  }

 private:
  std::vector<double> grid_;
  std::vector<std::string> names_;
  std::vector<double> mean_;
  std::vector<double> m2_;
  std::int64_t replicas_ = 0;
};

struct EnsembleOptions {
  TrajectoryOptions trajectory;
  unsigned threads = 1;
  /// Replicas simulated concurrently before being folded, in index order.
  std::size_t block = 64;
};

/// m independent replicas; replica r uses seed derive_stream_seed(master_seed, r).
/// Replicas are folded strictly in index order, so the result does not depend
/// on the thread count.
inline EnsembleStats ensemble(const Configuration& cfg0, const RateKernel& kernel, double t_end,
                              std::span<const double> grid, std::int64_t m, std::uint64_t master_seed,
                              const EnsembleOptions& opts = {}) {
  if (m < 1) throw ConfigError("ensemble: replica count must be >= 1");
  validate_grid(grid, t_end);
  const std::int64_t cutoff = opts.trajectory.cutoff > 0 ? std::min(opts.trajectory.cutoff, cfg0.n()) : cfg0.n();
  std::vector<std::string> names;
  for (std::int64_t i = 1; i <= cutoff; ++i) names.push_back("c_" + std::to_string(i));
  names.emplace_back("tail_mass");
  names.emplace_back("mass");
  if (opts.trajectory.weight) names.emplace_back("weighted_moment");
  EnsembleStats stats(std::vector<double>(grid.begin(), grid.end()), names);

  const std::size_t per_grid = names.size();
  const std::size_t block = std::max<std::size_t>(opts.block, 1);
  std::vector<std::vector<double>> buffer;
  for (std::int64_t first = 0; first < m; first += static_cast<std::int64_t>(block)) {
    const auto count = static_cast<std::size_t>(std::min<std::int64_t>(static_cast<std::int64_t>(block), m - first));
    buffer.assign(count, {});
    parallel_for(count, opts.threads, [&](std::size_t k) {
      const auto r = static_cast<std::uint64_t>(first) + k;
      const auto traj = simulate(cfg0, kernel, t_end, grid, derive_stream_seed(master_seed, r), opts.trajectory);
      auto& v = buffer[k];
      v.reserve(grid.size() * per_grid);
      for (const auto& s : traj.samples) {
        v.insert(v.end(), s.c.begin(), s.c.end());
        v.push_back(s.tail_mass);
        v.push_back(s.mass);
        if (opts.trajectory.weight) v.push_back(s.weighted_moment);
      }
    });
    for (const auto& v : buffer) stats.add(v);
  }
  return stats;
}

}  // namespace bdp
