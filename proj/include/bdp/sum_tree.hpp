#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace bdp {

/// Complete binary tree of partial sums over a fixed number of leaves.
/// Internal nodes are recomputed as the sum of their children on every
/// update, so the root never accumulates incremental round-off.
class SumTree {
 public:
  SumTree() = default;
  explicit SumTree(std::size_t leaves) { resize(leaves); }

  void resize(std::size_t leaves) {
    leaves_ = leaves;
    width_ = 1;
    while (width_ < leaves) width_ <<= 1;
    nodes_.assign(2 * width_, 0.0);
  }

  std::size_t size() const noexcept { return leaves_; }
  double total() const noexcept { return nodes_.empty() ? 0.0 : nodes_[1]; }
  double weight(std::size_t leaf) const { return nodes_[width_ + leaf]; }

  void set(std::size_t leaf, double w) {
    assert(leaf < leaves_ && w >= 0.0);
    std::size_t k = width_ + leaf;
    nodes_[k] = w;
    for (k >>= 1; k >= 1; k >>= 1) nodes_[k] = nodes_[2 * k] + nodes_[2 * k + 1];
  }

  /// Recomputes every internal node from the leaves.
  void rebuild() {
    for (std::size_t k = width_ - 1; k >= 1; --k) nodes_[k] = nodes_[2 * k] + nodes_[2 * k + 1];
  }

  /// Leaf whose cumulative interval contains u, for u in [0, total()).
  /// Never returns a zero-weight leaf while total() > 0.
  std::size_t find(double u) const {
    std::size_t k = 1;
    while (k < width_) {
      const double left = nodes_[2 * k];
      const double right = nodes_[2 * k + 1];
      if (u < left || right <= 0.0) {
        k = 2 * k;
      } else {
        u -= left;
        k = 2 * k + 1;
      }
    }
    return k - width_;
  }

 private:
  std::size_t leaves_ = 0;
  std::size_t width_ = 1;
  std::vector<double> nodes_;
};

}  // namespace bdp
