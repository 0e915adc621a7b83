#pragma once

#include <cstdint>
#include <vector>

namespace tcssl {

struct Triplet {
  std::int64_t a = 0;
  std::int64_t p = 0;
  std::int64_t n = 0;

  friend bool operator==(const Triplet& x, const Triplet& y) {
    return x.a == y.a && x.p == y.p && x.n == y.n;
  }
};

/// batch_size^3, the hard cap on batch-all output; used as an allocation guard.
std::int64_t triplet_count_upper_bound(std::int64_t batch_size);

// Batch-all mining: the exact set {(a, p, n) : positive(a, p), a != p,
// negative(a, n)}, ascending (a, p, n). An index is always positive with
// itself (distance 0, same class), so n != a and n != p hold by construction.
// Anchor-positive pairs are ordered: both (a, p, n) and (p, a, n) appear.

/// Windowed predicate over pseudo-labels: positive iff |y_a - y_b| <= window.
std::vector<Triplet> mine_batch_all_windowed(const std::vector<std::int64_t>& pseudo_labels,
                                             std::int64_t window);

/// Class-equality predicate over task labels.
std::vector<Triplet> mine_batch_all_classes(const std::vector<int>& labels);

}  // namespace tcssl
