#include "tcssl/mining.hpp"

#include <cstdlib>

namespace tcssl {

std::int64_t triplet_count_upper_bound(std::int64_t batch_size) {
  return batch_size * batch_size * batch_size;
}

namespace {

template <typename Label, typename IsPositive>
std::vector<Triplet> mine(const std::vector<Label>& labels, IsPositive is_positive) {
  const auto b = static_cast<std::int64_t>(labels.size());
  std::vector<Triplet> out;
  std::vector<std::int64_t> positives, negatives;
  for (std::int64_t a = 0; a < b; ++a) {
    positives.clear();
    negatives.clear();
    for (std::int64_t j = 0; j < b; ++j) {
      if (is_positive(labels[static_cast<std::size_t>(a)], labels[static_cast<std::size_t>(j)])) {
        if (j != a) positives.push_back(j);
      } else {
        negatives.push_back(j);
      }
    }
    for (std::int64_t p : positives) {
      for (std::int64_t n : negatives) out.push_back({a, p, n});
    }
  }
  return out;
}

}  // namespace

std::vector<Triplet> mine_batch_all_windowed(const std::vector<std::int64_t>& pseudo_labels,
                                             std::int64_t window) {
  return mine(pseudo_labels, [window](std::int64_t a, std::int64_t b) {
    return std::abs(a - b) <= window;
  });
}

std::vector<Triplet> mine_batch_all_classes(const std::vector<int>& labels) {
  return mine(labels, [](int a, int b) { return a == b; });
}

}  // namespace tcssl
