#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "tcssl/corpus.hpp"
#include "tcssl/labeling.hpp"
#include "tcssl/rng.hpp"
#include "tcssl/tensor.hpp"

namespace tcssl {

// A batch is always materialized as one dense pixel block plus aligned
// per-frame metadata; pseudo_labels is filled by pretrain sampling,
// labels by supervised sampling.
struct Batch {
  Tensor<float> pixels;  // (B, C, H, W)
  std::vector<FrameRef> refs;
  std::vector<std::int64_t> pseudo_labels;
  std::vector<int> labels;

  std::int64_t size() const { return refs.empty() ? 0 : static_cast<std::int64_t>(refs.size()); }
};

struct PretrainBatchSpec {
  std::int64_t sequence_size = 72;     // N
  std::int64_t sequences_per_batch = 1;  // k
  bool resample = false;  // all k sequences from the same video

  std::int64_t batch_size() const { return sequence_size * sequences_per_batch; }
};

void validate_pretrain_batch_spec(const PretrainBatchSpec& spec);

struct SupervisedBatchSpec {
  std::int64_t batch_size = 72;
  std::map<int, double> class_proportions;  // class -> fraction, sums to 1
};

void validate_supervised_batch_spec(const SupervisedBatchSpec& spec);

/// Largest-remainder apportionment of batch_size slots across classes.
/// Floors round(batch_size*fraction) down, then hands leftover slots to the
/// largest fractional remainders (ties broken by smaller class id). Every
/// class with a nonzero fraction keeps at least one slot.
std::map<int, std::int64_t> apportion_slots(std::int64_t batch_size,
                                            const std::map<int, double>& proportions);

/// k contiguous sequences of N frames each. Video and start offset are drawn
/// uniformly; with resample=true a single video draw covers all k sequences.
/// Draw order is pinned: all (video, start) pairs first, then one augmentation
/// stream pass over frames in batch order.
Batch sample_pretrain_batch(const CorpusReader& corpus, const PretrainBatchSpec& spec,
                            const PseudoLabelConfig& label_cfg, const AugmentPolicy& augment,
                            Rng& rng);

/// Class-indexed view over a labeled frame pool (typically one k-fold training
/// split). Frames keep load order inside each bucket.
struct SupervisedPool {
  FrameShape frame_shape;
  std::vector<Frame> frames;
  std::map<int, std::vector<std::size_t>> by_class;

  static SupervisedPool build(std::vector<Frame> frames);
};

/// Per-class slot counts come from apportion_slots and are deterministic given
/// the spec; membership is random. Classes with more members than slots are
/// sampled without replacement, smaller classes with replacement. Batch order
/// is class-major (ascending class id).
Batch sample_supervised_batch(const SupervisedPool& pool, const SupervisedBatchSpec& spec,
                              const AugmentPolicy& augment, Rng& rng);

}  // namespace tcssl
