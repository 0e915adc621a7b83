#include "tcssl/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <utility>

namespace tcssl {

void validate_pretrain_batch_spec(const PretrainBatchSpec& spec) {
  if (spec.sequence_size < 1 || spec.sequences_per_batch < 1) {
    throw ConfigError("pretrain batch: sequence_size and sequences_per_batch must be >= 1");
  }
}

void validate_supervised_batch_spec(const SupervisedBatchSpec& spec) {
  if (spec.batch_size < 1) throw ConfigError("supervised batch: batch_size must be >= 1");
  if (spec.class_proportions.empty()) {
    throw ConfigError("supervised batch: class_proportions is empty");
  }
  double sum = 0.0;
  std::int64_t nonzero = 0;
  for (const auto& [cls, frac] : spec.class_proportions) {
    if (frac < 0.0 || frac > 1.0) {
      throw ConfigError("supervised batch: proportion for class " + std::to_string(cls) +
                        " outside [0, 1]");
    }
    if (frac > 0.0) ++nonzero;
    sum += frac;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("supervised batch: proportions sum to " + std::to_string(sum) + ", not 1");
  }
  if (nonzero == 0) throw ConfigError("supervised batch: all proportions are zero");
  if (nonzero > spec.batch_size) {
    throw ConfigError("supervised batch: batch_size " + std::to_string(spec.batch_size) +
                      " cannot give every nonzero class a slot");
  }
}

std::map<int, std::int64_t> apportion_slots(std::int64_t batch_size,
                                            const std::map<int, double>& proportions) {
  std::int64_t nonzero_classes = 0;
  for (const auto& [cls, frac] : proportions) nonzero_classes += frac > 0.0 ? 1 : 0;
  if (batch_size < nonzero_classes) {
    throw ConfigError("apportion_slots: batch_size " + std::to_string(batch_size) +
                      " cannot give " + std::to_string(nonzero_classes) +
                      " classes a slot each");
  }

  std::map<int, std::int64_t> slots;
  std::vector<std::pair<double, int>> remainders;  // (-remainder, class) for stable sort
  std::int64_t assigned = 0;
  for (const auto& [cls, frac] : proportions) {
    const double exact = static_cast<double>(batch_size) * frac;
    const auto base = static_cast<std::int64_t>(std::floor(exact));
    slots[cls] = base;
    assigned += base;
    remainders.emplace_back(-(exact - static_cast<double>(base)), cls);
  }
  std::sort(remainders.begin(), remainders.end());
  std::int64_t leftover = batch_size - assigned;
  for (std::size_t i = 0; leftover > 0; i = (i + 1) % remainders.size()) {
    ++slots[remainders[i].second];
    --leftover;
  }
  // Largest remainder can still starve a tiny class; steal from the largest.
  for (auto& [cls, count] : slots) {
    if (count > 0 || proportions.at(cls) <= 0.0) continue;
    auto donor = slots.end();
    for (auto it = slots.begin(); it != slots.end(); ++it) {
      if (donor == slots.end() || it->second > donor->second) donor = it;
    }
    --donor->second;
    ++count;
  }
  return slots;
}

Batch sample_pretrain_batch(const CorpusReader& corpus, const PretrainBatchSpec& spec,
                            const PseudoLabelConfig& label_cfg, const AugmentPolicy& augment,
                            Rng& rng) {
  validate_pretrain_batch_spec(spec);
  const auto& manifest = corpus.manifest();
  const std::int64_t n = spec.sequence_size;
  const std::int64_t k = spec.sequences_per_batch;
  if (manifest.frames_per_video < n) {
    throw DataError("pretrain batch: videos have " + std::to_string(manifest.frames_per_video) +
                    " frames, need a sequence of " + std::to_string(n));
  }
  const std::vector<std::int64_t> videos = corpus.video_ids();
  const auto num_videos = static_cast<std::int64_t>(videos.size());
  const std::int64_t max_start = manifest.frames_per_video - n;

  std::vector<std::int64_t> seq_video(static_cast<std::size_t>(k));
  std::vector<std::int64_t> seq_start(static_cast<std::size_t>(k));
  std::int64_t shared_video = 0;
  if (spec.resample) shared_video = videos[static_cast<std::size_t>(rng.uniform_int(num_videos))];
  for (std::int64_t s = 0; s < k; ++s) {
    seq_video[static_cast<std::size_t>(s)] =
        spec.resample ? shared_video : videos[static_cast<std::size_t>(rng.uniform_int(num_videos))];
    seq_start[static_cast<std::size_t>(s)] = rng.uniform_int(max_start + 1);
  }

  const FrameShape shape = manifest.frame_shape;
  const std::int64_t fsize = shape.numel();
  Batch batch;
  batch.pixels = Tensor<float>({n * k, shape.channels, shape.height, shape.width});
  batch.refs.reserve(static_cast<std::size_t>(n * k));
  batch.pseudo_labels.reserve(static_cast<std::size_t>(n * k));
  if (manifest.labeled) batch.labels.reserve(static_cast<std::size_t>(n * k));

  std::int64_t row = 0;
  for (std::int64_t s = 0; s < k; ++s) {
    const std::int64_t v = seq_video[static_cast<std::size_t>(s)];
    const std::int64_t start = seq_start[static_cast<std::size_t>(s)];
    const std::vector<float>& pixels = corpus.video_pixels(v);
    for (std::int64_t t = 0; t < n; ++t, ++row) {
      const FrameRef ref{v, start + t};
      std::memcpy(batch.pixels.data() + row * fsize, pixels.data() + ref.frame_index * fsize,
                  static_cast<std::size_t>(fsize) * sizeof(float));
      batch.refs.push_back(ref);
      batch.pseudo_labels.push_back(pseudo_label(ref, label_cfg).value);
      if (manifest.labeled) {
        batch.labels.push_back(corpus.video_labels(v)[static_cast<std::size_t>(ref.frame_index)]);
      }
    }
  }
  for (std::int64_t r = 0; r < n * k; ++r) {
    augment_in_place(batch.pixels.data() + r * fsize, shape, augment, rng);
  }
  return batch;
}

SupervisedPool SupervisedPool::build(std::vector<Frame> frames) {
  SupervisedPool pool;
  pool.frames = std::move(frames);
  for (std::size_t i = 0; i < pool.frames.size(); ++i) {
    const Frame& f = pool.frames[i];
    if (f.label < 0) {
      throw DataError("supervised pool: frame (" + std::to_string(f.ref.video_id) + ", " +
                      std::to_string(f.ref.frame_index) + ") has no label");
    }
    pool.by_class[f.label].push_back(i);
  }
  if (!pool.frames.empty()) {
    const auto& s = pool.frames.front().pixels.shape();
    pool.frame_shape = FrameShape{s[0], s[1], s[2]};
  }
  return pool;
}

Batch sample_supervised_batch(const SupervisedPool& pool, const SupervisedBatchSpec& spec,
                              const AugmentPolicy& augment, Rng& rng) {
  validate_supervised_batch_spec(spec);
  for (const auto& [cls, frac] : spec.class_proportions) {
    if (frac > 0.0 && pool.by_class.count(cls) == 0) {
      throw DataError("supervised batch: class " + std::to_string(cls) +
                      " has proportion " + std::to_string(frac) + " but no samples");
    }
  }
  const std::map<int, std::int64_t> slots = apportion_slots(spec.batch_size, spec.class_proportions);

  const FrameShape shape = pool.frame_shape;
  const std::int64_t fsize = shape.numel();
  Batch batch;
  batch.pixels = Tensor<float>({spec.batch_size, shape.channels, shape.height, shape.width});
  batch.refs.reserve(static_cast<std::size_t>(spec.batch_size));
  batch.labels.reserve(static_cast<std::size_t>(spec.batch_size));

  std::int64_t row = 0;
  for (const auto& [cls, count] : slots) {
    if (count == 0) continue;
    const std::vector<std::size_t>& bucket = pool.by_class.at(cls);
    const auto bucket_size = static_cast<std::int64_t>(bucket.size());
    std::vector<std::size_t> picks;
    picks.reserve(static_cast<std::size_t>(count));
    if (bucket_size >= count) {
      std::vector<std::size_t> shuffled = bucket;
      for (std::int64_t i = 0; i < count; ++i) {
        const std::int64_t j = i + rng.uniform_int(bucket_size - i);
        std::swap(shuffled[static_cast<std::size_t>(i)], shuffled[static_cast<std::size_t>(j)]);
        picks.push_back(shuffled[static_cast<std::size_t>(i)]);
      }
    } else {
      for (std::int64_t i = 0; i < count; ++i) {
        picks.push_back(bucket[static_cast<std::size_t>(rng.uniform_int(bucket_size))]);
      }
    }
    for (std::size_t idx : picks) {
      const Frame& f = pool.frames[idx];
      std::memcpy(batch.pixels.data() + row * fsize, f.pixels.data(),
                  static_cast<std::size_t>(fsize) * sizeof(float));
      batch.refs.push_back(f.ref);
      batch.labels.push_back(f.label);
      ++row;
    }
  }
  for (std::int64_t r = 0; r < spec.batch_size; ++r) {
    augment_in_place(batch.pixels.data() + r * fsize, shape, augment, rng);
  }
  return batch;
}

}  // namespace tcssl
