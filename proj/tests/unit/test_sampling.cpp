#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "tcssl/corpus.hpp"
#include "tcssl/sampling.hpp"

using namespace tcssl;
namespace fs = std::filesystem;

namespace {

// One shared corpus per layout, generated lazily into the temp dir.
const CorpusReader& fixture_corpus(std::int64_t videos, std::int64_t frames, bool labeled,
                                   double rate = 0.0) {
  static std::map<std::string, CorpusReader*> cache;
  std::string key = std::to_string(videos) + "x" + std::to_string(frames) +
                    (labeled ? "L" : "U") + std::to_string(rate);
  auto it = cache.find(key);
  if (it == cache.end()) {
    fs::path dir = fs::temp_directory_path() / "tcssl_test_sampling" / key;
    fs::remove_all(dir);
    fs::create_directories(dir);
    GeneratorSpec spec;
    spec.num_videos = videos;
    spec.frames_per_video = frames;
    spec.labeled = labeled;
    spec.anomaly_rate = rate;
    spec.seed = 40;
    generate_corpus(spec, dir.string(), key);
    it = cache.emplace(key, new CorpusReader(dir.string())).first;
  }
  return *it->second;
}

PseudoLabelConfig label_cfg(std::int64_t n) {
  PseudoLabelConfig cfg;
  cfg.sequence_size = n;
  cfg.window = std::min<std::int64_t>(9, n);
  return cfg;
}

}  // namespace

TEST_SUITE("sampling") {

TEST_CASE("single 72-frame sequence is contiguous within one video") {
  const CorpusReader& corpus = fixture_corpus(4, 100, false);
  PretrainBatchSpec spec;  // N=72, k=1
  Rng rng(50);
  Batch batch = sample_pretrain_batch(corpus, spec, label_cfg(72), AugmentPolicy{}, rng);
  REQUIRE(batch.size() == 72);
  for (std::int64_t i = 1; i < 72; ++i) {
    CHECK(batch.refs[i].video_id == batch.refs[0].video_id);
    CHECK(batch.refs[i].frame_index == batch.refs[i - 1].frame_index + 1);
  }
  CHECK(batch.pixels.shape() == std::vector<std::int64_t>{72, 3, 16, 16});
}

TEST_CASE("every sequence in a batch is contiguous and single-video") {
  const CorpusReader& corpus = fixture_corpus(6, 50, false);
  PretrainBatchSpec spec;
  spec.sequence_size = 9;
  spec.sequences_per_batch = 8;
  Rng rng(51);
  for (int round = 0; round < 50; ++round) {
    Batch batch = sample_pretrain_batch(corpus, spec, label_cfg(9), AugmentPolicy{}, rng);
    REQUIRE(batch.size() == 72);
    for (std::int64_t s = 0; s < 8; ++s) {
      const FrameRef& head = batch.refs[static_cast<std::size_t>(s * 9)];
      CHECK(head.frame_index + 9 <= 50);
      for (std::int64_t i = 1; i < 9; ++i) {
        const FrameRef& r = batch.refs[static_cast<std::size_t>(s * 9 + i)];
        REQUIRE(r.video_id == head.video_id);
        REQUIRE(r.frame_index == head.frame_index + i);
      }
    }
  }
}

TEST_CASE("resample pins all sequences to one video") {
  const CorpusReader& corpus = fixture_corpus(6, 50, false);
  PretrainBatchSpec spec;
  spec.sequence_size = 9;
  spec.sequences_per_batch = 8;
  spec.resample = true;
  Rng rng(52);
  for (int round = 0; round < 100; ++round) {
    Batch batch = sample_pretrain_batch(corpus, spec, label_cfg(9), AugmentPolicy{}, rng);
    std::set<std::int64_t> videos;
    for (const FrameRef& r : batch.refs) videos.insert(r.video_id);
    REQUIRE(videos.size() == 1);
  }
}

TEST_CASE("without resample, sequence videos are drawn independently") {
  PretrainBatchSpec spec;
  spec.sequence_size = 9;
  spec.sequences_per_batch = 8;
  spec.resample = false;

  auto all_same_rate = [&](std::int64_t videos, int draws, std::uint64_t seed) {
    const CorpusReader& corpus = fixture_corpus(videos, 30, false);
    Rng rng(seed);
    int all_same = 0;
    for (int round = 0; round < draws; ++round) {
      Batch batch = sample_pretrain_batch(corpus, spec, label_cfg(9), AugmentPolicy{}, rng);
      std::set<std::int64_t> seen;
      for (const FrameRef& r : batch.refs) seen.insert(r.video_id);
      all_same += seen.size() == 1 ? 1 : 0;
    }
    return all_same;
  };

  // P(all 8 sequences share a video) = (1/V)^7. At V=2 the closed form is
  // 1/128, large enough for a two-sided 3-sigma Monte-Carlo band.
  {
    const int draws = 2000;
    double p = std::pow(0.5, 7);
    double sigma = std::sqrt(p * (1.0 - p) * draws);
    CHECK(std::abs(all_same_rate(2, draws, 53) - p * draws) <= 3.0 * sigma);
  }
  // At V=8 the closed form is 4.8e-7; within 3 sigma of 1000 draws means no
  // all-same batch at all.
  CHECK(all_same_rate(8, 1000, 53) == 0);

  // and the batches do reach every video
  const std::int64_t V = 4;
  const CorpusReader& corpus = fixture_corpus(V, 30, false);
  Rng rng(53);
  std::set<std::int64_t> seen_videos;
  for (int round = 0; round < 50; ++round) {
    Batch batch = sample_pretrain_batch(corpus, spec, label_cfg(9), AugmentPolicy{}, rng);
    for (const FrameRef& r : batch.refs) seen_videos.insert(r.video_id);
  }
  CHECK(seen_videos.size() == static_cast<std::size_t>(V));
}

TEST_CASE("pseudo-labels in a batch match the labeling definition") {
  const CorpusReader& corpus = fixture_corpus(4, 100, false);
  PretrainBatchSpec spec;
  PseudoLabelConfig cfg = label_cfg(72);
  Rng rng(54);
  Batch batch = sample_pretrain_batch(corpus, spec, cfg, AugmentPolicy{}, rng);
  REQUIRE(batch.pseudo_labels.size() == 72);
  for (std::int64_t i = 0; i < 72; ++i)
    CHECK(batch.pseudo_labels[static_cast<std::size_t>(i)] ==
          pseudo_label(batch.refs[static_cast<std::size_t>(i)], cfg).value);
}

TEST_CASE("sampling is deterministic given the rng stream") {
  const CorpusReader& corpus = fixture_corpus(4, 100, false);
  PretrainBatchSpec spec;
  AugmentPolicy augment;
  augment.flip_h = true;
  augment.noise_sigma = 0.05;
  Rng a(55), b(55);
  Batch ba = sample_pretrain_batch(corpus, spec, label_cfg(72), augment, a);
  Batch bb = sample_pretrain_batch(corpus, spec, label_cfg(72), augment, b);
  CHECK(ba.refs == bb.refs);
  CHECK(ba.pixels == bb.pixels);
}

TEST_CASE("videos shorter than the sequence are rejected") {
  const CorpusReader& corpus = fixture_corpus(2, 20, false);
  PretrainBatchSpec spec;  // N=72 > 20
  Rng rng(56);
  CHECK_THROWS_AS(sample_pretrain_batch(corpus, spec, label_cfg(72), AugmentPolicy{}, rng),
                  DataError);
}

TEST_CASE("augmented pretrain pixels differ from storage but refs are honest") {
  const CorpusReader& corpus = fixture_corpus(4, 100, false);
  PretrainBatchSpec spec;
  AugmentPolicy augment;
  augment.noise_sigma = 0.1;
  Rng rng(57);
  Batch batch = sample_pretrain_batch(corpus, spec, label_cfg(72), augment, rng);
  Frame stored = corpus.frame(batch.refs[0]);
  bool any_diff = false;
  for (std::int64_t i = 0; i < stored.pixels.numel(); ++i)
    any_diff |= batch.pixels[i] != stored.pixels[i];
  CHECK(any_diff);
}

// ---- slot apportionment ------------------------------------------------------

TEST_CASE("even split gets exact halves") {
  std::map<int, std::int64_t> slots = apportion_slots(72, {{0, 0.5}, {1, 0.5}});
  CHECK(slots.at(0) == 36);
  CHECK(slots.at(1) == 36);
}

TEST_CASE("skewed split follows largest remainders") {
  std::map<int, std::int64_t> slots = apportion_slots(72, {{0, 0.9}, {1, 0.1}});
  CHECK(slots.at(0) == 65);  // 64.8 rounds up on the larger remainder
  CHECK(slots.at(1) == 7);   // 7.2 floors
}

TEST_CASE("slot counts always sum to the batch size") {
  Rng rng(58);
  for (int round = 0; round < 200; ++round) {
    int classes = 2 + static_cast<int>(rng.uniform_int(4));
    std::map<int, double> proportions;
    double total = 0.0;
    for (int c = 0; c < classes; ++c) {
      double wgt = rng.uniform01() + 0.01;
      proportions[c] = wgt;
      total += wgt;
    }
    for (auto& [c, f] : proportions) f /= total;
    std::int64_t batch = classes + rng.uniform_int(100);
    std::map<int, std::int64_t> slots = apportion_slots(batch, proportions);
    std::int64_t sum = 0;
    bool forced = false;  // some class owed < 1 slot and was bumped to 1
    for (const auto& [c, s] : slots) {
      REQUIRE(s >= 1);  // nonzero fraction keeps a slot
      sum += s;
      forced |= proportions[c] * static_cast<double>(batch) < 1.0;
    }
    REQUIRE(sum == batch);
    // Pure largest-remainder keeps every count within one slot of its share;
    // the minimum-slot correction can push the donor class one further.
    for (const auto& [c, s] : slots)
      REQUIRE(std::abs(static_cast<double>(s) - proportions[c] * static_cast<double>(batch)) <
              (forced ? 2.0 : 1.0) + 1e-9);

    // deterministic: same inputs, same slots
    REQUIRE(apportion_slots(batch, proportions) == slots);
  }

  // more classes than slots cannot honor the one-slot floor
  CHECK_THROWS_AS(apportion_slots(2, {{0, 0.4}, {1, 0.3}, {2, 0.3}}), ConfigError);
}

TEST_CASE("supervised batches honor counts exactly and sample with replacement") {
  const CorpusReader& corpus = fixture_corpus(3, 40, true, 0.1);
  SupervisedPool pool = SupervisedPool::build(corpus.load(FrameSelector::all()));
  REQUIRE(pool.by_class.count(1) == 1);
  std::size_t positives = pool.by_class.at(1).size();
  REQUIRE(positives >= 1);

  SupervisedBatchSpec spec;
  spec.batch_size = 72;
  spec.class_proportions = {{0, 0.5}, {1, 0.5}};
  Rng rng(59);
  for (int round = 0; round < 30; ++round) {
    Batch batch = sample_supervised_batch(pool, spec, AugmentPolicy{}, rng);
    REQUIRE(batch.size() == 72);
    std::int64_t ones = 0;
    for (int label : batch.labels) ones += label == 1 ? 1 : 0;
    REQUIRE(ones == 36);  // exact even when the class has fewer members
    // class-major layout: all 0s then all 1s
    for (std::int64_t i = 1; i < 72; ++i)
      REQUIRE(batch.labels[static_cast<std::size_t>(i)] >=
              batch.labels[static_cast<std::size_t>(i - 1)]);
  }

  // with replacement: 36 slots from < 36 members must repeat a frame
  if (positives < 36) {
    Batch batch = sample_supervised_batch(pool, spec, AugmentPolicy{}, rng);
    std::set<std::pair<std::int64_t, std::int64_t>> distinct;
    for (std::int64_t i = 0; i < 72; ++i)
      if (batch.labels[static_cast<std::size_t>(i)] == 1)
        distinct.insert({batch.refs[static_cast<std::size_t>(i)].video_id,
                         batch.refs[static_cast<std::size_t>(i)].frame_index});
    CHECK(distinct.size() <= positives);
    CHECK(distinct.size() < 36);
  }
}

TEST_CASE("majority class is sampled without replacement") {
  const CorpusReader& corpus = fixture_corpus(3, 40, true, 0.1);
  SupervisedPool pool = SupervisedPool::build(corpus.load(FrameSelector::all()));
  SupervisedBatchSpec spec;
  spec.batch_size = 72;
  spec.class_proportions = {{0, 0.5}, {1, 0.5}};
  Rng rng(60);
  Batch batch = sample_supervised_batch(pool, spec, AugmentPolicy{}, rng);
  std::set<std::pair<std::int64_t, std::int64_t>> zeros;
  std::int64_t zero_count = 0;
  for (std::int64_t i = 0; i < 72; ++i) {
    if (batch.labels[static_cast<std::size_t>(i)] == 0) {
      zeros.insert({batch.refs[static_cast<std::size_t>(i)].video_id,
                    batch.refs[static_cast<std::size_t>(i)].frame_index});
      ++zero_count;
    }
  }
  CHECK(zero_count == 36);
  CHECK(static_cast<std::int64_t>(zeros.size()) == 36);  // all distinct
}

TEST_CASE("batch labels agree with the stored corpus labels") {
  const CorpusReader& corpus = fixture_corpus(3, 40, true, 0.1);
  SupervisedPool pool = SupervisedPool::build(corpus.load(FrameSelector::all()));
  SupervisedBatchSpec spec;
  spec.batch_size = 24;
  spec.class_proportions = {{0, 0.5}, {1, 0.5}};
  Rng rng(61);
  Batch batch = sample_supervised_batch(pool, spec, AugmentPolicy{}, rng);
  for (std::int64_t i = 0; i < batch.size(); ++i)
    CHECK(batch.labels[static_cast<std::size_t>(i)] ==
          corpus.frame(batch.refs[static_cast<std::size_t>(i)]).label);
}

TEST_CASE("an empty class with a nonzero fraction is an error") {
  const CorpusReader& corpus = fixture_corpus(2, 20, true, 0.0);  // no positives
  SupervisedPool pool = SupervisedPool::build(corpus.load(FrameSelector::all()));
  SupervisedBatchSpec spec;
  spec.batch_size = 10;
  spec.class_proportions = {{0, 0.5}, {1, 0.5}};
  Rng rng(62);
  CHECK_THROWS_AS(sample_supervised_batch(pool, spec, AugmentPolicy{}, rng), DataError);
}

TEST_CASE("pool construction requires labels") {
  const CorpusReader& corpus = fixture_corpus(2, 20, false);
  CHECK_THROWS_AS(SupervisedPool::build(corpus.load(FrameSelector::all())), DataError);
}

TEST_CASE("batch spec validation") {
  PretrainBatchSpec p;
  p.sequence_size = 0;
  CHECK_THROWS_AS(validate_pretrain_batch_spec(p), ConfigError);
  p.sequence_size = 9;
  p.sequences_per_batch = 0;
  CHECK_THROWS_AS(validate_pretrain_batch_spec(p), ConfigError);

  SupervisedBatchSpec s;
  s.batch_size = 72;
  s.class_proportions = {{0, 0.7}, {1, 0.7}};  // sums past 1
  CHECK_THROWS_AS(validate_supervised_batch_spec(s), ConfigError);
  s.class_proportions = {{0, 0.5}, {1, 0.5}};
  CHECK_NOTHROW(validate_supervised_batch_spec(s));
  s.batch_size = 0;
  CHECK_THROWS_AS(validate_supervised_batch_spec(s), ConfigError);
}

}  // TEST_SUITE
