#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcssl/common.hpp"
#include "tcssl/rng.hpp"
#include "tcssl/tensor.hpp"

namespace tcssl {

// Synthetic stand-in for long frame sequences: each video is a latent random
// walk rendered to pixels through a fixed seeded affine map plus clamping, so
// "close in time" provably implies "close in pixel space". Rare anomaly frames
// get a localized bright blob and label 1; everything else is label 0.
struct GeneratorSpec {
  std::int64_t num_videos = 8;
  std::int64_t frames_per_video = 500;
  FrameShape frame_shape{3, 16, 16};
  std::int64_t latent_dim = 8;
  double step_scale = 0.05;
  double anomaly_rate = 0.0;
  // Anomalies appear in short temporal runs; one blob persists (with a small
  // positional jitter) across a run. Length 1 places anomaly frames
  // independently (any labeled corpus we build by default uses runs of 3,
  // since real lesions span several subsequent frames).
  std::int64_t anomaly_run_length = 1;
  bool labeled = false;
  std::uint64_t seed = 0;
};

void validate_generator_spec(const GeneratorSpec& spec);

struct CorpusManifest {
  std::string corpus_id;
  std::int64_t num_videos = 0;
  std::int64_t frames_per_video = 0;
  FrameShape frame_shape;
  bool labeled = false;
  std::map<int, std::int64_t> class_counts;
  std::uint64_t generator_seed = 0;
  GeneratorSpec spec;  // full echo, so a corpus is reconstructible from its manifest
};

struct Frame {
  FrameRef ref;
  Tensor<float> pixels;  // (C, H, W), values in [0, 1]
  int label = -1;        // -1 when the corpus is unlabeled
};

/// Generates a corpus under `dir` (manifest.json, video_<id>.bin, and
/// labels_<id>.bin when labeled). Pure in (spec): identical spec produces
/// byte-identical output regardless of generation order.
CorpusManifest generate_corpus(const GeneratorSpec& spec, const std::string& dir,
                               const std::string& corpus_id);

struct FrameSelector {
  enum class Kind { All, Videos, Frames };
  Kind kind = Kind::All;
  std::vector<std::int64_t> videos;
  std::vector<FrameRef> frames;

  static FrameSelector all() { return {}; }
  static FrameSelector for_videos(std::vector<std::int64_t> v) {
    return {Kind::Videos, std::move(v), {}};
  }
  static FrameSelector for_frames(std::vector<FrameRef> f) {
    return {Kind::Frames, {}, std::move(f)};
  }
};

class CorpusReader {
 public:
  explicit CorpusReader(const std::string& dir);

  const CorpusManifest& manifest() const { return manifest_; }
  const std::string& dir() const { return dir_; }

  /// Flat pixel buffer of one video, frame-major: frames_per_video * C*H*W floats.
  const std::vector<float>& video_pixels(std::int64_t video_id) const;
  /// Per-frame labels of one video; empty when the corpus is unlabeled.
  const std::vector<std::uint8_t>& video_labels(std::int64_t video_id) const;

  Frame frame(const FrameRef& ref) const;

  /// Frames ordered by (video_id, frame_index); pixels bit-exact with storage.
  std::vector<Frame> load(const FrameSelector& selector) const;

  std::vector<std::int64_t> video_ids() const;

 private:
  void check_video_id(std::int64_t video_id) const;

  std::string dir_;
  CorpusManifest manifest_;
  std::vector<std::vector<float>> pixels_;          // per video
  std::vector<std::vector<std::uint8_t>> labels_;   // per video, may be empty
};

// ---- augmentation ----------------------------------------------------------

struct AugmentPolicy {
  double noise_sigma = 0.0;
  bool flip_h = false;
  bool flip_v = false;
  bool rot90 = false;
  double brightness_delta = 0.0;

  bool enabled() const {
    return noise_sigma > 0.0 || flip_h || flip_v || rot90 || brightness_delta > 0.0;
  }
};

// Deterministic spatial primitives, exposed for direct use in tests.
void flip_horizontal(float* pixels, const FrameShape& shape);
void flip_vertical(float* pixels, const FrameShape& shape);
void rotate90(float* pixels, const FrameShape& shape, int quarter_turns);

/// Randomized per-frame augmentation; output clamped to [0,1]. The all-disabled
/// policy is an exact identity and draws nothing from rng.
void augment_in_place(float* pixels, const FrameShape& shape, const AugmentPolicy& policy,
                      Rng& rng);
Frame augment(const Frame& frame, const AugmentPolicy& policy, Rng& rng);

void to_json(nlohmann::json& j, const GeneratorSpec& spec);
void from_json(const nlohmann::json& j, GeneratorSpec& spec);
void to_json(nlohmann::json& j, const AugmentPolicy& p);
void from_json(const nlohmann::json& j, AugmentPolicy& p);

}  // namespace tcssl
