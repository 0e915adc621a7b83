#include "tcssl/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "tcssl/io_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tcssl {

namespace {

// Stream salts so per-video generation is order independent.
constexpr std::uint64_t kSaltRender = 0x72656e646572ULL;    // "render"
constexpr std::uint64_t kSaltVideo = 0x766964656fULL;       // "video"
constexpr std::uint64_t kSaltAnomaly = 0x616e6f6dULL;       // "anom"

// Render map scale: keeps pre-clamp pixel std around 0.2-0.3 so frames vary
// visibly without saturating the [0,1] clamp.
constexpr double kRenderScale = 0.22;

// Anomaly blob: bright additive bump covering roughly 10% of the frame.
constexpr double kBlobAmplitude = 0.7;
constexpr double kBlobSigma = 1.3;
constexpr double kBlobJitter = 0.3;

std::string video_file(const std::string& dir, std::int64_t v) {
  return dir + "/video_" + std::to_string(v) + ".bin";
}
std::string labels_file(const std::string& dir, std::int64_t v) {
  return dir + "/labels_" + std::to_string(v) + ".bin";
}

void add_blob(std::vector<double>& frame, const FrameShape& shape, double cy, double cx) {
  const double inv = 1.0 / (2.0 * kBlobSigma * kBlobSigma);
  for (std::int64_t c = 0; c < shape.channels; ++c) {
    double* plane = frame.data() + c * shape.height * shape.width;
    for (std::int64_t y = 0; y < shape.height; ++y) {
      for (std::int64_t x = 0; x < shape.width; ++x) {
        const double dy = static_cast<double>(y) - cy;
        const double dx = static_cast<double>(x) - cx;
        plane[y * shape.width + x] += kBlobAmplitude * std::exp(-(dy * dy + dx * dx) * inv);
      }
    }
  }
}

}  // namespace

void validate_generator_spec(const GeneratorSpec& spec) {
  if (spec.num_videos < 1 || spec.frames_per_video < 1 || spec.latent_dim < 1) {
    throw ConfigError("generator spec: sizes must be >= 1");
  }
  if (spec.frame_shape.channels < 1 || spec.frame_shape.height < 1 || spec.frame_shape.width < 1) {
    throw ConfigError("generator spec: frame shape must be positive");
  }
  if (!(spec.anomaly_rate >= 0.0 && spec.anomaly_rate < 0.5)) {
    throw ConfigError("generator spec: anomaly_rate must be in [0, 0.5)");
  }
  if (spec.step_scale <= 0.0) {
    throw ConfigError("generator spec: step_scale must be > 0");
  }
  if (spec.anomaly_run_length < 1) {
    throw ConfigError("generator spec: anomaly_run_length must be >= 1");
  }
}

CorpusManifest generate_corpus(const GeneratorSpec& spec, const std::string& dir,
                               const std::string& corpus_id) {
  validate_generator_spec(spec);

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("generate_corpus: cannot create '" + dir + "': " + ec.message());

  const FrameShape& shape = spec.frame_shape;
  const std::int64_t pixels_per_frame = shape.numel();

  // Fixed affine render map shared by every video of the corpus.
  Rng render_rng = Rng::derive(spec.seed, kSaltRender);
  const double entry_scale = kRenderScale / std::sqrt(static_cast<double>(spec.latent_dim));
  std::vector<double> render(static_cast<std::size_t>(pixels_per_frame * spec.latent_dim));
  for (double& a : render) a = render_rng.normal() * entry_scale;

  // Per-frame anomaly run-start probability chosen so the stationary marked
  // fraction equals anomaly_rate exactly: 1 - (1-p)^run_length = rate.
  const double start_prob =
      spec.anomaly_rate <= 0.0
          ? 0.0
          : 1.0 - std::pow(1.0 - spec.anomaly_rate, 1.0 / static_cast<double>(spec.anomaly_run_length));

  CorpusManifest manifest;
  manifest.corpus_id = corpus_id;
  manifest.num_videos = spec.num_videos;
  manifest.frames_per_video = spec.frames_per_video;
  manifest.frame_shape = shape;
  manifest.labeled = spec.labeled;
  manifest.generator_seed = spec.seed;
  manifest.spec = spec;
  if (spec.labeled) {
    // Classes that never occur are absent from the map, so a rate-0 corpus
    // reports {0: total} alone.
    manifest.class_counts[0] = 0;
  }

  std::vector<double> z(static_cast<std::size_t>(spec.latent_dim));
  std::vector<double> frame(static_cast<std::size_t>(pixels_per_frame));
  std::vector<float> video(static_cast<std::size_t>(spec.frames_per_video * pixels_per_frame));
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(spec.frames_per_video));

  for (std::int64_t v = 0; v < spec.num_videos; ++v) {
    Rng walk_rng = Rng::derive(spec.seed, kSaltVideo, static_cast<std::uint64_t>(v));
    Rng anomaly_rng = Rng::derive(spec.seed, kSaltAnomaly, static_cast<std::uint64_t>(v));

    // Mark anomaly frames first: run starts are per-frame Bernoulli draws,
    // each start marking the next run_length frames (runs may merge).
    std::fill(labels.begin(), labels.end(), 0);
    if (start_prob > 0.0) {
      for (std::int64_t t = 0; t < spec.frames_per_video; ++t) {
        if (anomaly_rng.bernoulli(start_prob)) {
          const std::int64_t end = std::min(t + spec.anomaly_run_length, spec.frames_per_video);
          for (std::int64_t u = t; u < end; ++u) labels[static_cast<std::size_t>(u)] = 1;
        }
      }
    }

    // One blob center per maximal run; the blob jitters slightly per frame.
    std::vector<std::pair<double, double>> blob_center(static_cast<std::size_t>(spec.frames_per_video),
                                                       {0.0, 0.0});
    for (std::int64_t t = 0; t < spec.frames_per_video; ++t) {
      if (!labels[static_cast<std::size_t>(t)]) continue;
      const bool run_start = t == 0 || !labels[static_cast<std::size_t>(t - 1)];
      double cy, cx;
      if (run_start) {
        cy = 2.0 + anomaly_rng.uniform01() * static_cast<double>(shape.height - 5);
        cx = 2.0 + anomaly_rng.uniform01() * static_cast<double>(shape.width - 5);
      } else {
        cy = blob_center[static_cast<std::size_t>(t - 1)].first;
        cx = blob_center[static_cast<std::size_t>(t - 1)].second;
      }
      cy += anomaly_rng.normal() * kBlobJitter;
      cx += anomaly_rng.normal() * kBlobJitter;
      blob_center[static_cast<std::size_t>(t)] = {cy, cx};
    }

    for (double& zd : z) zd = walk_rng.normal();

    for (std::int64_t t = 0; t < spec.frames_per_video; ++t) {
      if (t > 0) {
        for (double& zd : z) zd += spec.step_scale * walk_rng.normal();
      }
      for (std::int64_t p = 0; p < pixels_per_frame; ++p) {
        const double* row = render.data() + p * spec.latent_dim;
        double acc = 0.5;
        for (std::int64_t d = 0; d < spec.latent_dim; ++d) acc += row[d] * z[static_cast<std::size_t>(d)];
        frame[static_cast<std::size_t>(p)] = acc;
      }
      if (labels[static_cast<std::size_t>(t)]) {
        add_blob(frame, shape, blob_center[static_cast<std::size_t>(t)].first,
                 blob_center[static_cast<std::size_t>(t)].second);
      }
      float* out = video.data() + t * pixels_per_frame;
      for (std::int64_t p = 0; p < pixels_per_frame; ++p) {
        out[p] = static_cast<float>(std::clamp(frame[static_cast<std::size_t>(p)], 0.0, 1.0));
      }
    }

    write_file_atomic(video_file(dir, v), video.data(), video.size() * sizeof(float));
    if (spec.labeled) {
      write_file_atomic(labels_file(dir, v), labels.data(), labels.size());
      for (std::uint8_t l : labels) manifest.class_counts[l] += 1;
    }
  }

  json j;
  j["format_version"] = 1;
  j["corpus_id"] = manifest.corpus_id;
  j["num_videos"] = manifest.num_videos;
  j["frames_per_video"] = manifest.frames_per_video;
  j["frame_shape"] = {shape.channels, shape.height, shape.width};
  j["labeled"] = manifest.labeled;
  json counts = json::object();
  for (const auto& [cls, n] : manifest.class_counts) counts[std::to_string(cls)] = n;
  j["class_counts"] = counts;
  j["generator_seed"] = manifest.generator_seed;
  j["generator_spec"] = spec;
  const std::string text = j.dump(2) + "\n";
  write_file_atomic(dir + "/manifest.json", text.data(), text.size());

  return manifest;
}

// ---- reading ----------------------------------------------------------------

CorpusReader::CorpusReader(const std::string& dir) : dir_(dir) {
  const std::string manifest_path = dir + "/manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DataError("corpus: missing manifest at '" + manifest_path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("corpus: bad manifest '" + manifest_path + "': " + e.what());
  }

  manifest_.corpus_id = j.at("corpus_id").get<std::string>();
  manifest_.num_videos = j.at("num_videos").get<std::int64_t>();
  manifest_.frames_per_video = j.at("frames_per_video").get<std::int64_t>();
  const auto fs_arr = j.at("frame_shape");
  manifest_.frame_shape = {fs_arr.at(0).get<std::int64_t>(), fs_arr.at(1).get<std::int64_t>(),
                           fs_arr.at(2).get<std::int64_t>()};
  manifest_.labeled = j.at("labeled").get<bool>();
  for (const auto& [key, value] : j.at("class_counts").items()) {
    manifest_.class_counts[std::stoi(key)] = value.get<std::int64_t>();
  }
  manifest_.generator_seed = j.at("generator_seed").get<std::uint64_t>();
  manifest_.spec = j.at("generator_spec").get<GeneratorSpec>();

  const std::int64_t pixels_per_frame = manifest_.frame_shape.numel();
  const std::size_t video_bytes =
      static_cast<std::size_t>(manifest_.frames_per_video * pixels_per_frame) * sizeof(float);

  pixels_.resize(static_cast<std::size_t>(manifest_.num_videos));
  labels_.resize(static_cast<std::size_t>(manifest_.num_videos));
  for (std::int64_t v = 0; v < manifest_.num_videos; ++v) {
    auto& buf = pixels_[static_cast<std::size_t>(v)];
    buf.resize(static_cast<std::size_t>(manifest_.frames_per_video * pixels_per_frame));
    read_file_exact(video_file(dir, v), buf.data(), video_bytes);
    if (manifest_.labeled) {
      auto& lab = labels_[static_cast<std::size_t>(v)];
      lab.resize(static_cast<std::size_t>(manifest_.frames_per_video));
      read_file_exact(labels_file(dir, v), lab.data(), lab.size());
    }
  }
}

void CorpusReader::check_video_id(std::int64_t video_id) const {
  if (video_id < 0 || video_id >= manifest_.num_videos) {
    throw DataError("corpus '" + manifest_.corpus_id + "': no video " + std::to_string(video_id));
  }
}

const std::vector<float>& CorpusReader::video_pixels(std::int64_t video_id) const {
  check_video_id(video_id);
  return pixels_[static_cast<std::size_t>(video_id)];
}

const std::vector<std::uint8_t>& CorpusReader::video_labels(std::int64_t video_id) const {
  check_video_id(video_id);
  return labels_[static_cast<std::size_t>(video_id)];
}

Frame CorpusReader::frame(const FrameRef& ref) const {
  check_video_id(ref.video_id);
  if (ref.frame_index < 0 || ref.frame_index >= manifest_.frames_per_video) {
    throw DataError("corpus '" + manifest_.corpus_id + "': no frame " +
                    std::to_string(ref.video_id) + ":" + std::to_string(ref.frame_index));
  }
  const std::int64_t n = manifest_.frame_shape.numel();
  Frame f;
  f.ref = ref;
  f.pixels = Tensor<float>({manifest_.frame_shape.channels, manifest_.frame_shape.height,
                            manifest_.frame_shape.width});
  const float* src = pixels_[static_cast<std::size_t>(ref.video_id)].data() + ref.frame_index * n;
  std::memcpy(f.pixels.data(), src, static_cast<std::size_t>(n) * sizeof(float));
  if (manifest_.labeled) {
    f.label = labels_[static_cast<std::size_t>(ref.video_id)][static_cast<std::size_t>(ref.frame_index)];
  }
  return f;
}

std::vector<Frame> CorpusReader::load(const FrameSelector& selector) const {
  std::vector<FrameRef> refs;
  switch (selector.kind) {
    case FrameSelector::Kind::All:
      for (std::int64_t v = 0; v < manifest_.num_videos; ++v) {
        for (std::int64_t t = 0; t < manifest_.frames_per_video; ++t) refs.push_back({v, t});
      }
      break;
    case FrameSelector::Kind::Videos: {
      std::vector<std::int64_t> vids = selector.videos;
      std::sort(vids.begin(), vids.end());
      for (std::int64_t v : vids) {
        check_video_id(v);
        for (std::int64_t t = 0; t < manifest_.frames_per_video; ++t) refs.push_back({v, t});
      }
      break;
    }
    case FrameSelector::Kind::Frames:
      refs = selector.frames;
      std::sort(refs.begin(), refs.end());
      break;
  }
  std::vector<Frame> out;
  out.reserve(refs.size());
  for (const FrameRef& r : refs) out.push_back(frame(r));
  return out;
}

std::vector<std::int64_t> CorpusReader::video_ids() const {
  std::vector<std::int64_t> ids(static_cast<std::size_t>(manifest_.num_videos));
  for (std::int64_t v = 0; v < manifest_.num_videos; ++v) ids[static_cast<std::size_t>(v)] = v;
  return ids;
}

// ---- augmentation ------------------------------------------------------------

void flip_horizontal(float* pixels, const FrameShape& shape) {
  for (std::int64_t c = 0; c < shape.channels; ++c) {
    float* plane = pixels + c * shape.height * shape.width;
    for (std::int64_t y = 0; y < shape.height; ++y) {
      float* row = plane + y * shape.width;
      std::reverse(row, row + shape.width);
    }
  }
}

void flip_vertical(float* pixels, const FrameShape& shape) {
  for (std::int64_t c = 0; c < shape.channels; ++c) {
    float* plane = pixels + c * shape.height * shape.width;
    for (std::int64_t y = 0; y < shape.height / 2; ++y) {
      float* a = plane + y * shape.width;
      float* b = plane + (shape.height - 1 - y) * shape.width;
      std::swap_ranges(a, a + shape.width, b);
    }
  }
}

void rotate90(float* pixels, const FrameShape& shape, int quarter_turns) {
  int k = ((quarter_turns % 4) + 4) % 4;
  if (k == 0) return;
  if (shape.height != shape.width) {
    throw ConfigError("rotate90 requires square frames");
  }
  const std::int64_t n = shape.height;
  std::vector<float> tmp(static_cast<std::size_t>(n * n));
  for (std::int64_t c = 0; c < shape.channels; ++c) {
    float* plane = pixels + c * n * n;
    for (int turn = 0; turn < k; ++turn) {
      // 90 degrees counterclockwise: (y, x) <- (x, n-1-y)
      for (std::int64_t y = 0; y < n; ++y) {
        for (std::int64_t x = 0; x < n; ++x) {
          tmp[static_cast<std::size_t>(y * n + x)] = plane[x * n + (n - 1 - y)];
        }
      }
      std::memcpy(plane, tmp.data(), tmp.size() * sizeof(float));
    }
  }
}

void augment_in_place(float* pixels, const FrameShape& shape, const AugmentPolicy& policy,
                      Rng& rng) {
  if (policy.noise_sigma < 0.0) throw ConfigError("augment: noise_sigma must be >= 0");
  const std::int64_t n = shape.numel();
  if (policy.flip_h && rng.bernoulli(0.5)) flip_horizontal(pixels, shape);
  if (policy.flip_v && rng.bernoulli(0.5)) flip_vertical(pixels, shape);
  if (policy.rot90) rotate90(pixels, shape, static_cast<int>(rng.uniform_int(4)));
  if (policy.brightness_delta > 0.0) {
    const float delta =
        static_cast<float>(rng.uniform(-policy.brightness_delta, policy.brightness_delta));
    for (std::int64_t i = 0; i < n; ++i) pixels[i] += delta;
  }
  if (policy.noise_sigma > 0.0) {
    for (std::int64_t i = 0; i < n; ++i) {
      pixels[i] += static_cast<float>(rng.normal() * policy.noise_sigma);
    }
  }
  if (policy.enabled()) {
    for (std::int64_t i = 0; i < n; ++i) pixels[i] = std::clamp(pixels[i], 0.0f, 1.0f);
  }
}

Frame augment(const Frame& frame, const AugmentPolicy& policy, Rng& rng) {
  Frame out = frame;  // ref and label preserved
  augment_in_place(out.pixels.data(),
                   {out.pixels.dim(0), out.pixels.dim(1), out.pixels.dim(2)}, policy, rng);
  return out;
}

// ---- json ---------------------------------------------------------------------

void to_json(json& j, const GeneratorSpec& spec) {
  j = json{{"num_videos", spec.num_videos},
           {"frames_per_video", spec.frames_per_video},
           {"frame_shape", {spec.frame_shape.channels, spec.frame_shape.height, spec.frame_shape.width}},
           {"latent_dim", spec.latent_dim},
           {"step_scale", spec.step_scale},
           {"anomaly_rate", spec.anomaly_rate},
           {"anomaly_run_length", spec.anomaly_run_length},
           {"labeled", spec.labeled},
           {"seed", spec.seed}};
}

// Updates in place: keys absent from the JSON keep their current values, so
// partial configs override defaults instead of resetting them.
void from_json(const json& j, GeneratorSpec& spec) {
  spec.num_videos = j.value("num_videos", spec.num_videos);
  spec.frames_per_video = j.value("frames_per_video", spec.frames_per_video);
  if (j.contains("frame_shape")) {
    const auto& a = j.at("frame_shape");
    spec.frame_shape = {a.at(0).get<std::int64_t>(), a.at(1).get<std::int64_t>(),
                        a.at(2).get<std::int64_t>()};
  }
  spec.latent_dim = j.value("latent_dim", spec.latent_dim);
  spec.step_scale = j.value("step_scale", spec.step_scale);
  spec.anomaly_rate = j.value("anomaly_rate", spec.anomaly_rate);
  spec.anomaly_run_length = j.value("anomaly_run_length", spec.anomaly_run_length);
  spec.labeled = j.value("labeled", spec.labeled);
  spec.seed = j.value("seed", spec.seed);
}

void to_json(json& j, const AugmentPolicy& p) {
  j = json{{"noise_sigma", p.noise_sigma},
           {"flip_h", p.flip_h},
           {"flip_v", p.flip_v},
           {"rot90", p.rot90},
           {"brightness_delta", p.brightness_delta}};
}

void from_json(const json& j, AugmentPolicy& p) {
  p.noise_sigma = j.value("noise_sigma", p.noise_sigma);
  p.flip_h = j.value("flip_h", p.flip_h);
  p.flip_v = j.value("flip_v", p.flip_v);
  p.rot90 = j.value("rot90", p.rot90);
  p.brightness_delta = j.value("brightness_delta", p.brightness_delta);
}

}  // namespace tcssl
