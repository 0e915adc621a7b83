#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <string>

#include "tcssl/common.hpp"

namespace tcssl {

// Time-based pseudo-labels: a frame's label is M*video_id + frame_index, so
// the absolute difference of two labels is the temporal distance for frames
// of the same video and at least M - max_index across videos. Two frames are
// similar (a positive pair) iff that distance is <= w.
struct PseudoLabelConfig {
  std::int64_t video_id_multiplier = 1000000;  // M
  std::int64_t window = 9;                     // w, frames
  std::int64_t sequence_size = 72;             // N, frames
};

struct PseudoLabel {
  std::int64_t value = 0;
  friend bool operator==(const PseudoLabel& a, const PseudoLabel& b) { return a.value == b.value; }
};

inline PseudoLabel pseudo_label(const FrameRef& ref, const PseudoLabelConfig& cfg) {
  if (ref.frame_index >= cfg.video_id_multiplier) {
    throw ConfigError("pseudo_label: frame_index " + std::to_string(ref.frame_index) +
                      " >= M (" + std::to_string(cfg.video_id_multiplier) + ")");
  }
  return PseudoLabel{cfg.video_id_multiplier * ref.video_id + ref.frame_index};
}

inline std::int64_t frame_distance(PseudoLabel a, PseudoLabel b) {
  return std::abs(a.value - b.value);
}

/// Window boundary is inclusive: distance == w still counts as similar.
inline bool is_positive(PseudoLabel a, PseudoLabel b, const PseudoLabelConfig& cfg) {
  return frame_distance(a, b) <= cfg.window;
}

/// Number of in-sequence positives for a frame at `position` in an N-frame
/// sequence: the exact in-window count, between w (edges) and min(N-1, 2w).
inline std::int64_t count_positives(std::int64_t position, std::int64_t sequence_size,
                                    std::int64_t window) {
  if (position < 0 || position >= sequence_size) {
    throw ConfigError("count_positives: position out of range");
  }
  return std::min(position, window) + std::min(sequence_size - 1 - position, window);
}

/// Fails fast when the label encoding could confuse the tail of one video with
/// the head of the next: requires M > max_frame_index + w.
inline void validate_pseudo_label_config(const PseudoLabelConfig& cfg,
                                         std::int64_t max_frame_index) {
  if (cfg.video_id_multiplier <= 0 || cfg.window <= 0 || cfg.sequence_size <= 0) {
    throw ConfigError("pseudo-label config: M, w and N must be positive");
  }
  if (cfg.window > cfg.sequence_size) {
    throw ConfigError("pseudo-label config: window w (" + std::to_string(cfg.window) +
                      ") must be <= sequence size N (" + std::to_string(cfg.sequence_size) + ")");
  }
  if (cfg.video_id_multiplier <= max_frame_index + cfg.window) {
    throw ConfigError("pseudo-label config: M (" + std::to_string(cfg.video_id_multiplier) +
                      ") must exceed max frame index (" + std::to_string(max_frame_index) +
                      ") + w (" + std::to_string(cfg.window) + ")");
  }
}

}  // namespace tcssl
