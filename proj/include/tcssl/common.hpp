#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tcssl {

// Error categories map 1:1 to CLI exit codes (see tools/).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when training hits a non-finite value. We abort instead of clipping:
// at this scale divergence means a bug or a broken config, not a scale issue.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Identifies a frame by video id and in-video position.
struct FrameRef {
  std::int64_t video_id = 0;
  std::int64_t frame_index = 0;

  friend bool operator==(const FrameRef& a, const FrameRef& b) {
    return a.video_id == b.video_id && a.frame_index == b.frame_index;
  }
  friend bool operator<(const FrameRef& a, const FrameRef& b) {
    if (a.video_id != b.video_id) return a.video_id < b.video_id;
    return a.frame_index < b.frame_index;
  }
};

struct FrameShape {
  std::int64_t channels = 3;
  std::int64_t height = 16;
  std::int64_t width = 16;

  std::int64_t numel() const { return channels * height * width; }
  friend bool operator==(const FrameShape& a, const FrameShape& b) {
    return a.channels == b.channels && a.height == b.height && a.width == b.width;
  }
};

}  // namespace tcssl
