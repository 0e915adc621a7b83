#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcssl/common.hpp"
#include "tcssl/corpus.hpp"
#include "tcssl/neural.hpp"

namespace tcssl {

// Both .tcs (checkpoint) and .tce (embedding store) files share one container
// layout, documented in docs/formats.md:
//   magic "TCSSLBIN" | u32 format_version | u64 header length | header JSON |
//   payload sections back to back | u32 CRC32 of everything before it.
// Tensor payloads are little-endian f32, index payloads little-endian i64.

inline constexpr std::uint32_t kContainerVersion = 1;

std::uint32_t crc32_ieee(const void* data, std::size_t size, std::uint32_t seed = 0);

struct NamedTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (std::int64_t d : shape) n *= d;
    return n;
  }
};

struct Checkpoint {
  std::string phase;  // "init" | "pretrain" | "finetune"
  std::int64_t step = 0;
  std::string rng_state;
  nlohmann::json config;  // full run-config echo
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

struct EmbeddingStore {
  std::string corpus_id;
  std::int64_t embedding_dim = 0;
  std::vector<FrameRef> refs;
  std::vector<float> vectors;  // rows() x embedding_dim, row-major

  std::int64_t rows() const { return static_cast<std::int64_t>(refs.size()); }
  const float* row(std::int64_t i) const {
    return vectors.data() + i * embedding_dim;
  }
  /// Row index of a ref, or -1.
  std::int64_t find(const FrameRef& ref) const;
  void append(const FrameRef& ref, const float* vec, std::int64_t dim);
};

void save_embeddings(const std::string& path, const EmbeddingStore& store);
EmbeddingStore load_embeddings(const std::string& path);

/// Copies every live parameter of `model` into a checkpoint.
Checkpoint snapshot_model(Model<float>& model, const std::string& phase,
                          const nlohmann::json& config_echo, const std::string& rng_state,
                          std::int64_t step);

/// Loads the given parameters by name. Every listed parameter must be present
/// (missing tensor is a DataError); checkpoint tensors without a listed slot
/// (a pretrain head restored into a finetune model) are skipped and their
/// names returned so the caller can log the drop.
std::vector<std::string> restore_params(const std::vector<Param<float>*>& params,
                                        const Checkpoint& ck);

/// restore_params over all live parameters of the model.
std::vector<std::string> restore_model(Model<float>& model, const Checkpoint& ck);

/// Embeddings of the selected frames under the frozen encoder, no
/// augmentation, ordered by (video_id, frame_index).
EmbeddingStore export_embeddings(Model<float>& model, const CorpusReader& corpus,
                                 const FrameSelector& selector);

}  // namespace tcssl
