#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcssl/corpus.hpp"
#include "tcssl/labeling.hpp"
#include "tcssl/losses.hpp"
#include "tcssl/neural.hpp"
#include "tcssl/sampling.hpp"
#include "tcssl/train.hpp"

namespace tcssl {

// Everything one run needs, echoed verbatim into checkpoints and reports so
// any artifact can be reproduced from itself plus the seeds.
struct RunConfig {
  GeneratorSpec pretrain_corpus;
  GeneratorSpec labeled_corpus;
  PseudoLabelConfig labels;
  PretrainBatchSpec pretrain_batch;
  SupervisedBatchSpec supervised_batch;
  ModelConfig model;
  LossConfig loss;
  Schedule pretrain_schedule{0.1, 5.0, 410, 2000};
  Schedule finetune_schedule{0.01, 10.0, 500, 1500};
  AugmentPolicy pretrain_augment;
  AugmentPolicy finetune_augment;
  std::int64_t folds = 3;
  std::uint64_t fold_seed = 0;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::int64_t log_every = 100;
  bool barrier = true;
};

/// Desk-scale defaults: the documented baseline configuration.
RunConfig default_run_config();

void validate_run_config(const RunConfig& cfg);

void to_json(nlohmann::json& j, const RunConfig& cfg);
void from_json(const nlohmann::json& j, RunConfig& cfg);

/// Parses `key.path=value` and applies it onto the config JSON. Values parse
/// as JSON when possible (numbers, booleans, arrays), otherwise as strings.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Rejects any key the schema does not know, recursively.
void check_config_keys(const nlohmann::json& j);

/// Defaults, overlaid with the config file (optional) and then the overrides,
/// strictly checked and validated.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);

}  // namespace tcssl
