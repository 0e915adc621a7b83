#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcssl/common.hpp"
#include "tcssl/corpus.hpp"
#include "tcssl/losses.hpp"
#include "tcssl/neural.hpp"
#include "tcssl/persistence.hpp"
#include "tcssl/sampling.hpp"

namespace tcssl {

struct Schedule {
  double base_lr = 0.1;
  double decay_factor = 5.0;
  std::int64_t decay_every = 410;
  std::int64_t total_steps = 2000;
};

void validate_schedule(const Schedule& s);

/// Step decay: base_lr / decay_factor^floor(step / decay_every).
double lr_at(const Schedule& s, std::int64_t step);

/// theta -= lr * grad for every parameter, then zeroes the gradient buffers.
/// Any non-finite gradient or updated value aborts with the parameter name.
template <typename Dtype>
void sgd_step(const std::vector<Param<Dtype>*>& params, double lr) {
  for (Param<Dtype>* p : params) {
    for (std::int64_t i = 0; i < p->value.numel(); ++i) {
      const Dtype g = p->grad[i];
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericError("non-finite gradient in '" + p->name + "' at element " +
                           std::to_string(i));
      }
      p->value[i] -= static_cast<Dtype>(lr) * g;
      if (!std::isfinite(static_cast<double>(p->value[i]))) {
        throw NumericError("non-finite parameter in '" + p->name + "' at element " +
                           std::to_string(i));
      }
    }
    p->grad.fill(Dtype(0));
  }
}

struct TrainLogRecord {
  std::string phase;
  std::int64_t step = 0;
  double lr = 0.0;
  std::map<std::string, double> losses;
  std::int64_t triplet_count = 0;
  double wall_time_ms = 0.0;
  std::string note;  // startup events (dropped tensors, barrier check)
};

using LogSink = std::function<void(const TrainLogRecord&)>;

struct PretrainConfig {
  PretrainBatchSpec batch;
  PseudoLabelConfig labels;
  ModelConfig model;
  LossConfig loss;
  Schedule schedule{0.1, 5.0, 410, 2000};
  AugmentPolicy augment;
  std::uint64_t seed = 0;
  std::int64_t log_every = 100;
};

struct FinetuneConfig {
  SupervisedBatchSpec batch;
  ModelConfig model;
  LossConfig loss;
  Schedule schedule{0.01, 10.0, 500, 1500};
  AugmentPolicy augment;
  std::uint64_t seed = 0;
  std::int64_t log_every = 100;
  bool barrier = true;
};

/// One pretrain gradient step on an already-mined batch; returns the triplet
/// loss (before the L2 term). Exposed for tests.
float pretrain_step(Model<float>& model, const Tensor<float>& pixels,
                    const std::vector<Triplet>& triplets, const LossConfig& loss, double lr);

/// Windowed-triplet pretraining over the corpus; returns the final checkpoint
/// (phase "pretrain") with encoder plus head.
Checkpoint pretrain(const CorpusReader& corpus, const PretrainConfig& cfg,
                    const nlohmann::json& config_echo, const LogSink& log = nullptr);

/// Supervised finetuning over a labeled pool. `init` restores encoder weights
/// (a pretrain head is dropped); nullptr trains from scratch. The classifier
/// barrier is verified once at startup: with the triplet term switched off,
/// cross-entropy alone must leave every encoder gradient at exactly zero.
Checkpoint finetune(const SupervisedPool& pool, const FinetuneConfig& cfg, const Checkpoint* init,
                    const nlohmann::json& config_echo, const LogSink& log = nullptr);

/// Gradient norms produced by cross-entropy alone (no triplet term, no weight
/// decay) under the given barrier setting. Leaves parameter values untouched
/// and gradient buffers zeroed; exposed for the startup check and tests.
struct CeGradProbe {
  double encoder_norm = 0.0;
  double classifier_norm = 0.0;
};
CeGradProbe probe_ce_gradients(Model<float>& model, const Tensor<float>& pixels,
                               const std::vector<int>& labels, bool barrier);

}  // namespace tcssl
