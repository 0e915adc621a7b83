#include "tcssl/train.hpp"

#include <chrono>
#include <cstring>

#include "tcssl/mining.hpp"

namespace tcssl {

namespace {

constexpr std::uint64_t kSaltPretrainBatch = 0x70726574'62617463ULL;
constexpr std::uint64_t kSaltFinetuneBatch = 0x66696e65'62617463ULL;
constexpr std::uint64_t kSaltBarrierProbe = 0x62617272'70726f62ULL;

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

double grad_norm(const std::vector<Param<float>*>& params) {
  double sq = 0.0;
  for (const Param<float>* p : params) {
    for (std::int64_t i = 0; i < p->grad.numel(); ++i) {
      sq += static_cast<double>(p->grad[i]) * static_cast<double>(p->grad[i]);
    }
  }
  return std::sqrt(sq);
}

}  // namespace

void validate_schedule(const Schedule& s) {
  if (s.base_lr <= 0.0) throw ConfigError("schedule: base_lr must be > 0");
  if (s.decay_factor <= 1.0) throw ConfigError("schedule: decay_factor must be > 1");
  if (s.decay_every <= 0) throw ConfigError("schedule: decay_every must be > 0");
  if (s.total_steps < 0) throw ConfigError("schedule: total_steps must be >= 0");
}

double lr_at(const Schedule& s, std::int64_t step) {
  if (step < 0 || step >= s.total_steps) {
    throw ConfigError("lr_at: step " + std::to_string(step) + " outside [0, " +
                      std::to_string(s.total_steps) + ")");
  }
  const auto decays = static_cast<double>(step / s.decay_every);
  return s.base_lr / std::pow(s.decay_factor, decays);
}

float pretrain_step(Model<float>& model, const Tensor<float>& pixels,
                    const std::vector<Triplet>& triplets, const LossConfig& loss, double lr) {
  const Tensor<float> emb = model.encode(pixels);
  const Tensor<float> projected = model.project(emb);
  Tensor<float> d_proj = Tensor<float>::zeros_like(projected);
  const float tl = triplet_loss_backward(projected, triplets, loss.margin, d_proj);
  const Tensor<float> d_emb = model.project_backward(d_proj);
  model.encode_backward(d_emb);
  const std::vector<Param<float>*> params = model.params();
  add_l2_gradients(params, loss.weight_decay);
  sgd_step(params, lr);
  return tl;
}

Checkpoint pretrain(const CorpusReader& corpus, const PretrainConfig& cfg,
                    const nlohmann::json& config_echo, const LogSink& log) {
  validate_pretrain_batch_spec(cfg.batch);
  validate_pseudo_label_config(cfg.labels, corpus.manifest().frames_per_video - 1);
  validate_loss_config(cfg.loss);
  validate_schedule(cfg.schedule);

  Model<float> model(cfg.model, /*with_head=*/true, /*with_classifier=*/false);
  model.init_params(cfg.seed);

  const auto t0 = std::chrono::steady_clock::now();
  for (std::int64_t step = 0; step < cfg.schedule.total_steps; ++step) {
    Rng batch_rng = Rng::derive(cfg.seed, kSaltPretrainBatch, static_cast<std::uint64_t>(step));
    const Batch batch =
        sample_pretrain_batch(corpus, cfg.batch, cfg.labels, cfg.augment, batch_rng);
    const std::vector<Triplet> triplets =
        mine_batch_all_windowed(batch.pseudo_labels, cfg.labels.window);
    const double lr = lr_at(cfg.schedule, step);
    const float tl = pretrain_step(model, batch.pixels, triplets, cfg.loss, lr);
    const bool last = step + 1 == cfg.schedule.total_steps;
    if (log && (step % cfg.log_every == 0 || last)) {
      const double l2 = static_cast<double>(l2_penalty(model.params(), cfg.loss.weight_decay));
      TrainLogRecord rec;
      rec.phase = "pretrain";
      rec.step = step;
      rec.lr = lr;
      rec.losses = {{"triplet_loss", tl}, {"l2_penalty", l2}, {"total", tl + l2}};
      rec.triplet_count = static_cast<std::int64_t>(triplets.size());
      rec.wall_time_ms = elapsed_ms(t0);
      log(rec);
    }
  }

  const std::string next_state =
      Rng::derive(cfg.seed, kSaltPretrainBatch, static_cast<std::uint64_t>(cfg.schedule.total_steps))
          .state();
  return snapshot_model(model, "pretrain", config_echo, next_state, cfg.schedule.total_steps);
}

CeGradProbe probe_ce_gradients(Model<float>& model, const Tensor<float>& pixels,
                               const std::vector<int>& labels, bool barrier) {
  model.zero_grads();
  const Tensor<float> emb = model.encode(pixels);
  const Tensor<float> logits = model.classify(emb);
  Tensor<float> d_logits = Tensor<float>::zeros_like(logits);
  cross_entropy_backward(logits, labels, d_logits);
  const Tensor<float> d_emb_ce = model.classify_backward(d_logits);
  if (!barrier) model.encode_backward(d_emb_ce);
  CeGradProbe probe;
  probe.encoder_norm = grad_norm(model.encoder_params());
  probe.classifier_norm = grad_norm(model.classifier_params());
  model.zero_grads();
  return probe;
}

Checkpoint finetune(const SupervisedPool& pool, const FinetuneConfig& cfg, const Checkpoint* init,
                    const nlohmann::json& config_echo, const LogSink& log) {
  validate_supervised_batch_spec(cfg.batch);
  validate_loss_config(cfg.loss);
  validate_schedule(cfg.schedule);

  Model<float> model(cfg.model, /*with_head=*/false, /*with_classifier=*/true);
  model.init_params(cfg.seed);

  std::string startup_note;
  if (init != nullptr) {
    const std::vector<std::string> dropped = restore_params(model.encoder_params(), *init);
    startup_note = "restored encoder from checkpoint (phase " + init->phase + ")";
    if (!dropped.empty()) {
      startup_note += "; dropped:";
      for (const std::string& name : dropped) startup_note += " " + name;
    }
  } else {
    startup_note = "fresh initialization (scratch)";
  }

  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.barrier && cfg.schedule.total_steps > 0) {
    Rng probe_rng = Rng::derive(cfg.seed, kSaltBarrierProbe);
    const Batch probe_batch =
        sample_supervised_batch(pool, cfg.batch, AugmentPolicy{}, probe_rng);
    const CeGradProbe probe =
        probe_ce_gradients(model, probe_batch.pixels, probe_batch.labels, /*barrier=*/true);
    if (probe.encoder_norm != 0.0) {
      throw NumericError("classifier barrier leak: cross-entropy reached encoder gradients (norm " +
                         std::to_string(probe.encoder_norm) + ")");
    }
    startup_note += "; barrier check: encoder CE gradient norm 0";
  }
  if (log) {
    TrainLogRecord rec;
    rec.phase = "finetune";
    rec.step = -1;
    rec.note = startup_note;
    rec.wall_time_ms = elapsed_ms(t0);
    log(rec);
  }

  const std::vector<Param<float>*> params = model.params();
  for (std::int64_t step = 0; step < cfg.schedule.total_steps; ++step) {
    Rng batch_rng = Rng::derive(cfg.seed, kSaltFinetuneBatch, static_cast<std::uint64_t>(step));
    const Batch batch = sample_supervised_batch(pool, cfg.batch, cfg.augment, batch_rng);
    const std::vector<Triplet> triplets = mine_batch_all_classes(batch.labels);
    const double lr = lr_at(cfg.schedule, step);

    const Tensor<float> emb = model.encode(batch.pixels);
    const Tensor<float> logits = model.classify(emb);
    Tensor<float> d_logits = Tensor<float>::zeros_like(logits);
    const float ce = cross_entropy_backward(logits, batch.labels, d_logits);
    const Tensor<float> d_emb_ce = model.classify_backward(d_logits);

    Tensor<float> d_emb = Tensor<float>::zeros_like(emb);
    float tl = 0.0f;
    if (cfg.loss.supervised_tl_weight != 0.0) {
      Tensor<float> d_emb_tl = Tensor<float>::zeros_like(emb);
      tl = triplet_loss_backward(emb, triplets, cfg.loss.margin, d_emb_tl);
      const auto w = static_cast<float>(cfg.loss.supervised_tl_weight);
      for (std::int64_t i = 0; i < d_emb.numel(); ++i) d_emb[i] += w * d_emb_tl[i];
    }
    if (!cfg.barrier) {
      for (std::int64_t i = 0; i < d_emb.numel(); ++i) d_emb[i] += d_emb_ce[i];
    }
    model.encode_backward(d_emb);
    add_l2_gradients(params, cfg.loss.weight_decay);
    sgd_step(params, lr);

    const bool last = step + 1 == cfg.schedule.total_steps;
    if (log && (step % cfg.log_every == 0 || last)) {
      const double l2 = static_cast<double>(l2_penalty(params, cfg.loss.weight_decay));
      const double total = cfg.loss.supervised_tl_weight * tl + ce + l2;
      TrainLogRecord rec;
      rec.phase = "finetune";
      rec.step = step;
      rec.lr = lr;
      rec.losses = {{"triplet_loss", tl}, {"cross_entropy", ce}, {"l2_penalty", l2}, {"total", total}};
      rec.triplet_count = static_cast<std::int64_t>(triplets.size());
      rec.wall_time_ms = elapsed_ms(t0);
      log(rec);
    }
  }

  const std::string next_state =
      Rng::derive(cfg.seed, kSaltFinetuneBatch, static_cast<std::uint64_t>(cfg.schedule.total_steps))
          .state();
  return snapshot_model(model, "finetune", config_echo, next_state, cfg.schedule.total_steps);
}

}  // namespace tcssl
