#include "tcssl/config.hpp"

#include <map>
#include <set>

#include "tcssl/io_util.hpp"

namespace tcssl {

namespace {

using nlohmann::json;

void to_json_labels(json& j, const PseudoLabelConfig& c) {
  j = json{{"video_id_multiplier", c.video_id_multiplier},
           {"window", c.window},
           {"sequence_size", c.sequence_size}};
}

void from_json_labels(const json& j, PseudoLabelConfig& c) {
  c.video_id_multiplier = j.value("video_id_multiplier", c.video_id_multiplier);
  c.window = j.value("window", c.window);
  c.sequence_size = j.value("sequence_size", c.sequence_size);
}

void to_json_pretrain_batch(json& j, const PretrainBatchSpec& s) {
  j = json{{"sequence_size", s.sequence_size},
           {"sequences_per_batch", s.sequences_per_batch},
           {"resample", s.resample}};
}

void from_json_pretrain_batch(const json& j, PretrainBatchSpec& s) {
  s.sequence_size = j.value("sequence_size", s.sequence_size);
  s.sequences_per_batch = j.value("sequences_per_batch", s.sequences_per_batch);
  s.resample = j.value("resample", s.resample);
}

void to_json_supervised_batch(json& j, const SupervisedBatchSpec& s) {
  json props = json::object();
  for (const auto& [cls, frac] : s.class_proportions) props[std::to_string(cls)] = frac;
  j = json{{"batch_size", s.batch_size}, {"class_proportions", props}};
}

void from_json_supervised_batch(const json& j, SupervisedBatchSpec& s) {
  s.batch_size = j.value("batch_size", s.batch_size);
  if (j.contains("class_proportions")) {
    s.class_proportions.clear();
    for (const auto& [key, value] : j.at("class_proportions").items()) {
      s.class_proportions[std::stoi(key)] = value.get<double>();
    }
  }
}

void to_json_loss(json& j, const LossConfig& c) {
  j = json{{"margin", c.margin},
           {"weight_decay", c.weight_decay},
           {"supervised_tl_weight", c.supervised_tl_weight}};
}

void from_json_loss(const json& j, LossConfig& c) {
  c.margin = j.value("margin", c.margin);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.supervised_tl_weight = j.value("supervised_tl_weight", c.supervised_tl_weight);
}

void to_json_schedule(json& j, const Schedule& s) {
  j = json{{"base_lr", s.base_lr},
           {"decay_factor", s.decay_factor},
           {"decay_every", s.decay_every},
           {"total_steps", s.total_steps}};
}

void from_json_schedule(const json& j, Schedule& s) {
  s.base_lr = j.value("base_lr", s.base_lr);
  s.decay_factor = j.value("decay_factor", s.decay_factor);
  s.decay_every = j.value("decay_every", s.decay_every);
  s.total_steps = j.value("total_steps", s.total_steps);
}

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"", {"pretrain_corpus", "labeled_corpus", "labels", "pretrain_batch", "supervised_batch",
            "model", "loss", "pretrain_schedule", "finetune_schedule", "pretrain_augment",
            "finetune_augment", "folds", "fold_seed", "seed", "output_dir", "log_every",
            "barrier"}},
      {"pretrain_corpus",
       {"num_videos", "frames_per_video", "frame_shape", "latent_dim", "step_scale",
        "anomaly_rate", "anomaly_run_length", "labeled", "seed"}},
      {"labeled_corpus",
       {"num_videos", "frames_per_video", "frame_shape", "latent_dim", "step_scale",
        "anomaly_rate", "anomaly_run_length", "labeled", "seed"}},
      {"labels", {"video_id_multiplier", "window", "sequence_size"}},
      {"pretrain_batch", {"sequence_size", "sequences_per_batch", "resample"}},
      {"supervised_batch", {"batch_size", "class_proportions"}},
      {"model",
       {"input_channels", "input_height", "input_width", "conv_channels", "kernel_size",
        "embedding_dim", "head_layers", "head_dim", "num_classes"}},
      {"loss", {"margin", "weight_decay", "supervised_tl_weight"}},
      {"pretrain_schedule", {"base_lr", "decay_factor", "decay_every", "total_steps"}},
      {"finetune_schedule", {"base_lr", "decay_factor", "decay_every", "total_steps"}},
      {"pretrain_augment", {"noise_sigma", "flip_h", "flip_v", "rot90", "brightness_delta"}},
      {"finetune_augment", {"noise_sigma", "flip_h", "flip_v", "rot90", "brightness_delta"}},
  };
  return s;
}

}  // namespace

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.pretrain_corpus.num_videos = 8;
  cfg.pretrain_corpus.frames_per_video = 500;
  cfg.pretrain_corpus.anomaly_rate = 0.02;
  cfg.pretrain_corpus.anomaly_run_length = 3;
  cfg.pretrain_corpus.labeled = false;
  cfg.pretrain_corpus.seed = 1;

  cfg.labeled_corpus.num_videos = 6;
  cfg.labeled_corpus.frames_per_video = 500;
  cfg.labeled_corpus.anomaly_rate = 0.02;
  cfg.labeled_corpus.anomaly_run_length = 3;
  cfg.labeled_corpus.labeled = true;
  cfg.labeled_corpus.seed = 2;

  cfg.supervised_batch.batch_size = 72;
  cfg.supervised_batch.class_proportions = {{0, 0.5}, {1, 0.5}};

  cfg.pretrain_augment.flip_h = true;
  cfg.pretrain_augment.flip_v = true;
  cfg.pretrain_augment.rot90 = true;
  cfg.pretrain_augment.brightness_delta = 0.1;
  cfg.pretrain_augment.noise_sigma = 0.05;
  cfg.finetune_augment = cfg.pretrain_augment;
  return cfg;
}

void validate_run_config(const RunConfig& cfg) {
  validate_generator_spec(cfg.pretrain_corpus);
  validate_generator_spec(cfg.labeled_corpus);
  if (!cfg.labeled_corpus.labeled) {
    throw ConfigError("config: labeled_corpus must have labeled = true");
  }
  validate_pseudo_label_config(cfg.labels, cfg.pretrain_corpus.frames_per_video - 1);
  validate_pretrain_batch_spec(cfg.pretrain_batch);
  if (cfg.pretrain_batch.sequence_size != cfg.labels.sequence_size) {
    throw ConfigError("config: pretrain_batch.sequence_size (" +
                      std::to_string(cfg.pretrain_batch.sequence_size) +
                      ") must equal labels.sequence_size (" +
                      std::to_string(cfg.labels.sequence_size) + ")");
  }
  validate_supervised_batch_spec(cfg.supervised_batch);
  validate_model_config(cfg.model);
  validate_loss_config(cfg.loss);
  validate_schedule(cfg.pretrain_schedule);
  validate_schedule(cfg.finetune_schedule);
  if (cfg.folds < 1) throw ConfigError("config: folds must be >= 1");
  if (cfg.folds > cfg.labeled_corpus.num_videos) {
    throw ConfigError("config: folds exceed labeled video count");
  }
  if (cfg.log_every < 1) throw ConfigError("config: log_every must be >= 1");
  if (cfg.output_dir.empty()) throw ConfigError("config: output_dir is empty");
  if (cfg.model.input_shape.channels != cfg.pretrain_corpus.frame_shape.channels ||
      cfg.model.input_shape.height != cfg.pretrain_corpus.frame_shape.height ||
      cfg.model.input_shape.width != cfg.pretrain_corpus.frame_shape.width) {
    throw ConfigError("config: model input_shape must match pretrain corpus frame_shape");
  }
  if (!(cfg.labeled_corpus.frame_shape == cfg.pretrain_corpus.frame_shape)) {
    throw ConfigError("config: both corpora must share one frame_shape");
  }
}

void to_json(nlohmann::json& j, const RunConfig& cfg) {
  json labels, pre_batch, sup_batch, loss, pre_sched, fin_sched;
  to_json_labels(labels, cfg.labels);
  to_json_pretrain_batch(pre_batch, cfg.pretrain_batch);
  to_json_supervised_batch(sup_batch, cfg.supervised_batch);
  to_json_loss(loss, cfg.loss);
  to_json_schedule(pre_sched, cfg.pretrain_schedule);
  to_json_schedule(fin_sched, cfg.finetune_schedule);
  j = json{{"pretrain_corpus", cfg.pretrain_corpus},
           {"labeled_corpus", cfg.labeled_corpus},
           {"labels", labels},
           {"pretrain_batch", pre_batch},
           {"supervised_batch", sup_batch},
           {"model", cfg.model},
           {"loss", loss},
           {"pretrain_schedule", pre_sched},
           {"finetune_schedule", fin_sched},
           {"pretrain_augment", cfg.pretrain_augment},
           {"finetune_augment", cfg.finetune_augment},
           {"folds", cfg.folds},
           {"fold_seed", cfg.fold_seed},
           {"seed", cfg.seed},
           {"output_dir", cfg.output_dir},
           {"log_every", cfg.log_every},
           {"barrier", cfg.barrier}};
}

void from_json(const nlohmann::json& j, RunConfig& cfg) {
  if (j.contains("pretrain_corpus")) j.at("pretrain_corpus").get_to(cfg.pretrain_corpus);
  if (j.contains("labeled_corpus")) j.at("labeled_corpus").get_to(cfg.labeled_corpus);
  if (j.contains("labels")) from_json_labels(j.at("labels"), cfg.labels);
  if (j.contains("pretrain_batch")) from_json_pretrain_batch(j.at("pretrain_batch"), cfg.pretrain_batch);
  if (j.contains("supervised_batch")) {
    from_json_supervised_batch(j.at("supervised_batch"), cfg.supervised_batch);
  }
  if (j.contains("model")) j.at("model").get_to(cfg.model);
  if (j.contains("loss")) from_json_loss(j.at("loss"), cfg.loss);
  if (j.contains("pretrain_schedule")) from_json_schedule(j.at("pretrain_schedule"), cfg.pretrain_schedule);
  if (j.contains("finetune_schedule")) from_json_schedule(j.at("finetune_schedule"), cfg.finetune_schedule);
  if (j.contains("pretrain_augment")) j.at("pretrain_augment").get_to(cfg.pretrain_augment);
  if (j.contains("finetune_augment")) j.at("finetune_augment").get_to(cfg.finetune_augment);
  cfg.folds = j.value("folds", cfg.folds);
  cfg.fold_seed = j.value("fold_seed", cfg.fold_seed);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  cfg.log_every = j.value("log_every", cfg.log_every);
  cfg.barrier = j.value("barrier", cfg.barrier);
}

void check_config_keys(const nlohmann::json& j) {
  const auto& known = schema();
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  for (const auto& [section, value] : j.items()) {
    if (known.at("").count(section) == 0) {
      throw ConfigError("config: unknown key '" + section + "'");
    }
    const auto it = known.find(section);
    if (it == known.end()) continue;  // scalar top-level key
    if (!value.is_object()) {
      throw ConfigError("config: '" + section + "' must be an object");
    }
    for (const auto& [key, sub] : value.items()) {
      if (it->second.count(key) == 0) {
        throw ConfigError("config: unknown key '" + section + "." + key + "'");
      }
      (void)sub;
    }
  }
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;

  json* node = &j;
  std::size_t begin = 0;
  while (true) {
    const std::size_t dot = path.find('.', begin);
    const std::string key = path.substr(begin, dot == std::string::npos ? dot : dot - begin);
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty path segment");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    begin = dot + 1;
  }
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    const std::string text = read_file(path);
    j = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw ConfigError("config '" + path + "' is not valid JSON");
  }
  for (const std::string& o : overrides) apply_override(j, o);
  check_config_keys(j);
  RunConfig cfg = default_run_config();
  try {
    from_json(j, cfg);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate_run_config(cfg);
  return cfg;
}

}  // namespace tcssl
