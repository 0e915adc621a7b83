#include "tcssl/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include "tcssl/io_util.hpp"
#include "tcssl/train.hpp"

namespace fs = std::filesystem;

namespace tcssl {

namespace {

constexpr std::uint64_t kSaltFoldSeed = 0x666f6c64'73656564ULL;

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir + "': " + ec.message());
}

std::string pretrain_corpus_dir(const RunConfig& cfg) { return cfg.output_dir + "/corpus_pretrain"; }
std::string labeled_corpus_dir(const RunConfig& cfg) { return cfg.output_dir + "/corpus_labeled"; }

CorpusReader open_corpus(const std::string& dir) {
  if (!fs::exists(dir + "/manifest.json")) {
    throw DataError("corpus at '" + dir + "' not found; run `tcssl generate` first");
  }
  return CorpusReader(dir);
}

void write_config_echo(const RunConfig& cfg) {
  nlohmann::json j = cfg;
  const std::string text = j.dump(2) + "\n";
  write_file_atomic(cfg.output_dir + "/config.json", text.data(), text.size());
}

nlohmann::json record_to_json(const TrainLogRecord& rec) {
  nlohmann::json j{{"phase", rec.phase},
                   {"step", rec.step},
                   {"lr", rec.lr},
                   {"losses", rec.losses},
                   {"triplet_count", rec.triplet_count},
                   {"wall_time_ms", rec.wall_time_ms}};
  if (!rec.note.empty()) j["note"] = rec.note;
  return j;
}

class RunLog {
 public:
  explicit RunLog(const std::string& path) : out_(path, std::ios::app) {
    if (!out_) throw DataError("cannot open '" + path + "' for appending");
  }

  void write(const nlohmann::json& j) { out_ << j.dump() << "\n"; }
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

/// Positive-class probabilities and argmax predictions for a frame list.
void score_frames(Model<float>& model, const std::vector<Frame>& frames, const FrameShape& shape,
                  std::vector<double>& scores, std::vector<int>& predicted) {
  const std::int64_t chunk = 256;
  const std::int64_t k = model.config().num_classes;
  for (std::size_t begin = 0; begin < frames.size(); begin += chunk) {
    const auto count =
        static_cast<std::int64_t>(std::min<std::size_t>(chunk, frames.size() - begin));
    Tensor<float> pixels({count, shape.channels, shape.height, shape.width});
    for (std::int64_t i = 0; i < count; ++i) {
      std::memcpy(pixels.data() + i * shape.numel(),
                  frames[begin + static_cast<std::size_t>(i)].pixels.data(),
                  static_cast<std::size_t>(shape.numel()) * sizeof(float));
    }
    const Tensor<float> logits = model.classify(model.encode(pixels));
    for (std::int64_t i = 0; i < count; ++i) {
      double m = logits.at(i, 0);
      std::int64_t arg = 0;
      for (std::int64_t c = 1; c < k; ++c) {
        if (logits.at(i, c) > m) {
          m = logits.at(i, c);
          arg = c;
        }
      }
      double denom = 0.0;
      for (std::int64_t c = 0; c < k; ++c) denom += std::exp(static_cast<double>(logits.at(i, c)) - m);
      scores.push_back(std::exp(static_cast<double>(logits.at(i, 1)) - m) / denom);
      predicted.push_back(static_cast<int>(arg));
    }
  }
}

FinetuneConfig finetune_config_for(const RunConfig& cfg, std::uint64_t seed) {
  FinetuneConfig f;
  f.batch = cfg.supervised_batch;
  f.model = cfg.model;
  f.loss = cfg.loss;
  f.schedule = cfg.finetune_schedule;
  f.augment = cfg.finetune_augment;
  f.seed = seed;
  f.log_every = cfg.log_every;
  f.barrier = cfg.barrier;
  return f;
}

}  // namespace

FrameRef parse_frame_ref(const std::string& text) {
  const std::size_t colon = text.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= text.size()) {
    throw ConfigError("frame ref '" + text + "' is not video:frame");
  }
  const std::string video = text.substr(0, colon);
  const std::string frame = text.substr(colon + 1);
  try {
    std::size_t video_end = 0, frame_end = 0;
    FrameRef ref{std::stoll(video, &video_end), std::stoll(frame, &frame_end)};
    if (video_end != video.size() || frame_end != frame.size()) {
      throw ConfigError("frame ref '" + text + "' is not video:frame");
    }
    return ref;
  } catch (const std::exception&) {
    throw ConfigError("frame ref '" + text + "' is not video:frame");
  }
}

std::int64_t fold_thread_cap(std::int64_t folds) {
  std::int64_t cap;
  if (const char* env = std::getenv("TCSSL_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long long parsed = std::strtoll(env, &end, 10);
    if (end == nullptr || *end != '\0' || parsed < 1) {
      throw ConfigError("TCSSL_THREADS must be a positive integer, got '" + std::string(env) + "'");
    }
    cap = parsed;
  } else {
    cap = static_cast<std::int64_t>(std::max(1u, std::thread::hardware_concurrency()));
  }
  return std::min(cap, std::max<std::int64_t>(1, folds));
}

void run_generate(const RunConfig& cfg) {
  ensure_dir(cfg.output_dir);
  write_config_echo(cfg);
  ensure_dir(pretrain_corpus_dir(cfg));
  ensure_dir(labeled_corpus_dir(cfg));
  const CorpusManifest pre = generate_corpus(cfg.pretrain_corpus, pretrain_corpus_dir(cfg), "pretrain");
  const CorpusManifest lab = generate_corpus(cfg.labeled_corpus, labeled_corpus_dir(cfg), "labeled");
  std::cout << "generated corpus 'pretrain': " << pre.num_videos << " videos x "
            << pre.frames_per_video << " frames\n";
  std::cout << "generated corpus 'labeled': " << lab.num_videos << " videos x "
            << lab.frames_per_video << " frames";
  std::int64_t positives = 0;
  if (const auto it = lab.class_counts.find(1); it != lab.class_counts.end()) positives = it->second;
  std::cout << " (" << positives << " positive)\n";
}

std::string run_pretrain(const RunConfig& cfg) {
  ensure_dir(cfg.output_dir);
  write_config_echo(cfg);
  const CorpusReader corpus = open_corpus(pretrain_corpus_dir(cfg));

  PretrainConfig p;
  p.batch = cfg.pretrain_batch;
  p.labels = cfg.labels;
  p.model = cfg.model;
  p.loss = cfg.loss;
  p.schedule = cfg.pretrain_schedule;
  p.augment = cfg.pretrain_augment;
  p.seed = cfg.seed;
  p.log_every = cfg.log_every;

  auto log = std::make_shared<RunLog>(cfg.output_dir + "/run_log.jsonl");
  const Checkpoint ck = pretrain(corpus, p, nlohmann::json(cfg), [log](const TrainLogRecord& rec) {
    log->write(record_to_json(rec));
  });
  log->flush();
  const std::string path = cfg.output_dir + "/pretrain.tcs";
  save_checkpoint(path, ck);
  std::cout << "pretrain done: " << ck.step << " steps -> " << path << "\n";
  return path;
}

std::string run_finetune(const RunConfig& cfg, const std::string& from_checkpoint) {
  ensure_dir(cfg.output_dir);
  write_config_echo(cfg);
  const CorpusReader corpus = open_corpus(labeled_corpus_dir(cfg));
  const SupervisedPool pool = SupervisedPool::build(corpus.load(FrameSelector::all()));

  Checkpoint init;
  const bool scratch = from_checkpoint.empty();
  if (!scratch) init = load_checkpoint(from_checkpoint);

  auto log = std::make_shared<RunLog>(cfg.output_dir + "/run_log.jsonl");
  const Checkpoint ck =
      finetune(pool, finetune_config_for(cfg, cfg.seed), scratch ? nullptr : &init,
               nlohmann::json(cfg), [log](const TrainLogRecord& rec) {
                 log->write(record_to_json(rec));
               });
  log->flush();
  const std::string path = cfg.output_dir + "/finetune.tcs";
  save_checkpoint(path, ck);
  std::cout << "finetune done (" << (scratch ? "scratch" : from_checkpoint) << "): " << ck.step
            << " steps -> " << path << "\n";
  return path;
}

std::vector<EvalReport> run_evaluate(const RunConfig& cfg, const std::string& from_checkpoint) {
  ensure_dir(cfg.output_dir);
  write_config_echo(cfg);
  const CorpusReader corpus = open_corpus(labeled_corpus_dir(cfg));
  const FoldPlan plan = grouped_kfold(corpus.video_ids(), cfg.folds, cfg.fold_seed);

  Checkpoint init;
  const bool scratch = from_checkpoint.empty();
  if (!scratch) init = load_checkpoint(from_checkpoint);

  const nlohmann::json config_echo = cfg;
  std::vector<EvalReport> reports(static_cast<std::size_t>(cfg.folds));
  std::vector<std::vector<nlohmann::json>> fold_logs(static_cast<std::size_t>(cfg.folds));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(cfg.folds));

  const auto run_fold = [&](std::int64_t fold) {
    try {
      const SupervisedPool pool = SupervisedPool::build(
          corpus.load(FrameSelector::for_videos(plan.videos_outside_fold(fold))));
      FinetuneConfig fcfg =
          finetune_config_for(cfg, Rng::derive_seed(cfg.seed, kSaltFoldSeed, fold));
      auto& sink = fold_logs[static_cast<std::size_t>(fold)];
      const Checkpoint ck =
          finetune(pool, fcfg, scratch ? nullptr : &init, config_echo,
                   [&sink, fold](const TrainLogRecord& rec) {
                     nlohmann::json j = record_to_json(rec);
                     j["fold"] = fold;
                     sink.push_back(std::move(j));
                   });

      Model<float> model(cfg.model, /*with_head=*/false, /*with_classifier=*/true);
      restore_model(model, ck);
      const std::vector<Frame> held_out =
          corpus.load(FrameSelector::for_videos(plan.videos_in_fold(fold)));
      std::vector<double> scores;
      std::vector<int> predicted, truth;
      scores.reserve(held_out.size());
      for (const Frame& f : held_out) truth.push_back(f.label);
      score_frames(model, held_out, corpus.manifest().frame_shape, scores, predicted);
      reports[static_cast<std::size_t>(fold)] = evaluate_fold(
          fold, scores, predicted, truth, static_cast<int>(cfg.model.num_classes));
    } catch (...) {
      errors[static_cast<std::size_t>(fold)] = std::current_exception();
    }
  };

  const std::int64_t cap = fold_thread_cap(cfg.folds);
  for (std::int64_t begin = 0; begin < cfg.folds; begin += cap) {
    std::vector<std::thread> wave;
    const std::int64_t end = std::min(cfg.folds, begin + cap);
    for (std::int64_t fold = begin; fold < end; ++fold) wave.emplace_back(run_fold, fold);
    for (std::thread& t : wave) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  {
    RunLog log(cfg.output_dir + "/run_log.jsonl");
    for (const auto& records : fold_logs) {
      for (const nlohmann::json& j : records) log.write(j);
    }
  }

  nlohmann::json report{
      {"config", config_echo},
      {"source_checkpoint", scratch ? "scratch" : from_checkpoint},
      {"fold_plan", nlohmann::json::object()},
      {"folds", nlohmann::json::array()},
      {"summary", nlohmann::json::object()},
      {"conventions",
       {{"auc", "rank-based Mann-Whitney statistic, ties counted half"},
        {"sens_at_spec", "max sensitivity over score thresholds with specificity >= target, no interpolation"},
        {"zero_denominator", "MCC and F1 return 0 when their denominator vanishes"},
        {"summary_sd", "population standard deviation over folds"}}}};
  for (const auto& [video, fold] : plan.assignment) {
    report["fold_plan"][std::to_string(video)] = fold;
  }
  for (const EvalReport& r : reports) report["folds"].push_back(r);
  for (const auto& [key, ms] : summarize_reports(reports)) {
    report["summary"][key] = {{"mean", ms.first}, {"sd", ms.second}};
  }
  const std::string report_text = report.dump(2) + "\n";
  write_file_atomic(cfg.output_dir + "/report.json", report_text.data(), report_text.size());

  std::vector<std::string> columns;
  for (const auto& [key, value] : metric_columns(reports.front())) {
    columns.push_back(key);
    (void)value;
  }
  std::string csv = "fold";
  for (const std::string& c : columns) csv += "," + c;
  csv += "\n";
  for (const EvalReport& r : reports) {
    csv += std::to_string(r.fold_id);
    const auto cols = metric_columns(r);
    for (const std::string& c : columns) csv += "," + fmt6(cols.at(c));
    csv += "\n";
  }
  const auto summary = summarize_reports(reports);
  csv += "mean";
  for (const std::string& c : columns) csv += "," + fmt6(summary.at(c).first);
  csv += "\nsd";
  for (const std::string& c : columns) csv += "," + fmt6(summary.at(c).second);
  csv += "\n";
  write_file_atomic(cfg.output_dir + "/report.csv", csv.data(), csv.size());

  std::cout << "evaluate done (" << (scratch ? "scratch" : from_checkpoint) << "): " << cfg.folds
            << " folds, mean auc " << fmt6(summary.at("auc").first) << " +- "
            << fmt6(summary.at("auc").second) << " -> " << cfg.output_dir << "/report.json\n";
  return reports;
}

void run_retrieve(const RunConfig& cfg, const RetrieveOptions& opt) {
  ensure_dir(cfg.output_dir);
  if (opt.queries.empty()) throw ConfigError("retrieve: give at least one --frame video:frame");
  if (opt.top_k < 1) throw ConfigError("retrieve: --top must be >= 1");
  const bool labeled = opt.corpus == "labeled";
  if (!labeled && opt.corpus != "pretrain") {
    throw ConfigError("retrieve: corpus must be 'pretrain' or 'labeled'");
  }
  const CorpusReader corpus =
      open_corpus(labeled ? labeled_corpus_dir(cfg) : pretrain_corpus_dir(cfg));

  const Checkpoint ck = load_checkpoint(opt.checkpoint);
  Model<float> model(cfg.model, /*with_head=*/false, /*with_classifier=*/false);
  const std::vector<std::string> dropped = restore_params(model.encoder_params(), ck);
  if (!dropped.empty()) {
    std::cerr << "retrieve: using encoder only; dropped";
    for (const std::string& name : dropped) std::cerr << " " << name;
    std::cerr << "\n";
  }

  const EmbeddingStore store = export_embeddings(model, corpus, FrameSelector::all());
  const std::string store_path = cfg.output_dir + "/embeddings.tce";
  save_embeddings(store_path, store);

  std::string csv = "query_video,query_frame,rank,video,frame,distance,tag\n";
  for (const FrameRef& query : opt.queries) {
    const std::vector<NeighborRow> rows = retrieve_neighbors(query, store, opt.top_k, cfg.labels);
    std::cout << "query " << query.video_id << ":" << query.frame_index << "\n";
    std::printf("  %4s  %14s  %10s  %s\n", "rank", "frame", "distance", "tag");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const NeighborRow& r = rows[i];
      std::printf("  %4zu  %7lld:%-6lld  %10.4f  %s\n", i + 1,
                  static_cast<long long>(r.ref.video_id),
                  static_cast<long long>(r.ref.frame_index), r.distance, r.tag.c_str());
      csv += std::to_string(query.video_id) + "," + std::to_string(query.frame_index) + "," +
             std::to_string(i + 1) + "," + std::to_string(r.ref.video_id) + "," +
             std::to_string(r.ref.frame_index) + "," + fmt6(r.distance) + "," + r.tag + "\n";
    }
  }
  write_file_atomic(cfg.output_dir + "/retrieve.csv", csv.data(), csv.size());
  std::cout << "embeddings -> " << store_path << ", table -> " << cfg.output_dir
            << "/retrieve.csv\n";
}

void run_report(const std::vector<std::string>& report_paths, const std::string& out_csv) {
  if (report_paths.empty()) throw ConfigError("report: give at least one report.json path");
  struct Run {
    std::string label;
    std::map<std::string, std::pair<double, double>> summary;
  };
  std::vector<Run> runs;
  std::set<std::string> metrics;
  for (const std::string& path : report_paths) {
    nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.contains("summary")) {
      throw DataError("'" + path + "' is not an evaluate report");
    }
    Run run;
    run.label = path;
    std::replace(run.label.begin(), run.label.end(), ',', '_');
    for (const auto& [key, ms] : j.at("summary").items()) {
      run.summary[key] = {ms.at("mean").get<double>(), ms.at("sd").get<double>()};
      metrics.insert(key);
    }
    runs.push_back(std::move(run));
  }

  std::string csv = "metric";
  for (const Run& run : runs) csv += "," + run.label + "_mean," + run.label + "_sd";
  for (std::size_t i = 1; i < runs.size(); ++i) csv += ",delta_" + runs[i].label;
  csv += "\n";
  for (const std::string& metric : metrics) {
    csv += metric;
    for (const Run& run : runs) {
      const auto it = run.summary.find(metric);
      if (it == run.summary.end()) {
        csv += ",,";
      } else {
        csv += "," + fmt6(it->second.first) + "," + fmt6(it->second.second);
      }
    }
    for (std::size_t i = 1; i < runs.size(); ++i) {
      const auto a = runs[i].summary.find(metric);
      const auto b = runs[0].summary.find(metric);
      if (a == runs[i].summary.end() || b == runs[0].summary.end()) {
        csv += ",";
      } else {
        csv += "," + fmt6(a->second.first - b->second.first);
      }
    }
    csv += "\n";
  }

  if (out_csv.empty()) {
    std::cout << csv;
  } else {
    write_file_atomic(out_csv, csv.data(), csv.size());
    std::cout << "comparison -> " << out_csv << "\n";
    std::cout << csv;
  }
}

}  // namespace tcssl
