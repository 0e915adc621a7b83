#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcssl/config.hpp"
#include "tcssl/eval.hpp"

namespace tcssl {

/// Parses "video:frame" (e.g. "3:1421").
FrameRef parse_frame_ref(const std::string& text);

/// Parallel-fold cap: TCSSL_THREADS when set (>= 1), else the hardware
/// concurrency, clamped to the fold count.
std::int64_t fold_thread_cap(std::int64_t folds);

/// Writes both corpora (corpus_pretrain/, corpus_labeled/) plus config.json
/// under output_dir.
void run_generate(const RunConfig& cfg);

/// Pretrains on corpus_pretrain, appending to run_log.jsonl; writes
/// pretrain.tcs. Returns the checkpoint path.
std::string run_pretrain(const RunConfig& cfg);

/// Finetunes on the whole labeled corpus (no held-out split); empty
/// from_checkpoint trains from scratch. Writes finetune.tcs.
std::string run_finetune(const RunConfig& cfg, const std::string& from_checkpoint);

/// Grouped k-fold finetune plus evaluation on held-out videos; folds run in
/// parallel up to fold_thread_cap, each deterministically seeded, so the
/// thread count never changes results. Writes report.json and report.csv.
std::vector<EvalReport> run_evaluate(const RunConfig& cfg, const std::string& from_checkpoint);

struct RetrieveOptions {
  std::string checkpoint;
  std::vector<FrameRef> queries;
  std::int64_t top_k = 8;
  std::string corpus = "pretrain";  // "pretrain" | "labeled"
};

/// Exports embeddings.tce with the checkpoint's encoder, then prints and
/// writes (retrieve.csv) the ranked neighbor table per query.
void run_retrieve(const RunConfig& cfg, const RetrieveOptions& opt);

/// Side-by-side mean±sd comparison of several report.json files; writes CSV
/// to out_csv (or stdout when empty) with per-run deltas against the first.
void run_report(const std::vector<std::string>& report_paths, const std::string& out_csv);

}  // namespace tcssl
