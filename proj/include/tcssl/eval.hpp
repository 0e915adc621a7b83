#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcssl/common.hpp"
#include "tcssl/labeling.hpp"
#include "tcssl/persistence.hpp"

namespace tcssl {

/// Exact ROC AUC as the Mann-Whitney statistic P(score_pos > score_neg) +
/// P(tie)/2, computed through average ranks. Throws on single-class input.
double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Max sensitivity over all thresholds t (predict positive iff score >= t,
/// including t above every score) whose specificity is >= spec_target.
double sensitivity_at_specificity(const std::vector<double>& scores,
                                  const std::vector<int>& labels, double spec_target);

struct Confusion2 {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Matthews correlation coefficient; 0 when the denominator vanishes.
double mcc(const Confusion2& c);
/// F1 = 2TP / (2TP + FP + FN); 0 when the denominator vanishes.
double f1(const Confusion2& c);

/// counts(i, j) = how often true class i was predicted as class j.
using ConfusionMatrix = std::vector<std::vector<std::int64_t>>;

ConfusionMatrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted,
                                 int num_classes);
/// One-vs-rest reduction of a multiclass confusion matrix.
Confusion2 one_vs_rest(const ConfusionMatrix& m, int cls);
/// Overall accuracy: trace / total.
double accuracy_p0(const ConfusionMatrix& m);

struct FoldPlan {
  std::int64_t k = 0;
  std::map<std::int64_t, std::int64_t> assignment;  // video_id -> fold

  std::vector<std::int64_t> videos_in_fold(std::int64_t fold) const;
  std::vector<std::int64_t> videos_outside_fold(std::int64_t fold) const;
};

/// Videos shuffled by seed, dealt round-robin; fold sizes differ by <= 1.
FoldPlan grouped_kfold(const std::vector<std::int64_t>& video_ids, std::int64_t k,
                       std::uint64_t seed);

struct ClassMetrics {
  double f1 = 0.0;
  double mcc = 0.0;
};

struct EvalReport {
  std::int64_t fold_id = 0;
  double auc = 0.0;
  std::map<std::string, double> sens_at_spec;  // keys "0.95", "0.90", "0.80"
  std::map<int, ClassMetrics> per_class;
  double p0 = 0.0;
};

/// Scores must be the positive-class probability per sample; predictions are
/// argmax labels. Fills the full report for one fold.
EvalReport evaluate_fold(std::int64_t fold_id, const std::vector<double>& scores,
                         const std::vector<int>& predicted, const std::vector<int>& truth,
                         int num_classes);

void to_json(nlohmann::json& j, const EvalReport& r);

/// Flat metric view of one report, keyed like the csv columns
/// ("auc", "sens@0.95", "f1_class0", ..., "p0").
std::map<std::string, double> metric_columns(const EvalReport& r);

/// Mean and standard deviation (population, n denominator) per scalar metric
/// across folds, keyed like metric_columns.
std::map<std::string, std::pair<double, double>> summarize_reports(
    const std::vector<EvalReport>& reports);

struct NeighborRow {
  FrameRef ref;
  double distance = 0.0;
  std::string tag;  // "within-w" | "same-video" | "cross-video"
};

/// All stored frames ranked by ascending Euclidean distance to the query row,
/// ties broken by (video_id, frame_index); the query itself ranks first at
/// distance 0. Tags come from the pseudo-label predicates.
std::vector<NeighborRow> retrieve_neighbors(const FrameRef& query, const EmbeddingStore& store,
                                            std::int64_t top_k, const PseudoLabelConfig& cfg);

}  // namespace tcssl
