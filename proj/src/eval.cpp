#include "tcssl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tcssl/rng.hpp"

namespace tcssl {

namespace {

constexpr std::uint64_t kSaltFoldShuffle = 0x666f6c64'73686666ULL;

void check_binary_inputs(const std::vector<double>& scores, const std::vector<int>& labels,
                         const char* who) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw DataError(std::string(who) + ": scores and labels must be nonempty and aligned");
  }
  bool has_pos = false, has_neg = false;
  for (int y : labels) {
    if (y == 1) {
      has_pos = true;
    } else if (y == 0) {
      has_neg = true;
    } else {
      throw DataError(std::string(who) + ": labels must be 0 or 1");
    }
  }
  if (!has_pos || !has_neg) {
    throw DataError(std::string(who) + ": both classes must be present");
  }
}

}  // namespace

double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_binary_inputs(scores, labels, "auc_roc");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Average ranks over tie groups, then the rank-sum form of Mann-Whitney U.
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  double pos_rank_sum = 0.0;
  std::int64_t num_pos = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (labels[t] == 1) {
      pos_rank_sum += rank[t];
      ++num_pos;
    }
  }
  const std::int64_t num_neg = static_cast<std::int64_t>(n) - num_pos;
  const double u = pos_rank_sum - static_cast<double>(num_pos) * (static_cast<double>(num_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(num_pos) * static_cast<double>(num_neg));
}

double sensitivity_at_specificity(const std::vector<double>& scores,
                                  const std::vector<int>& labels, double spec_target) {
  check_binary_inputs(scores, labels, "sensitivity_at_specificity");
  if (spec_target < 0.0 || spec_target > 1.0) {
    throw ConfigError("sensitivity_at_specificity: target outside [0, 1]");
  }
  std::int64_t num_pos = 0, num_neg = 0;
  for (int y : labels) (y == 1 ? num_pos : num_neg)++;

  // Candidate thresholds: every distinct score, plus one above the maximum
  // (the all-negative classifier, specificity 1 by definition).
  std::vector<double> cuts = scores;
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  double best = 0.0;  // all-negative fallback: sensitivity 0 at specificity 1
  for (double t : cuts) {
    std::int64_t tp = 0, tn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool predicted_pos = scores[i] >= t;
      if (labels[i] == 1 && predicted_pos) ++tp;
      if (labels[i] == 0 && !predicted_pos) ++tn;
    }
    const double spec = static_cast<double>(tn) / static_cast<double>(num_neg);
    if (spec >= spec_target) {
      best = std::max(best, static_cast<double>(tp) / static_cast<double>(num_pos));
    }
  }
  return best;
}

double mcc(const Confusion2& c) {
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double fn = static_cast<double>(c.fn), tn = static_cast<double>(c.tn);
  const double denom_sq = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom_sq == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(denom_sq);
}

double f1(const Confusion2& c) {
  const double denom = 2.0 * static_cast<double>(c.tp) + static_cast<double>(c.fp) +
                       static_cast<double>(c.fn);
  if (denom == 0.0) return 0.0;
  return 2.0 * static_cast<double>(c.tp) / denom;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted,
                                 int num_classes) {
  if (truth.size() != predicted.size()) {
    throw DataError("confusion_matrix: truth and predictions must be aligned");
  }
  ConfusionMatrix m(static_cast<std::size_t>(num_classes),
                    std::vector<std::int64_t>(static_cast<std::size_t>(num_classes), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
      throw DataError("confusion_matrix: class out of range");
    }
    ++m[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return m;
}

Confusion2 one_vs_rest(const ConfusionMatrix& m, int cls) {
  Confusion2 c;
  const auto k = static_cast<int>(m.size());
  for (int t = 0; t < k; ++t) {
    for (int p = 0; p < k; ++p) {
      const std::int64_t count = m[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
      if (t == cls && p == cls) {
        c.tp += count;
      } else if (t == cls) {
        c.fn += count;
      } else if (p == cls) {
        c.fp += count;
      } else {
        c.tn += count;
      }
    }
  }
  return c;
}

double accuracy_p0(const ConfusionMatrix& m) {
  std::int64_t trace = 0, total = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m[i].size(); ++j) {
      total += m[i][j];
      if (i == j) trace += m[i][j];
    }
  }
  if (total == 0) return 0.0;
  return static_cast<double>(trace) / static_cast<double>(total);
}

std::vector<std::int64_t> FoldPlan::videos_in_fold(std::int64_t fold) const {
  std::vector<std::int64_t> out;
  for (const auto& [video, f] : assignment) {
    if (f == fold) out.push_back(video);
  }
  return out;
}

std::vector<std::int64_t> FoldPlan::videos_outside_fold(std::int64_t fold) const {
  std::vector<std::int64_t> out;
  for (const auto& [video, f] : assignment) {
    if (f != fold) out.push_back(video);
  }
  return out;
}

FoldPlan grouped_kfold(const std::vector<std::int64_t>& video_ids, std::int64_t k,
                       std::uint64_t seed) {
  if (k < 1) throw ConfigError("grouped_kfold: k must be >= 1");
  if (k > static_cast<std::int64_t>(video_ids.size())) {
    throw ConfigError("grouped_kfold: k (" + std::to_string(k) + ") exceeds video count (" +
                      std::to_string(video_ids.size()) + ")");
  }
  std::vector<std::int64_t> shuffled = video_ids;
  Rng rng = Rng::derive(seed, kSaltFoldShuffle);
  for (std::int64_t i = static_cast<std::int64_t>(shuffled.size()) - 1; i > 0; --i) {
    const std::int64_t j = rng.uniform_int(i + 1);
    std::swap(shuffled[static_cast<std::size_t>(i)], shuffled[static_cast<std::size_t>(j)]);
  }
  FoldPlan plan;
  plan.k = k;
  for (std::size_t i = 0; i < shuffled.size(); ++i) {
    plan.assignment[shuffled[i]] = static_cast<std::int64_t>(i) % k;
  }
  return plan;
}

EvalReport evaluate_fold(std::int64_t fold_id, const std::vector<double>& scores,
                         const std::vector<int>& predicted, const std::vector<int>& truth,
                         int num_classes) {
  EvalReport r;
  r.fold_id = fold_id;
  r.auc = auc_roc(scores, truth);
  r.sens_at_spec = {{"0.95", sensitivity_at_specificity(scores, truth, 0.95)},
                    {"0.90", sensitivity_at_specificity(scores, truth, 0.90)},
                    {"0.80", sensitivity_at_specificity(scores, truth, 0.80)}};
  const ConfusionMatrix m = confusion_matrix(truth, predicted, num_classes);
  for (int cls = 0; cls < num_classes; ++cls) {
    const Confusion2 c = one_vs_rest(m, cls);
    r.per_class[cls] = ClassMetrics{f1(c), mcc(c)};
  }
  r.p0 = accuracy_p0(m);
  return r;
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [cls, m] : r.per_class) {
    per_class[std::to_string(cls)] = {{"f1", m.f1}, {"mcc", m.mcc}};
  }
  j = nlohmann::json{{"fold", r.fold_id},
                     {"auc", r.auc},
                     {"sens_at_spec", r.sens_at_spec},
                     {"per_class", per_class},
                     {"p0", r.p0}};
}

std::map<std::string, double> metric_columns(const EvalReport& r) {
  std::map<std::string, double> out;
  out["auc"] = r.auc;
  for (const auto& [target, value] : r.sens_at_spec) out["sens@" + target] = value;
  for (const auto& [cls, m] : r.per_class) {
    out["f1_class" + std::to_string(cls)] = m.f1;
    out["mcc_class" + std::to_string(cls)] = m.mcc;
  }
  out["p0"] = r.p0;
  return out;
}

std::map<std::string, std::pair<double, double>> summarize_reports(
    const std::vector<EvalReport>& reports) {
  std::map<std::string, std::pair<double, double>> out;
  if (reports.empty()) return out;
  const auto n = static_cast<double>(reports.size());
  std::map<std::string, double> mean;
  for (const EvalReport& r : reports) {
    for (const auto& [key, value] : metric_columns(r)) mean[key] += value / n;
  }
  std::map<std::string, double> var;
  for (const EvalReport& r : reports) {
    for (const auto& [key, value] : metric_columns(r)) {
      const double d = value - mean[key];
      var[key] += d * d / n;
    }
  }
  for (const auto& [key, m] : mean) out[key] = {m, std::sqrt(var[key])};
  return out;
}

std::vector<NeighborRow> retrieve_neighbors(const FrameRef& query, const EmbeddingStore& store,
                                            std::int64_t top_k, const PseudoLabelConfig& cfg) {
  if (store.rows() == 0) throw DataError("retrieve_neighbors: embedding store is empty");
  const std::int64_t q = store.find(query);
  if (q < 0) {
    throw DataError("retrieve_neighbors: query frame (" + std::to_string(query.video_id) + ", " +
                    std::to_string(query.frame_index) + ") not in store");
  }
  const std::int64_t dim = store.embedding_dim;
  const float* qv = store.row(q);
  std::vector<NeighborRow> rows(static_cast<std::size_t>(store.rows()));
  for (std::int64_t i = 0; i < store.rows(); ++i) {
    const float* v = store.row(i);
    double sq = 0.0;
    for (std::int64_t d = 0; d < dim; ++d) {
      const double diff = static_cast<double>(qv[d]) - static_cast<double>(v[d]);
      sq += diff * diff;
    }
    NeighborRow& row = rows[static_cast<std::size_t>(i)];
    row.ref = store.refs[static_cast<std::size_t>(i)];
    row.distance = std::sqrt(sq);
    if (row.ref.video_id != query.video_id) {
      row.tag = "cross-video";
    } else if (std::abs(row.ref.frame_index - query.frame_index) <= cfg.window) {
      row.tag = "within-w";
    } else {
      row.tag = "same-video";
    }
  }
  std::sort(rows.begin(), rows.end(), [](const NeighborRow& a, const NeighborRow& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.ref < b.ref;
  });
  if (top_k < static_cast<std::int64_t>(rows.size())) {
    rows.resize(static_cast<std::size_t>(top_k));
  }
  return rows;
}

}  // namespace tcssl
