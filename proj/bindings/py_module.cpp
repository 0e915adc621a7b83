#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tcssl/corpus.hpp"
#include "tcssl/eval.hpp"
#include "tcssl/labeling.hpp"
#include "tcssl/losses.hpp"
#include "tcssl/mining.hpp"
#include "tcssl/persistence.hpp"
#include "tcssl/sampling.hpp"
#include "tcssl/train.hpp"

namespace py = pybind11;
using namespace tcssl;

namespace {

std::vector<double> as_double_vec(const py::array_t<double>& a) {
  const auto buf = a.request();
  if (buf.ndim != 1) throw ConfigError("expected a 1-d array");
  const auto* data = static_cast<const double*>(buf.ptr);
  return {data, data + buf.shape[0]};
}

std::vector<int> as_int_vec(const py::array_t<std::int64_t>& a) {
  const auto buf = a.request();
  if (buf.ndim != 1) throw ConfigError("expected a 1-d array");
  const auto* data = static_cast<const std::int64_t*>(buf.ptr);
  std::vector<int> out(static_cast<std::size_t>(buf.shape[0]));
  for (py::ssize_t i = 0; i < buf.shape[0]; ++i) out[static_cast<std::size_t>(i)] = static_cast<int>(data[i]);
  return out;
}

Tensor<double> as_tensor_2d(const py::array_t<double>& a) {
  const auto buf = a.request();
  if (buf.ndim != 2) throw ConfigError("expected a 2-d array");
  Tensor<double> t({buf.shape[0], buf.shape[1]});
  const auto* data = static_cast<const double*>(buf.ptr);
  const auto row = static_cast<std::size_t>(buf.strides[0] / static_cast<py::ssize_t>(sizeof(double)));
  const auto col = static_cast<std::size_t>(buf.strides[1] / static_cast<py::ssize_t>(sizeof(double)));
  for (std::int64_t i = 0; i < t.dim(0); ++i) {
    for (std::int64_t j = 0; j < t.dim(1); ++j) {
      t.at(i, j) = data[static_cast<std::size_t>(i) * row + static_cast<std::size_t>(j) * col];
    }
  }
  return t;
}

std::vector<Triplet> as_triplets(const py::array_t<std::int64_t>& a) {
  const auto buf = a.request();
  if (buf.ndim != 2 || buf.shape[1] != 3) throw ConfigError("expected a (T, 3) triplet array");
  std::vector<Triplet> out(static_cast<std::size_t>(buf.shape[0]));
  const auto* data = static_cast<const std::int64_t*>(buf.ptr);
  for (py::ssize_t i = 0; i < buf.shape[0]; ++i) {
    out[static_cast<std::size_t>(i)] = {data[3 * i], data[3 * i + 1], data[3 * i + 2]};
  }
  return out;
}

py::array_t<std::int64_t> triplets_to_array(const std::vector<Triplet>& triplets) {
  py::array_t<std::int64_t> out({static_cast<py::ssize_t>(triplets.size()), py::ssize_t(3)});
  auto view = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    view(static_cast<py::ssize_t>(i), 0) = triplets[i].a;
    view(static_cast<py::ssize_t>(i), 1) = triplets[i].p;
    view(static_cast<py::ssize_t>(i), 2) = triplets[i].n;
  }
  return out;
}

ConfusionMatrix as_confusion(const py::array_t<std::int64_t>& a) {
  const auto buf = a.request();
  if (buf.ndim != 2 || buf.shape[0] != buf.shape[1]) throw ConfigError("expected a square matrix");
  const auto* data = static_cast<const std::int64_t*>(buf.ptr);
  ConfusionMatrix m(static_cast<std::size_t>(buf.shape[0]),
                    std::vector<std::int64_t>(static_cast<std::size_t>(buf.shape[1]), 0));
  for (py::ssize_t i = 0; i < buf.shape[0]; ++i) {
    for (py::ssize_t j = 0; j < buf.shape[1]; ++j) {
      m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = data[i * buf.shape[1] + j];
    }
  }
  return m;
}

}  // namespace

PYBIND11_MODULE(_tcssl, m) {
  m.doc() = "Core operations behind the tcssl CLI: time-based pseudo-labels, "
            "batch-all triplet mining, losses, evaluation metrics, and the "
            "synthetic corpus generator.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  // ---- pseudo-labels ----
  m.def(
      "pseudo_label",
      [](std::int64_t video_id, std::int64_t frame_index, std::int64_t multiplier) {
        PseudoLabelConfig cfg;
        cfg.video_id_multiplier = multiplier;
        return pseudo_label({video_id, frame_index}, cfg).value;
      },
      py::arg("video_id"), py::arg("frame_index"), py::arg("multiplier") = 1000000,
      "Time-based pseudo-label value multiplier * video_id + frame_index.");
  m.def(
      "frame_distance",
      [](std::int64_t a, std::int64_t b) { return frame_distance({a}, {b}); },
      py::arg("a"), py::arg("b"), "Absolute difference of two pseudo-label values.");
  m.def(
      "is_positive",
      [](std::int64_t a, std::int64_t b, std::int64_t window) {
        PseudoLabelConfig cfg;
        cfg.window = window;
        return is_positive({a}, {b}, cfg);
      },
      py::arg("a"), py::arg("b"), py::arg("window") = 9,
      "Whether two pseudo-labels are within the similarity window (inclusive).");
  m.def("count_positives", &count_positives, py::arg("position"), py::arg("sequence_size"),
        py::arg("window"),
        "In-window neighbor count for one position of a contiguous sequence.");

  // ---- mining ----
  m.def(
      "mine_batch_all_windowed",
      [](const py::array_t<std::int64_t>& labels, std::int64_t window) {
        const auto buf = labels.request();
        if (buf.ndim != 1) throw ConfigError("expected a 1-d label array");
        const auto* data = static_cast<const std::int64_t*>(buf.ptr);
        const std::vector<std::int64_t> vec(data, data + buf.shape[0]);
        return triplets_to_array(mine_batch_all_windowed(vec, window));
      },
      py::arg("pseudo_labels"), py::arg("window") = 9,
      "All (anchor, positive, negative) index triples under the window predicate, "
      "as an (T, 3) array in ascending order.");
  m.def(
      "mine_batch_all_classes",
      [](const py::array_t<std::int64_t>& labels) {
        return triplets_to_array(mine_batch_all_classes(as_int_vec(labels)));
      },
      py::arg("labels"),
      "All (anchor, positive, negative) index triples under class equality.");

  // ---- losses ----
  m.def(
      "triplet_loss",
      [](const py::array_t<double>& embeddings, const py::array_t<std::int64_t>& triplets,
         double margin) {
        return triplet_loss(as_tensor_2d(embeddings), as_triplets(triplets), margin);
      },
      py::arg("embeddings"), py::arg("triplets"), py::arg("margin") = 0.2,
      "Mean hinge over the triplets: max(d2(a,p) - d2(a,n) + margin, 0).");
  m.def(
      "cross_entropy",
      [](const py::array_t<double>& logits, const py::array_t<std::int64_t>& labels) {
        return cross_entropy(as_tensor_2d(logits), as_int_vec(labels));
      },
      py::arg("logits"), py::arg("labels"), "Mean negative log softmax probability.");

  // ---- metrics ----
  m.def(
      "auc_roc",
      [](const py::array_t<double>& scores, const py::array_t<std::int64_t>& labels) {
        return auc_roc(as_double_vec(scores), as_int_vec(labels));
      },
      py::arg("scores"), py::arg("labels"),
      "Area under the ROC curve via average ranks; ties share rank mass.");
  m.def(
      "sensitivity_at_specificity",
      [](const py::array_t<double>& scores, const py::array_t<std::int64_t>& labels,
         double spec_target) {
        return sensitivity_at_specificity(as_double_vec(scores), as_int_vec(labels), spec_target);
      },
      py::arg("scores"), py::arg("labels"), py::arg("spec_target"),
      "Best sensitivity across thresholds whose specificity meets the target.");
  m.def(
      "confusion_matrix",
      [](const py::array_t<std::int64_t>& truth, const py::array_t<std::int64_t>& predicted,
         int num_classes) {
        const ConfusionMatrix c = confusion_matrix(as_int_vec(truth), as_int_vec(predicted), num_classes);
        py::array_t<std::int64_t> out({py::ssize_t(num_classes), py::ssize_t(num_classes)});
        auto view = out.mutable_unchecked<2>();
        for (int i = 0; i < num_classes; ++i) {
          for (int j = 0; j < num_classes; ++j) {
            view(i, j) = c[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
          }
        }
        return out;
      },
      py::arg("truth"), py::arg("predicted"), py::arg("num_classes"),
      "counts[i, j] = how often true class i was predicted as class j.");
  m.def(
      "mcc",
      [](const py::array_t<std::int64_t>& confusion, int cls) {
        return mcc(one_vs_rest(as_confusion(confusion), cls));
      },
      py::arg("confusion"), py::arg("cls") = 1,
      "One-vs-rest Matthews correlation for a class of a confusion matrix.");
  m.def(
      "f1",
      [](const py::array_t<std::int64_t>& confusion, int cls) {
        return f1(one_vs_rest(as_confusion(confusion), cls));
      },
      py::arg("confusion"), py::arg("cls") = 1,
      "One-vs-rest F1 for a class of a confusion matrix.");
  m.def(
      "accuracy_p0",
      [](const py::array_t<std::int64_t>& confusion) { return accuracy_p0(as_confusion(confusion)); },
      py::arg("confusion"), "Overall accuracy: trace over total.");
  m.def(
      "grouped_kfold",
      [](const std::vector<std::int64_t>& video_ids, std::int64_t k, std::uint64_t seed) {
        return grouped_kfold(video_ids, k, seed).assignment;
      },
      py::arg("video_ids"), py::arg("k"), py::arg("seed") = 0,
      "video_id -> fold assignment; videos never straddle folds.");

  // ---- schedules and batching ----
  m.def(
      "lr_at",
      [](double base_lr, double decay_factor, std::int64_t decay_every, std::int64_t total_steps,
         std::int64_t step) {
        return lr_at({base_lr, decay_factor, decay_every, total_steps}, step);
      },
      py::arg("base_lr"), py::arg("decay_factor"), py::arg("decay_every"),
      py::arg("total_steps"), py::arg("step"),
      "Step-decay learning rate: base / factor^floor(step / every).");
  m.def("apportion_slots", &apportion_slots, py::arg("batch_size"), py::arg("proportions"),
        "Largest-remainder split of a batch across classes; sums to batch_size.");

  // ---- corpus generation ----
  m.def(
      "generate_corpus",
      [](const std::string& dir, const std::string& corpus_id, std::int64_t num_videos,
         std::int64_t frames_per_video, double anomaly_rate, std::int64_t anomaly_run_length,
         bool labeled, std::uint64_t seed) {
        GeneratorSpec spec;
        spec.num_videos = num_videos;
        spec.frames_per_video = frames_per_video;
        spec.anomaly_rate = anomaly_rate;
        spec.anomaly_run_length = anomaly_run_length;
        spec.labeled = labeled;
        spec.seed = seed;
        const CorpusManifest manifest = generate_corpus(spec, dir, corpus_id);
        py::dict out;
        out["corpus_id"] = manifest.corpus_id;
        out["num_videos"] = manifest.num_videos;
        out["frames_per_video"] = manifest.frames_per_video;
        out["labeled"] = manifest.labeled;
        py::dict counts;
        for (const auto& [cls, n] : manifest.class_counts) counts[py::int_(cls)] = n;
        out["class_counts"] = counts;
        return out;
      },
      py::arg("dir"), py::arg("corpus_id") = "corpus", py::arg("num_videos") = 3,
      py::arg("frames_per_video") = 120, py::arg("anomaly_rate") = 0.0,
      py::arg("anomaly_run_length") = 1, py::arg("labeled") = false, py::arg("seed") = 0,
      "Writes a synthetic video corpus (manifest.json + video_<id>.bin [+ labels]).");

  // ---- checksums ----
  m.def(
      "crc32",
      [](const py::bytes& data) {
        const std::string s = data;
        return crc32_ieee(s.data(), s.size());
      },
      py::arg("data"), "IEEE CRC-32 as used by the checkpoint container.");
}
