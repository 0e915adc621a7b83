#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tcssl/common.hpp"
#include "tcssl/mining.hpp"
#include "tcssl/neural.hpp"
#include "tcssl/tensor.hpp"

namespace tcssl {

struct LossConfig {
  double margin = 0.2;
  double weight_decay = 1e-4;
  double supervised_tl_weight = 1.0;
};

inline void validate_loss_config(const LossConfig& cfg) {
  if (cfg.margin < 0.0) throw ConfigError("loss: margin must be >= 0");
  if (cfg.weight_decay < 0.0) throw ConfigError("loss: weight_decay must be >= 0");
  if (cfg.supervised_tl_weight < 0.0) {
    throw ConfigError("loss: supervised_tl_weight must be >= 0");
  }
}

/// Squared Euclidean distances between all embedding rows: out(i, j) = ||e_i - e_j||^2.
template <typename Dtype>
Tensor<Dtype> pairwise_sq_dist(const Tensor<Dtype>& emb) {
  const std::int64_t n = emb.dim(0), d = emb.dim(1);
  Tensor<Dtype> out({n, n});
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      Dtype acc = 0;
      for (std::int64_t k = 0; k < d; ++k) {
        const Dtype diff = emb.at(i, k) - emb.at(j, k);
        acc += diff * diff;
      }
      out.at(i, j) = acc;
    }
  }
  return out;
}

/// Hinge over squared distances of unnormalized embeddings, averaged over the
/// triplet list. Empty list contributes 0 (and, in the backward variant, a
/// zero gradient).
template <typename Dtype>
Dtype triplet_loss(const Tensor<Dtype>& emb, const std::vector<Triplet>& triplets, double margin) {
  if (triplets.empty()) return Dtype(0);
  const Tensor<Dtype> d2 = pairwise_sq_dist(emb);
  Dtype total = 0;
  for (const Triplet& t : triplets) {
    const Dtype hinge = d2.at(t.a, t.p) - d2.at(t.a, t.n) + static_cast<Dtype>(margin);
    if (hinge > Dtype(0)) total += hinge;
  }
  return total / static_cast<Dtype>(triplets.size());
}

/// Loss plus gradient with respect to the embeddings, accumulated into d_emb
/// (which must be zeroed or already hold another loss term's gradient).
template <typename Dtype>
Dtype triplet_loss_backward(const Tensor<Dtype>& emb, const std::vector<Triplet>& triplets,
                            double margin, Tensor<Dtype>& d_emb) {
  if (triplets.empty()) return Dtype(0);
  const std::int64_t n = emb.dim(0), d = emb.dim(1);
  const Tensor<Dtype> d2 = pairwise_sq_dist(emb);
  const Dtype scale = Dtype(1) / static_cast<Dtype>(triplets.size());
  // Route gradients through the pair-distance matrix: each active triplet
  // contributes +1/T to d2(a, p) and -1/T to d2(a, n).
  Tensor<Dtype> g_d2({n, n});
  Dtype total = 0;
  for (const Triplet& t : triplets) {
    const Dtype hinge = d2.at(t.a, t.p) - d2.at(t.a, t.n) + static_cast<Dtype>(margin);
    if (hinge > Dtype(0)) {
      total += hinge;
      g_d2.at(t.a, t.p) += scale;
      g_d2.at(t.a, t.n) -= scale;
    }
  }
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      const Dtype g = g_d2.at(i, j);
      if (g == Dtype(0)) continue;
      for (std::int64_t k = 0; k < d; ++k) {
        const Dtype diff = Dtype(2) * g * (emb.at(i, k) - emb.at(j, k));
        d_emb.at(i, k) += diff;
        d_emb.at(j, k) -= diff;
      }
    }
  }
  return total * scale;
}

/// Mean of -log softmax(logits)[label], stabilized by max subtraction.
template <typename Dtype>
Dtype cross_entropy(const Tensor<Dtype>& logits, const std::vector<int>& labels) {
  const std::int64_t b = logits.dim(0), k = logits.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != b) {
    throw DataError("cross_entropy: label count does not match batch size");
  }
  Dtype total = 0;
  for (std::int64_t i = 0; i < b; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) throw DataError("cross_entropy: label " + std::to_string(y) + " out of range");
    Dtype m = logits.at(i, 0);
    for (std::int64_t c = 1; c < k; ++c) m = std::max(m, logits.at(i, c));
    Dtype sum = 0;
    for (std::int64_t c = 0; c < k; ++c) sum += std::exp(logits.at(i, c) - m);
    total += std::log(sum) - (logits.at(i, y) - m);
  }
  return total / static_cast<Dtype>(b);
}

template <typename Dtype>
Dtype cross_entropy_backward(const Tensor<Dtype>& logits, const std::vector<int>& labels,
                             Tensor<Dtype>& d_logits) {
  const std::int64_t b = logits.dim(0), k = logits.dim(1);
  const Dtype loss = cross_entropy(logits, labels);
  const Dtype scale = Dtype(1) / static_cast<Dtype>(b);
  for (std::int64_t i = 0; i < b; ++i) {
    Dtype m = logits.at(i, 0);
    for (std::int64_t c = 1; c < k; ++c) m = std::max(m, logits.at(i, c));
    Dtype sum = 0;
    for (std::int64_t c = 0; c < k; ++c) sum += std::exp(logits.at(i, c) - m);
    for (std::int64_t c = 0; c < k; ++c) {
      Dtype g = std::exp(logits.at(i, c) - m) / sum;
      if (c == labels[static_cast<std::size_t>(i)]) g -= Dtype(1);
      d_logits.at(i, c) += g * scale;
    }
  }
  return loss;
}

/// Combined finetune objective (value only): tl_weight x class-triplet loss on
/// the embeddings plus cross-entropy on the logits. Gradient wiring, including
/// the classifier barrier, lives in the training step.
template <typename Dtype>
Dtype supervised_loss(const Tensor<Dtype>& embeddings, const Tensor<Dtype>& logits,
                      const std::vector<int>& labels, const LossConfig& cfg) {
  const std::vector<Triplet> triplets = mine_batch_all_classes(labels);
  return static_cast<Dtype>(cfg.supervised_tl_weight) * triplet_loss(embeddings, triplets, cfg.margin) +
         cross_entropy(logits, labels);
}

/// lambda x sum of squared weights, biases excluded.
template <typename Dtype>
Dtype l2_penalty(const std::vector<Param<Dtype>*>& params, double lambda) {
  Dtype total = 0;
  for (const Param<Dtype>* p : params) {
    if (!p->decay) continue;
    for (std::int64_t i = 0; i < p->value.numel(); ++i) total += p->value[i] * p->value[i];
  }
  return static_cast<Dtype>(lambda) * total;
}

/// Gradient of l2_penalty: adds 2*lambda*theta to each weight gradient.
template <typename Dtype>
void add_l2_gradients(const std::vector<Param<Dtype>*>& params, double lambda) {
  for (Param<Dtype>* p : params) {
    if (!p->decay) continue;
    for (std::int64_t i = 0; i < p->value.numel(); ++i) {
      p->grad[i] += Dtype(2) * static_cast<Dtype>(lambda) * p->value[i];
    }
  }
}

}  // namespace tcssl
