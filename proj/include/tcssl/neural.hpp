#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcssl/common.hpp"
#include "tcssl/rng.hpp"
#include "tcssl/tensor.hpp"

namespace tcssl {

struct EncoderConfig {
  std::vector<std::int64_t> conv_channels{8, 16};  // stride-2 conv stack
  std::int64_t kernel_size = 3;
  std::int64_t embedding_dim = 64;
};

struct ProjectionHeadConfig {
  std::int64_t num_layers = 3;  // 0 = no head, project() is identity
  std::int64_t dim = 16;
};

struct ModelConfig {
  FrameShape input_shape{3, 16, 16};
  EncoderConfig encoder;
  ProjectionHeadConfig head;
  std::int64_t num_classes = 2;
};

void validate_model_config(const ModelConfig& cfg);

void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);

// A named parameter tensor with its gradient buffer. `decay` marks it for the
// L2 penalty (weights yes, biases no).
template <typename Dtype>
struct Param {
  std::string name;
  Tensor<Dtype> value;
  Tensor<Dtype> grad;
  bool decay = true;

  Param() = default;
  Param(std::string n, std::vector<std::int64_t> shape, bool d)
      : name(std::move(n)), value(shape), grad(std::move(shape)), decay(d) {}
};

// Layers cache their forward input; backward accumulates parameter gradients
// and returns the input gradient. All loops run in a fixed order so every
// reduction is bit-reproducible.

template <typename Dtype>
class Dense {
 public:
  Dense() = default;
  Dense(const std::string& name, std::int64_t in_dim, std::int64_t out_dim)
      : in_dim_(in_dim),
        out_dim_(out_dim),
        w_(name + ".w", {out_dim, in_dim}, true),
        b_(name + ".b", {out_dim}, false) {}

  Tensor<Dtype> forward(const Tensor<Dtype>& x) {
    x_ = x;
    const std::int64_t batch = x.dim(0);
    Tensor<Dtype> y({batch, out_dim_});
    for (std::int64_t b = 0; b < batch; ++b) {
      for (std::int64_t o = 0; o < out_dim_; ++o) {
        Dtype acc = b_.value[o];
        for (std::int64_t i = 0; i < in_dim_; ++i) acc += w_.value.at(o, i) * x.at(b, i);
        y.at(b, o) = acc;
      }
    }
    return y;
  }

  Tensor<Dtype> backward(const Tensor<Dtype>& dy) {
    const std::int64_t batch = dy.dim(0);
    Tensor<Dtype> dx({batch, in_dim_});
    for (std::int64_t b = 0; b < batch; ++b) {
      for (std::int64_t o = 0; o < out_dim_; ++o) {
        const Dtype g = dy.at(b, o);
        b_.grad[o] += g;
        for (std::int64_t i = 0; i < in_dim_; ++i) {
          w_.grad.at(o, i) += g * x_.at(b, i);
          dx.at(b, i) += g * w_.value.at(o, i);
        }
      }
    }
    return dx;
  }

  Param<Dtype>& w() { return w_; }
  Param<Dtype>& b() { return b_; }
  std::int64_t in_dim() const { return in_dim_; }
  std::int64_t out_dim() const { return out_dim_; }

 private:
  std::int64_t in_dim_ = 0;
  std::int64_t out_dim_ = 0;
  Param<Dtype> w_, b_;
  Tensor<Dtype> x_;
};

template <typename Dtype>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, std::int64_t in_ch, std::int64_t out_ch, std::int64_t kernel,
         std::int64_t stride)
      : in_ch_(in_ch),
        out_ch_(out_ch),
        kernel_(kernel),
        stride_(stride),
        pad_(kernel / 2),
        w_(name + ".w", {out_ch, in_ch, kernel, kernel}, true),
        b_(name + ".b", {out_ch}, false) {}

  static std::int64_t out_extent(std::int64_t in, std::int64_t kernel, std::int64_t stride) {
    return (in + 2 * (kernel / 2) - kernel) / stride + 1;
  }

  Tensor<Dtype> forward(const Tensor<Dtype>& x) {
    x_ = x;
    const std::int64_t batch = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::int64_t ho = out_extent(h, kernel_, stride_), wo = out_extent(w, kernel_, stride_);
    Tensor<Dtype> y({batch, out_ch_, ho, wo});
    for (std::int64_t b = 0; b < batch; ++b) {
      for (std::int64_t o = 0; o < out_ch_; ++o) {
        for (std::int64_t oy = 0; oy < ho; ++oy) {
          for (std::int64_t ox = 0; ox < wo; ++ox) {
            Dtype acc = b_.value[o];
            for (std::int64_t c = 0; c < in_ch_; ++c) {
              for (std::int64_t ky = 0; ky < kernel_; ++ky) {
                const std::int64_t iy = oy * stride_ + ky - pad_;
                if (iy < 0 || iy >= h) continue;
                for (std::int64_t kx = 0; kx < kernel_; ++kx) {
                  const std::int64_t ix = ox * stride_ + kx - pad_;
                  if (ix < 0 || ix >= w) continue;
                  acc += w_.value.at(o, c, ky, kx) * x.at(b, c, iy, ix);
                }
              }
            }
            y.at(b, o, oy, ox) = acc;
          }
        }
      }
    }
    return y;
  }

  Tensor<Dtype> backward(const Tensor<Dtype>& dy) {
    const std::int64_t batch = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    const std::int64_t ho = dy.dim(2), wo = dy.dim(3);
    Tensor<Dtype> dx = Tensor<Dtype>::zeros_like(x_);
    for (std::int64_t b = 0; b < batch; ++b) {
      for (std::int64_t o = 0; o < out_ch_; ++o) {
        for (std::int64_t oy = 0; oy < ho; ++oy) {
          for (std::int64_t ox = 0; ox < wo; ++ox) {
            const Dtype g = dy.at(b, o, oy, ox);
            b_.grad[o] += g;
            for (std::int64_t c = 0; c < in_ch_; ++c) {
              for (std::int64_t ky = 0; ky < kernel_; ++ky) {
                const std::int64_t iy = oy * stride_ + ky - pad_;
                if (iy < 0 || iy >= h) continue;
                for (std::int64_t kx = 0; kx < kernel_; ++kx) {
                  const std::int64_t ix = ox * stride_ + kx - pad_;
                  if (ix < 0 || ix >= w) continue;
                  w_.grad.at(o, c, ky, kx) += g * x_.at(b, c, iy, ix);
                  dx.at(b, c, iy, ix) += g * w_.value.at(o, c, ky, kx);
                }
              }
            }
          }
        }
      }
    }
    return dx;
  }

  Param<Dtype>& w() { return w_; }
  Param<Dtype>& b() { return b_; }
  std::int64_t in_ch() const { return in_ch_; }
  std::int64_t out_ch() const { return out_ch_; }
  std::int64_t kernel() const { return kernel_; }

 private:
  std::int64_t in_ch_ = 0, out_ch_ = 0, kernel_ = 0, stride_ = 1, pad_ = 0;
  Param<Dtype> w_, b_;
  Tensor<Dtype> x_;
};

template <typename Dtype>
class ReLU {
 public:
  Tensor<Dtype> forward(const Tensor<Dtype>& x) {
    x_ = x;
    Tensor<Dtype> y = x;
    for (std::int64_t i = 0; i < y.numel(); ++i) {
      if (y[i] < Dtype(0)) y[i] = Dtype(0);
    }
    return y;
  }

  Tensor<Dtype> backward(const Tensor<Dtype>& dy) {
    Tensor<Dtype> dx = dy;
    for (std::int64_t i = 0; i < dx.numel(); ++i) {
      if (x_[i] <= Dtype(0)) dx[i] = Dtype(0);
    }
    return dx;
  }

 private:
  Tensor<Dtype> x_;
};

// Encoder (stride-2 convs + dense to the embedding), optional projection head
// (num_layers blocks of ReLU then dense, the first ReLU acting on the raw
// embedding), and a linear classifier over the full embedding. Heads exist
// only while pretraining; a finetune model is built with with_head = false.
template <typename Dtype>
class Model {
 public:
  explicit Model(const ModelConfig& cfg, bool with_head = true, bool with_classifier = true)
      : cfg_(cfg), with_head_(with_head && cfg.head.num_layers > 0), with_classifier_(with_classifier) {
    validate_model_config(cfg_);
    std::int64_t ch = cfg_.input_shape.channels;
    std::int64_t h = cfg_.input_shape.height;
    std::int64_t w = cfg_.input_shape.width;
    for (std::size_t i = 0; i < cfg_.encoder.conv_channels.size(); ++i) {
      const std::int64_t out = cfg_.encoder.conv_channels[i];
      convs_.emplace_back("encoder.conv" + std::to_string(i), ch, out, cfg_.encoder.kernel_size, 2);
      conv_relus_.emplace_back();
      h = Conv2d<Dtype>::out_extent(h, cfg_.encoder.kernel_size, 2);
      w = Conv2d<Dtype>::out_extent(w, cfg_.encoder.kernel_size, 2);
      ch = out;
    }
    flat_dim_ = ch * h * w;
    conv_out_shape_ = {ch, h, w};
    fc_ = Dense<Dtype>("encoder.fc", flat_dim_, cfg_.encoder.embedding_dim);
    if (with_head_) {
      std::int64_t in = cfg_.encoder.embedding_dim;
      for (std::int64_t i = 0; i < cfg_.head.num_layers; ++i) {
        head_relus_.emplace_back();
        head_fcs_.emplace_back("head.fc" + std::to_string(i), in, cfg_.head.dim);
        in = cfg_.head.dim;
      }
    }
    if (with_classifier_) {
      classifier_ = Dense<Dtype>("classifier", cfg_.encoder.embedding_dim, cfg_.num_classes);
    }
  }

  /// He-uniform fan-in weights, zero biases, drawn in params() order from one
  /// derived stream.
  void init_params(std::uint64_t seed) {
    Rng rng = Rng::derive(seed, 0x1217'0001);
    for (Param<Dtype>* p : params()) {
      if (!p->decay) {
        p->value.fill(Dtype(0));
        continue;
      }
      const std::int64_t fan_in = fan_in_of(*p);
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (std::int64_t i = 0; i < p->value.numel(); ++i) {
        p->value[i] = static_cast<Dtype>(rng.uniform(-limit, limit));
      }
    }
  }

  Tensor<Dtype> encode(const Tensor<Dtype>& pixels) {
    check_input(pixels);
    Tensor<Dtype> h = pixels;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      h = convs_[i].forward(h);
      h = conv_relus_[i].forward(h);
    }
    h.reshape({h.dim(0), flat_dim_});
    return fc_.forward(h);
  }

  Tensor<Dtype> encode_backward(const Tensor<Dtype>& d_embedding) {
    Tensor<Dtype> d = fc_.backward(d_embedding);
    d.reshape({d.dim(0), conv_out_shape_[0], conv_out_shape_[1], conv_out_shape_[2]});
    for (std::size_t i = convs_.size(); i-- > 0;) {
      d = conv_relus_[i].backward(d);
      d = convs_[i].backward(d);
    }
    return d;
  }

  Tensor<Dtype> project(const Tensor<Dtype>& embedding) {
    if (!with_head_ && cfg_.head.num_layers > 0) {
      throw ConfigError("project: model was built without its projection head");
    }
    Tensor<Dtype> h = embedding;
    for (std::size_t i = 0; i < head_fcs_.size(); ++i) {
      h = head_relus_[i].forward(h);
      h = head_fcs_[i].forward(h);
    }
    return h;
  }

  Tensor<Dtype> project_backward(const Tensor<Dtype>& d_projected) {
    Tensor<Dtype> d = d_projected;
    for (std::size_t i = head_fcs_.size(); i-- > 0;) {
      d = head_fcs_[i].backward(d);
      d = head_relus_[i].backward(d);
    }
    return d;
  }

  Tensor<Dtype> classify(const Tensor<Dtype>& embedding) {
    if (!with_classifier_) throw ConfigError("classify: model has no classifier");
    return classifier_.forward(embedding);
  }

  Tensor<Dtype> classify_backward(const Tensor<Dtype>& d_logits) {
    if (!with_classifier_) throw ConfigError("classify_backward: model has no classifier");
    return classifier_.backward(d_logits);
  }

  std::vector<Param<Dtype>*> encoder_params() {
    std::vector<Param<Dtype>*> out;
    for (auto& c : convs_) {
      out.push_back(&c.w());
      out.push_back(&c.b());
    }
    out.push_back(&fc_.w());
    out.push_back(&fc_.b());
    return out;
  }

  std::vector<Param<Dtype>*> head_params() {
    std::vector<Param<Dtype>*> out;
    for (auto& d : head_fcs_) {
      out.push_back(&d.w());
      out.push_back(&d.b());
    }
    return out;
  }

  std::vector<Param<Dtype>*> classifier_params() {
    std::vector<Param<Dtype>*> out;
    if (with_classifier_) {
      out.push_back(&classifier_.w());
      out.push_back(&classifier_.b());
    }
    return out;
  }

  std::vector<Param<Dtype>*> params() {
    std::vector<Param<Dtype>*> out = encoder_params();
    for (Param<Dtype>* p : head_params()) out.push_back(p);
    for (Param<Dtype>* p : classifier_params()) out.push_back(p);
    return out;
  }

  void zero_grads() {
    for (Param<Dtype>* p : params()) p->grad.fill(Dtype(0));
  }

  std::int64_t param_count() {
    std::int64_t n = 0;
    for (Param<Dtype>* p : params()) n += p->value.numel();
    return n;
  }

  const ModelConfig& config() const { return cfg_; }
  bool has_head() const { return with_head_; }
  bool has_classifier() const { return with_classifier_; }
  std::int64_t projection_dim() const { return with_head_ ? cfg_.head.dim : cfg_.encoder.embedding_dim; }

 private:
  std::int64_t fan_in_of(const Param<Dtype>& p) const {
    const auto& s = p.value.shape();
    std::int64_t fan = 1;
    for (std::size_t i = 1; i < s.size(); ++i) fan *= s[i];
    return fan;
  }

  void check_input(const Tensor<Dtype>& pixels) const {
    if (pixels.rank() != 4 || pixels.dim(1) != cfg_.input_shape.channels ||
        pixels.dim(2) != cfg_.input_shape.height || pixels.dim(3) != cfg_.input_shape.width) {
      throw ConfigError("encode: input shape does not match model input_shape");
    }
  }

  ModelConfig cfg_;
  bool with_head_ = false;
  bool with_classifier_ = false;
  std::vector<Conv2d<Dtype>> convs_;
  std::vector<ReLU<Dtype>> conv_relus_;
  Dense<Dtype> fc_;
  std::vector<ReLU<Dtype>> head_relus_;
  std::vector<Dense<Dtype>> head_fcs_;
  Dense<Dtype> classifier_;
  std::int64_t flat_dim_ = 0;
  std::vector<std::int64_t> conv_out_shape_;
};

}  // namespace tcssl
