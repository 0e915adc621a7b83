#include "tcssl/neural.hpp"

namespace tcssl {

void validate_model_config(const ModelConfig& cfg) {
  if (cfg.input_shape.channels < 1 || cfg.input_shape.height < 1 || cfg.input_shape.width < 1) {
    throw ConfigError("model: input_shape must be positive");
  }
  if (cfg.encoder.conv_channels.empty()) throw ConfigError("model: need at least one conv layer");
  for (std::int64_t c : cfg.encoder.conv_channels) {
    if (c < 1) throw ConfigError("model: conv channel counts must be >= 1");
  }
  if (cfg.encoder.kernel_size < 1 || cfg.encoder.kernel_size % 2 == 0) {
    throw ConfigError("model: kernel_size must be odd and >= 1");
  }
  if (cfg.encoder.embedding_dim < 1) throw ConfigError("model: embedding_dim must be >= 1");
  if (cfg.head.num_layers < 0) throw ConfigError("model: head num_layers must be >= 0");
  if (cfg.head.num_layers > 0) {
    if (cfg.head.dim < 1) throw ConfigError("model: head dim must be >= 1");
    if (cfg.head.dim >= cfg.encoder.embedding_dim) {
      throw ConfigError("model: head dim (" + std::to_string(cfg.head.dim) +
                        ") must be lower than embedding_dim (" +
                        std::to_string(cfg.encoder.embedding_dim) + ")");
    }
  }
  if (cfg.num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
  std::int64_t h = cfg.input_shape.height, w = cfg.input_shape.width;
  for (std::size_t i = 0; i < cfg.encoder.conv_channels.size(); ++i) {
    h = Conv2d<float>::out_extent(h, cfg.encoder.kernel_size, 2);
    w = Conv2d<float>::out_extent(w, cfg.encoder.kernel_size, 2);
    if (h < 1 || w < 1) throw ConfigError("model: conv stack shrinks the input below 1x1");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& cfg) {
  j = nlohmann::json{
      {"input_channels", cfg.input_shape.channels},
      {"input_height", cfg.input_shape.height},
      {"input_width", cfg.input_shape.width},
      {"conv_channels", cfg.encoder.conv_channels},
      {"kernel_size", cfg.encoder.kernel_size},
      {"embedding_dim", cfg.encoder.embedding_dim},
      {"head_layers", cfg.head.num_layers},
      {"head_dim", cfg.head.dim},
      {"num_classes", cfg.num_classes},
  };
}

void from_json(const nlohmann::json& j, ModelConfig& cfg) {
  if (j.contains("input_channels")) j.at("input_channels").get_to(cfg.input_shape.channels);
  if (j.contains("input_height")) j.at("input_height").get_to(cfg.input_shape.height);
  if (j.contains("input_width")) j.at("input_width").get_to(cfg.input_shape.width);
  if (j.contains("conv_channels")) j.at("conv_channels").get_to(cfg.encoder.conv_channels);
  if (j.contains("kernel_size")) j.at("kernel_size").get_to(cfg.encoder.kernel_size);
  if (j.contains("embedding_dim")) j.at("embedding_dim").get_to(cfg.encoder.embedding_dim);
  if (j.contains("head_layers")) j.at("head_layers").get_to(cfg.head.num_layers);
  if (j.contains("head_dim")) j.at("head_dim").get_to(cfg.head.dim);
  if (j.contains("num_classes")) j.at("num_classes").get_to(cfg.num_classes);
}

}  // namespace tcssl
