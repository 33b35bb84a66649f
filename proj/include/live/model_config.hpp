#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace live {

enum class FusionStrategy { cross_attention, concat_encoder_output, self_attention_concat, none };
enum class FusionNorm { pre, post };

FusionStrategy parse_fusion_strategy(const std::string& s);
FusionNorm parse_fusion_norm(const std::string& s);
std::string to_string(FusionStrategy s);
std::string to_string(FusionNorm n);

struct ModelConfig {
  std::size_t vocab_size = 256;
  std::size_t model_dim = 64;
  std::size_t heads = 4;
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 2;
  std::size_t ffn_dim = 128;
  FusionStrategy fusion_strategy = FusionStrategy::cross_attention;
  std::vector<int> fusion_layers;  // empty: every encoder layer
  FusionNorm fusion_norm = FusionNorm::pre;
  double theta = 0.27;
  std::size_t max_len = 128;
  std::size_t vision_dim = 768;     // raw patch width d
  std::size_t projection_hidden = 0;  // 0: 2 * model_dim
  bool zero_init_fusion_output = true;

  void validate() const;
  std::vector<int> resolved_fusion_layers() const;
  std::size_t resolved_projection_hidden() const { return projection_hidden ? projection_hidden : 2 * model_dim; }
};

}  // namespace live
