#include "live/model_config.hpp"

#include "live/error.hpp"

#include <algorithm>
#include <set>

namespace live {

FusionStrategy parse_fusion_strategy(const std::string& s) {
  if (s == "cross_attention") return FusionStrategy::cross_attention;
  if (s == "concat_encoder_output") return FusionStrategy::concat_encoder_output;
  if (s == "self_attention_concat") return FusionStrategy::self_attention_concat;
  if (s == "none") return FusionStrategy::none;
  throw Error(ErrorCode::InvalidArgument, "unknown fusion strategy '" + s + "'");
}

FusionNorm parse_fusion_norm(const std::string& s) {
  if (s == "pre") return FusionNorm::pre;
  if (s == "post") return FusionNorm::post;
  throw Error(ErrorCode::InvalidArgument, "unknown fusion norm '" + s + "'");
}

std::string to_string(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::cross_attention: return "cross_attention";
    case FusionStrategy::concat_encoder_output: return "concat_encoder_output";
    case FusionStrategy::self_attention_concat: return "self_attention_concat";
    case FusionStrategy::none: return "none";
  }
  return "?";
}

std::string to_string(FusionNorm n) { return n == FusionNorm::pre ? "pre" : "post"; }

void ModelConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, "model config: " + m); };
  if (vocab_size <= 5) bad("vocab_size must exceed the 5 reserved ids");
  if (model_dim == 0 || heads == 0) bad("model_dim and heads must be positive");
  if (model_dim % heads != 0) bad("model_dim must be divisible by heads");
  if (encoder_layers == 0 || decoder_layers == 0) bad("encoder and decoder need at least one layer");
  if (ffn_dim == 0 || vision_dim == 0 || max_len == 0) bad("ffn_dim, vision_dim and max_len must be positive");
  if (!(theta >= 0.0 && theta <= 1.0)) bad("theta must lie in [0, 1]");
  std::set<int> seen;
  for (int l : fusion_layers) {
    if (l < 0 || static_cast<std::size_t>(l) >= encoder_layers) bad("fusion layer " + std::to_string(l) + " out of range");
    if (!seen.insert(l).second) bad("fusion layer " + std::to_string(l) + " listed twice");
  }
}

std::vector<int> ModelConfig::resolved_fusion_layers() const {
  if (!fusion_layers.empty()) {
    auto out = fusion_layers;
    std::sort(out.begin(), out.end());
    return out;
  }
  std::vector<int> all(encoder_layers);
  for (std::size_t i = 0; i < encoder_layers; ++i) all[i] = static_cast<int>(i);
  return all;
}

}  // namespace live
