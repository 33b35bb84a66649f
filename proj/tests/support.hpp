#pragma once

// Fixtures shared by the unit tests and the acceptance runner.

#include "live/embed_cache.hpp"
#include "live/model.hpp"

#include <cstring>
#include <random>
#include <string>

namespace live::testing {

inline bool bit_equal(const MatF& a, const MatF& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) == 0;
}

template <typename S>
MatF random_patches(std::size_t p, std::size_t d, S& rng) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  MatF m(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline EmbeddingCache random_cache(std::mt19937_64& rng) {
  const std::size_t p = 1 + rng() % 4, d = 1 + rng() % 5, n = rng() % 6;
  EmbeddingCache c(p, d);
  std::uniform_real_distribution<float> g(-1.0f, 1.0f);
  for (std::size_t i = 0; i < n; ++i)
    c.store(make_embedding("sentence " + std::to_string(rng()), g(rng), random_patches(p, d, rng)));
  return c;
}

// Small model dimensions for fast structural checks.
inline ModelConfig tiny_config(std::size_t vocab = 11, std::size_t vision = 5) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.model_dim = 8;
  c.heads = 2;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.ffn_dim = 12;
  c.vision_dim = vision;
  c.max_len = 32;
  return c;
}

// Random source with `units` contiguous sentence blocks of random length,
// one image per unit, each gated in or out at random.
inline Seq2SeqInput random_input(const ModelConfig& cfg, std::size_t patches, std::mt19937_64& rng, std::size_t units = 2,
                                 double gate_probability = 0.5) {
  Seq2SeqInput in;
  std::uniform_int_distribution<int> tok(kReservedCount, static_cast<int>(cfg.vocab_size) - 1);
  std::bernoulli_distribution gated(gate_probability);
  in.src.push_back(kBos);
  std::vector<int> unit_of{-1};
  for (std::size_t u = 0; u < units; ++u)
    for (std::size_t k = 0, n = 1 + rng() % 3; k < n; ++k) {
      in.src.push_back(tok(rng));
      unit_of.push_back(static_cast<int>(u));
    }
  in.src.push_back(kEos);
  unit_of.push_back(-1);
  std::vector<bool> on(units);
  for (std::size_t u = 0; u < units; ++u) on[u] = gated(rng);
  in.assign = FusionAssignment::all_skipping(in.src.size(), units);
  for (std::size_t t = 0; t < in.src.size(); ++t)
    if (unit_of[t] >= 0 && on[static_cast<std::size_t>(unit_of[t])]) in.assign.image_of[t] = unit_of[t];
  for (std::size_t u = 0; u < units; ++u) in.images.push_back(random_patches(patches, cfg.vision_dim, rng));
  std::vector<TokenId> tgt{kBos};
  for (std::size_t k = 0, n = 1 + rng() % 4; k < n; ++k) tgt.push_back(tok(rng));
  tgt.push_back(kEos);
  set_target(in, tgt);
  return in;
}

}  // namespace live::testing
