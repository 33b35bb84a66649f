#pragma once

#include "live/model.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace live {

enum class DecodeMode { beam, nucleus };

DecodeMode parse_decode_mode(const std::string& s);

struct DecodeConfig {
  DecodeMode mode = DecodeMode::beam;
  std::size_t beam_size = 5;
  double top_p = 0.9;
  double temperature = 0.7;
  std::size_t max_len = 64;  // generated tokens, <bos> excluded
  bool length_normalize = false;
  std::uint64_t seed = 0;

  void validate() const;
};

// Next-token scores for a prefix that starts with <bos>. Returns raw logits
// over the vocabulary.
using NextTokenLogits = std::function<Eigen::VectorXd(const std::vector<TokenId>& prefix)>;

// Tokens that may never be generated.
bool banned_token(TokenId t);

// Log-softmax with banned tokens at -inf.
Eigen::VectorXd next_log_probs(const Eigen::VectorXd& logits);

struct Hypothesis {
  std::vector<TokenId> tokens;  // generated tokens, <bos> excluded; ends in <eos> unless cut at max_len
  double log_prob = 0.0;
};

// Keeps the beam_size best partial hypotheses by summed log-probability.
// Ties: earlier finish, then lexicographically smaller tokens.
Hypothesis beam_search(const NextTokenLogits& model, const DecodeConfig& cfg);

// Indices of the smallest descending-probability prefix whose mass reaches
// top_p; every token tied with the last one kept is included too.
std::vector<TokenId> nucleus_set(const Eigen::VectorXd& probs, double top_p);

// Temperature, softmax, nucleus truncation, renormalization, sampling.
// `trace`, when given, receives the nucleus of every step.
std::vector<TokenId> nucleus_sample(const NextTokenLogits& model, const DecodeConfig& cfg, std::mt19937_64& rng,
                                    std::vector<std::vector<TokenId>>* trace = nullptr);

// Scorer over a Seq2Seq model; the encoder runs once per source.
NextTokenLogits model_scorer(const Seq2Seq<float>& model, const Seq2SeqInput& src);

std::vector<TokenId> generate(const Seq2Seq<float>& model, const Seq2SeqInput& src, const DecodeConfig& cfg);

}  // namespace live
