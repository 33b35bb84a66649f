#include "live/decoding.hpp"
#include "live/digest.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace live;

namespace {

// Deterministic pseudo-random logits keyed by (seed, prefix).
NextTokenLogits hashed_model(std::uint64_t seed, std::size_t vocab) {
  return [seed, vocab](const std::vector<TokenId>& prefix) {
    std::uint64_t h = seed * 0x9E3779B97F4A7C15ull + 1;
    for (TokenId t : prefix) h = (h ^ static_cast<std::uint64_t>(t + 7)) * 0x100000001B3ull;
    std::mt19937_64 rng(h);
    std::normal_distribution<double> n(0.0, 2.0);
    Eigen::VectorXd v(static_cast<Eigen::Index>(vocab));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = n(rng);
    return v;
  };
}

void enumerate(const NextTokenLogits& m, std::vector<TokenId>& prefix, double lp, std::size_t max_len,
               std::vector<Hypothesis>& out) {
  if (prefix.size() - 1 == max_len) {
    out.push_back({{prefix.begin() + 1, prefix.end()}, lp});
    return;
  }
  const auto logp = next_log_probs(m(prefix));
  for (Eigen::Index t = 0; t < logp.size(); ++t) {
    if (!std::isfinite(logp(t))) continue;
    prefix.push_back(static_cast<TokenId>(t));
    if (t == kEos)
      out.push_back({{prefix.begin() + 1, prefix.end()}, lp + logp(t)});
    else
      enumerate(m, prefix, lp + logp(t), max_len, out);
    prefix.pop_back();
  }
}

Hypothesis exhaustive_best(const NextTokenLogits& m, std::size_t max_len) {
  std::vector<Hypothesis> all;
  std::vector<TokenId> prefix{kBos};
  enumerate(m, prefix, 0.0, max_len, all);
  return *std::min_element(all.begin(), all.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
    return a.tokens < b.tokens;
  });
}

std::vector<TokenId> greedy(const NextTokenLogits& m, std::size_t max_len) {
  std::vector<TokenId> prefix{kBos};
  while (prefix.size() - 1 < max_len) {
    const auto lp = next_log_probs(m(prefix));
    Eigen::Index best;
    lp.maxCoeff(&best);
    prefix.push_back(static_cast<TokenId>(best));
    if (best == kEos) break;
  }
  return {prefix.begin() + 1, prefix.end()};
}

}  // namespace

TEST(Decoding, DefaultsAndBans) {
  DecodeConfig d;
  EXPECT_EQ(d.beam_size, 5u);
  EXPECT_DOUBLE_EQ(d.top_p, 0.9);
  EXPECT_DOUBLE_EQ(d.temperature, 0.7);
  const auto lp = next_log_probs(Eigen::VectorXd::Constant(6, 100.0));
  EXPECT_TRUE(std::isinf(lp(kPad)));
  EXPECT_TRUE(std::isinf(lp(kBos)));
  EXPECT_NEAR(lp(kEos), std::log(0.25), 1e-12);
}

TEST(Decoding, WideBeamMatchesExhaustiveSearch) {
  DecodeConfig d;
  d.beam_size = 25;
  d.max_len = 4;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto m = hashed_model(s, 5);
    const auto best = exhaustive_best(m, 4);
    const auto got = beam_search(m, d);
    EXPECT_EQ(got.tokens, best.tokens) << s;
    EXPECT_NEAR(got.log_prob, best.log_prob, 1e-9);
  }
}

TEST(Decoding, BeamOneIsGreedy) {
  DecodeConfig d;
  d.beam_size = 1;
  d.max_len = 8;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto m = hashed_model(100 + s, 9);
    EXPECT_EQ(beam_search(m, d).tokens, greedy(m, 8));
  }
}

TEST(Decoding, BeamOnRealModelEndsInEosOrMaxLen) {
  std::mt19937_64 rng(3);
  const auto c = live::testing::tiny_config();
  Seq2Seq<float> model(c, 3);
  const auto in = live::testing::random_input(c, 3, rng);
  DecodeConfig d;
  d.max_len = 6;
  const auto out = generate(model, in, d);
  ASSERT_FALSE(out.empty());
  EXPECT_TRUE(out.back() == kEos || out.size() == 6);
  EXPECT_EQ(out, generate(model, in, d));
}

TEST(Nucleus, SmallestPrefix) {
  Eigen::VectorXd p(4);
  p << 0.5, 0.3, 0.1, 0.1;
  EXPECT_EQ(nucleus_set(p, 0.9), (std::vector<TokenId>{0, 1, 2}));
  EXPECT_EQ(nucleus_set(p, 0.8), (std::vector<TokenId>{0, 1}));
  EXPECT_EQ(nucleus_set(p, 0.85), (std::vector<TokenId>{0, 1, 2, 3}));
  EXPECT_EQ(nucleus_set(p, 0.5), (std::vector<TokenId>{0}));
  EXPECT_EQ(nucleus_set(p, 1.0), (std::vector<TokenId>{0, 1, 2, 3}));
}

TEST(Nucleus, TiesAtBoundaryIncluded) {
  Eigen::VectorXd p(5);
  p << 0.2, 0.2, 0.2, 0.2, 0.2;
  EXPECT_EQ(nucleus_set(p, 0.3).size(), 5u);
  Eigen::VectorXd q(3);
  q << 0.05, 0.9, 0.05;
  EXPECT_EQ(nucleus_set(q, 0.9), (std::vector<TokenId>{1}));
  EXPECT_EQ(nucleus_set(q, 0.91), (std::vector<TokenId>{1, 0, 2}));
}

TEST(Nucleus, SamplesStayInsideNucleusAndAreSeeded) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto m = hashed_model(500 + s, 12);
    DecodeConfig d;
    d.mode = DecodeMode::nucleus;
    d.max_len = 10;
    std::mt19937_64 a(s), b(s);
    std::vector<std::vector<TokenId>> trace;
    const auto out = nucleus_sample(m, d, a, &trace);
    ASSERT_EQ(trace.size(), out.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      EXPECT_NE(std::find(trace[i].begin(), trace[i].end(), out[i]), trace[i].end());
    EXPECT_EQ(out, nucleus_sample(m, d, b));
  }
}

TEST(Nucleus, SingletonIsDeterministic) {
  // One dominant token: every draw returns it.
  auto m = [](const std::vector<TokenId>& prefix) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(8);
    v(prefix.size() < 4 ? 6 : kEos) = 50.0;
    return v;
  };
  DecodeConfig d;
  d.max_len = 10;
  for (std::uint64_t s = 0; s < 10; ++s) {
    std::mt19937_64 rng(s);
    EXPECT_EQ(nucleus_sample(m, d, rng), (std::vector<TokenId>{6, 6, 6, kEos}));
  }
}

TEST(Decoding, InvalidConfig) {
  DecodeConfig d;
  d.top_p = 0.0;
  EXPECT_THROW(d.validate(), Error);
  d = {};
  d.beam_size = 0;
  EXPECT_THROW(d.validate(), Error);
  d = {};
  d.temperature = 0.0;
  EXPECT_THROW(d.validate(), Error);
  EXPECT_THROW(parse_decode_mode("greedy"), Error);
}
