// Acceptance runner: one PASS/FAIL line per criterion, each with its wall
// time checked against a budget. Exit status is the number of failures.

#include "live/decoding.hpp"
#include "live/embed_cache.hpp"
#include "live/error.hpp"
#include "live/gating.hpp"
#include "live/metrics.hpp"
#include "live/pipeline.hpp"
#include "live/training.hpp"

#include "support.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace live;
using live::testing::bit_equal;
using live::testing::random_input;
using live::testing::tiny_config;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(double x, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << x;
  return s.str();
}

std::vector<std::string> word_list(std::size_t n) {
  std::vector<std::string> w;
  for (std::size_t i = 0; i < n; ++i) w.push_back("w" + std::to_string(i));
  return w;
}

std::string random_sentence(const std::vector<std::string>& words, std::size_t len, std::mt19937_64& rng) {
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s += (i ? " " : "") + words[rng() % words.size()];
  return s;
}

template <typename S>
void perturb(Seq2Seq<S>& m, Partition which, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, sd);
  for (auto& p : m.params())
    if (p.partition == which)
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += static_cast<S>(n(rng));
}

// Sentence-level inputs built through the real segmentation, augmentation,
// cache and gating path.
struct Corpus {
  Vocab vocab;
  EmbeddingCache cache;
  std::vector<PreparedSource> sources;
};

Corpus make_corpus(const std::vector<std::string>& texts, const Vocab& vocab, Augmenter& aug, std::size_t p,
                   std::size_t d) {
  Corpus c{vocab, EmbeddingCache(p, d), {}};
  std::vector<std::string> image_texts;
  for (const auto& t : texts) {
    c.sources.push_back(prepare_source(t, SegmentMode::prose, vocab, Granularity::sent));
    for (const auto& it : c.sources.back().image_texts) image_texts.push_back(it);
  }
  AugmentRequest knobs;
  knobs.patch_count = p;
  knobs.dim = d;
  knobs.seed = 17;
  fill_cache(c.cache, aug, image_texts, knobs);
  return c;
}

Outcome plug_out() {
  std::mt19937_64 rng(1);
  const auto words = word_list(30);
  ModelConfig c = tiny_config(5 + words.size(), 6);
  c.model_dim = 16;
  c.ffn_dim = 24;
  c.encoder_layers = 2;
  c.decoder_layers = 2;
  c.max_len = 64;
  c.zero_init_fusion_output = false;
  Seq2Seq<float> fused(c, 1);
  perturb(fused, Partition::fusion, 0.5, rng);
  ModelConfig none_cfg = c;
  none_cfg.fusion_strategy = FusionStrategy::none;
  Seq2Seq<float> plain(none_cfg, fused.params());

  std::vector<std::string> texts;
  for (int i = 0; i < 100; ++i)
    texts.push_back(random_sentence(words, 3, rng) + ". " + random_sentence(words, 2 + rng() % 4, rng) + ".");
  MockAugmenter aug;
  const auto corpus = make_corpus(texts, Vocab::from_tokens(words), aug, 4, c.vision_dim);
  GateConfig gate;
  gate.theta = 1.0;
  double worst = 0.0;
  std::size_t gated = 0;
  for (const auto& src : corpus.sources) {
    auto in = make_input(src, corpus.cache, gate);
    gated += !in.assign.all_skip();
    std::vector<TokenId> tgt{kBos};
    for (int k = 0; k < 4; ++k) tgt.push_back(static_cast<TokenId>(kReservedCount + rng() % words.size()));
    tgt.push_back(kEos);
    set_target(in, tgt);
    worst = std::max(worst, static_cast<double>((fused.seq2seq_forward(in) - plain.seq2seq_forward(in)).cwiseAbs().maxCoeff()));
  }
  return {gated == 0 && worst <= 1e-6, "100 inputs, max |dlogit| = " + fmt(worst) + ", inputs with gated images: " +
                                          std::to_string(gated)};
}

Outcome identity_at_init() {
  std::mt19937_64 rng(2);
  ModelConfig c = tiny_config(11, 6);
  c.model_dim = 16;
  c.ffn_dim = 24;
  c.encoder_layers = 2;
  c.decoder_layers = 2;
  ModelConfig none_cfg = c;
  none_cfg.fusion_strategy = FusionStrategy::none;

  // Train a text-only backbone for a while so its weights are far from init.
  Seq2Seq<float> backbone(none_cfg, 2);
  std::vector<Seq2SeqInput> data;
  for (int i = 0; i < 16; ++i) data.push_back(random_input(c, 3, rng, 2, 0.0));
  FinetuneConfig fc;
  SgdMomentum opt(backbone.params(), fc.learning_rate, fc.momentum);
  for (int s = 0; s < 50; ++s) finetune_step(backbone, opt, std::span(data).subspan(static_cast<std::size_t>(s % 2) * 8, 8), fc);

  Seq2Seq<float> fresh(c, 3);
  ParamSet<float> spliced;
  for (const auto& p : backbone.params()) {
    const auto& src = p.partition == Partition::backbone ? p : fresh.params()[static_cast<std::size_t>(fresh.params().find(p.name))];
    spliced.add(p.name, p.partition, src.value);
  }
  Seq2Seq<float> plugged(c, spliced);
  std::size_t equal = 0;
  const int n = 50;
  for (int i = 0; i < n; ++i) {
    auto in = random_input(c, 3, rng, 3, 1.0);
    equal += bit_equal(plugged.seq2seq_forward(in), backbone.seq2seq_forward(in));
  }
  return {equal == n, std::to_string(equal) + "/" + std::to_string(n) + " inputs bit-identical (all images gated in)"};
}

Outcome gradient_check() {
  std::mt19937_64 rng(3);
  ModelConfig c = tiny_config(11, 4);
  c.zero_init_fusion_output = false;
  Seq2Seq<double> m(c, 3);
  std::vector<Seq2SeqInput> batch = {random_input(c, 3, rng, 2, 1.0), random_input(c, 3, rng, 2, 0.5)};
  const auto g = m.param_gradients(batch, 0.1);
  const double h = 1e-4;
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    auto& value = m.params()[i].value;
    for (Eigen::Index k = 0; k < value.size(); ++k) {
      const double keep = value.data()[k];
      value.data()[k] = keep + h;
      const double up = m.param_gradients(batch, 0.1).loss;
      value.data()[k] = keep - h;
      const double down = m.param_gradients(batch, 0.1).loss;
      value.data()[k] = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = g.grads[i].data()[k];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      if (rel > worst) {
        worst = rel;
        where = m.params()[i].name + "[" + std::to_string(k) + "]";
      }
      ++checked;
    }
  }
  return {worst < 1e-4, std::to_string(checked) + " parameters, max relative error " + fmt(worst) + " at " + where};
}

Outcome frozen_backbone() {
  std::mt19937_64 rng(4);
  ModelConfig c = tiny_config(11, 6);
  Seq2Seq<float> m(c, 4);
  const auto init = m.params();
  std::vector<Seq2SeqInput> data;
  for (int i = 0; i < 32; ++i) data.push_back(random_input(c, 3, rng, 2, 1.0));
  PretrainConfig pc;
  pc.steps = 200;
  pc.batch_size = 4;
  pc.seed = 4;
  pretrain(m, data, pc);
  std::size_t moved = 0, fusion_tensors = 0;
  for (std::size_t i = 0; i < m.params().size(); ++i)
    if (m.params()[i].partition == Partition::fusion) {
      ++fusion_tensors;
      moved += !bit_equal(m.params()[i].value, init[i].value);
    }
  const bool frozen = m.params().identical(init, Partition::backbone);
  return {frozen && moved >= 1, std::string("backbone ") + (frozen ? "bit-identical" : "CHANGED") + ", " +
                                    std::to_string(moved) + "/" + std::to_string(fusion_tensors) +
                                    " fusion tensors moved"};
}

// Copy task with a hidden label: the target repeats the source and appends
// L0 or L1, where the label is the sign of the mean of the first column of
// the sentence's mock image. The text alone carries no usable signal.
struct LabelSplit {
  std::vector<Seq2SeqInput> inputs;
  std::vector<std::size_t> label_pos;
  std::vector<TokenId> label;
};

struct LabelTask {
  std::vector<Seq2SeqInput> train;
  LabelSplit valid, test;
};

LabelTask make_label_task(Augmenter& shown, const GateConfig& gate, const ModelConfig& c, std::size_t p,
                          std::size_t n_train, std::size_t n_eval, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto words = word_list(c.vocab_size - kReservedCount - 2);
  auto all = words;
  all.push_back("L0");
  all.push_back("L1");
  const Vocab vocab = Vocab::from_tokens(all);
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < n_train + 2 * n_eval; ++i) texts.push_back(random_sentence(words, 4, rng));

  MockAugmenter truth_aug;
  const auto truth = make_corpus(texts, vocab, truth_aug, p, c.vision_dim);
  const auto seen = make_corpus(texts, vocab, shown, p, c.vision_dim);

  LabelTask task;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto& src = seen.sources[i];
    const double signal = truth.cache.lookup(truth.sources[i].image_texts[0])->patches.col(0).mean();
    const TokenId label = vocab.id(signal > 0 ? "L1" : "L0");
    auto in = make_input(src, seen.cache, gate);
    std::vector<TokenId> tgt(src.tokens.ids.begin(), src.tokens.ids.end() - 1);
    tgt.push_back(label);
    tgt.push_back(kEos);
    set_target(in, tgt);
    if (i < n_train) {
      task.train.push_back(std::move(in));
      continue;
    }
    auto& split = i < n_train + n_eval ? task.valid : task.test;
    split.label_pos.push_back(tgt.size() - 3);
    split.label.push_back(label);
    split.inputs.push_back(std::move(in));
  }
  return task;
}

double label_accuracy(const Seq2Seq<float>& m, const LabelSplit& split) {
  std::size_t right = 0;
  for (std::size_t i = 0; i < split.inputs.size(); ++i) {
    const MatF logits = m.seq2seq_forward(split.inputs[i]);
    Eigen::Index best;
    logits.row(static_cast<Eigen::Index>(split.label_pos[i])).maxCoeff(&best);
    right += static_cast<TokenId>(best) == split.label[i];
  }
  return static_cast<double>(right) / static_cast<double>(split.inputs.size());
}

double train_label_model(Augmenter& shown, double theta, std::uint64_t seed) {
  ModelConfig c;
  c.vocab_size = kReservedCount + 20 + 2;
  c.model_dim = 32;
  c.heads = 4;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.ffn_dim = 64;
  c.vision_dim = 16;
  c.max_len = 16;
  GateConfig gate;
  gate.theta = theta;
  const auto task = make_label_task(shown, gate, c, 4, 6000, 400, seed);
  Seq2Seq<float> m(c, seed);
  FinetuneConfig fc;
  fc.batch_size = 16;
  fc.max_grad_norm = 1.0;
  fc.seed = seed;
  // Epoch selection by label accuracy on the validation split; a second,
  // slower phase refines the best epoch of the first.
  const Validator valid = [&](const Seq2Seq<float>& mm) { return label_accuracy(mm, task.valid); };
  fc.epochs = 30;
  fc.learning_rate = 0.1;
  auto res = finetune(m, task.train, fc, valid);
  Seq2Seq<float> refined(c, res.best_params);
  fc.epochs = 20;
  fc.learning_rate = 0.01;
  res = finetune(refined, task.train, fc, valid);
  return label_accuracy(Seq2Seq<float>(c, res.best_params), task.test);
}

Outcome informative_image() {
  MockAugmenter mock;
  NoiseAugmenter noise;
  const double fused = train_label_model(mock, 0.0, 5);
  const double text_only = train_label_model(mock, 1.0, 5);
  const double with_noise = train_label_model(noise, 0.0, 5);
  const bool ok = fused >= 0.95 && text_only <= 0.60 && with_noise <= 0.60;
  return {ok, "hidden-label accuracy: fused (theta=0) " + fmt(fused) + ", theta=1 " + fmt(text_only) +
                  ", noise images " + fmt(with_noise)};
}

Outcome overfit() {
  std::mt19937_64 rng(6);
  ModelConfig c = tiny_config(40, 8);
  c.model_dim = 64;
  c.heads = 4;
  c.encoder_layers = 2;
  c.decoder_layers = 2;
  c.ffn_dim = 128;
  std::vector<Seq2SeqInput> data;
  for (int i = 0; i < 32; ++i) data.push_back(random_input(c, 4, rng, 2, 0.5));
  Seq2Seq<float> m(c, 6);
  FinetuneConfig fc;
  fc.learning_rate = 0.05;
  fc.momentum = 0.9;
  fc.max_grad_norm = 1.0;
  SgdMomentum opt(m.params(), fc.learning_rate, fc.momentum, fc.max_grad_norm);
  double acc = teacher_forced_accuracy(m, data);
  std::size_t step = 0;
  for (; step < 2000 && acc < 0.99;) {
    for (std::size_t b = 0; b < 4; ++b, ++step) finetune_step(m, opt, std::span(data).subspan(b * 8, 8), fc);
    if (step % 20 == 0) acc = teacher_forced_accuracy(m, data);
  }
  acc = teacher_forced_accuracy(m, data);
  return {acc >= 0.99, "teacher-forced accuracy " + fmt(acc) + " after " + std::to_string(step) + " steps"};
}

Outcome decoding_oracles() {
  std::mt19937_64 rng(7);
  std::size_t beam_ok = 0, samples = 0, outside = 0;
  for (int model = 0; model < 50; ++model) {
    // Seven ids: <pad> and <bos> are never generated, leaving five candidates.
    ModelConfig c = tiny_config(7, 4);
    Seq2Seq<float> m(c, 100 + static_cast<std::uint64_t>(model));
    perturb(m, Partition::backbone, 0.5, rng);
    Seq2SeqInput in;
    in.src = {kBos, 5, kUnk, 6, 6, kEos};
    in.assign = FusionAssignment::all_skipping(in.src.size(), 0);
    const auto scorer = model_scorer(m, in);

    std::vector<Hypothesis> all;
    std::function<void(std::vector<TokenId>&, double)> walk = [&](std::vector<TokenId>& prefix, double lp) {
      const auto logp = next_log_probs(scorer(prefix));
      for (Eigen::Index t = 0; t < logp.size(); ++t) {
        if (!std::isfinite(logp(t))) continue;
        prefix.push_back(static_cast<TokenId>(t));
        if (t == kEos || prefix.size() - 1 == 4)
          all.push_back({{prefix.begin() + 1, prefix.end()}, lp + logp(t)});
        else
          walk(prefix, lp + logp(t));
        prefix.pop_back();
      }
    };
    std::vector<TokenId> root{kBos};
    walk(root, 0.0);
    const auto best = *std::min_element(all.begin(), all.end(), [](const Hypothesis& a, const Hypothesis& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
      return a.tokens < b.tokens;
    });
    DecodeConfig d;
    d.beam_size = 625;
    d.max_len = 4;
    beam_ok += beam_search(scorer, d).tokens == best.tokens;

    DecodeConfig nd;
    nd.mode = DecodeMode::nucleus;
    nd.max_len = 4;
    for (int s = 0; s < 20; ++s) {
      std::mt19937_64 srng(static_cast<std::uint64_t>(model * 100 + s));
      std::vector<std::vector<TokenId>> trace;
      const auto out = nucleus_sample(scorer, nd, srng, &trace);
      for (std::size_t k = 0; k < out.size(); ++k, ++samples)
        outside += std::find(trace[k].begin(), trace[k].end(), out[k]) == trace[k].end();
    }
  }
  return {beam_ok == 50 && outside == 0, "beam = exhaustive on " + std::to_string(beam_ok) + "/50 models; " +
                                             std::to_string(outside) + "/" + std::to_string(samples) +
                                             " sampled tokens outside the nucleus"};
}

Outcome masking_statistics() {
  std::mt19937_64 rng(8);
  double masked = 0, content = 0, span_sum = 0, spans = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<TokenId> tokens{kBos};
    for (int k = 0; k < 40; ++k) tokens.push_back(static_cast<TokenId>(kReservedCount + rng() % 50));
    tokens.push_back(kEos);
    const auto m = mask_spans(tokens, 0.5, 3.5, rng);
    masked += static_cast<double>(m.masked_tokens);
    content += static_cast<double>(m.content_tokens);
    for (int l : m.drawn_lengths) span_sum += l;
    spans += static_cast<double>(m.drawn_lengths.size());
  }
  const double frac = masked / content, mean_span = span_sum / spans;
  return {frac >= 0.50 && frac <= 0.60 && mean_span >= 3.3 && mean_span <= 3.7,
          "masked fraction " + fmt(frac) + ", mean pre-clamp span " + fmt(mean_span) + " (1000 texts of 40 tokens)"};
}

Outcome metric_fixtures() {
  struct Fixture {
    std::string name;
    double got, want;
  };
  const std::vector<Fixture> fx = {
      {"bleu1 exact", bleu({"the cat sat"}, {{"the cat sat"}}, 1), 1.0},
      {"bleu1 clipped", bleu({"the the the"}, {{"the cat"}}, 1), 1.0 / 3.0},
      {"rougeL lcs", rouge({"a b c d"}, {"a c d"}, RougeVariant::rl), 6.0 / 7.0},
      {"distinct4", distinct({"a b c d e"}, 4), 1.0},
      {"distinct2 repeat", distinct({"a a a a a"}, 2), 0.25},
      {"distinct1 doubled", distinct({"a b a c", "a b a c"}, 1), distinct({"a b a c"}, 1) / 2.0},
  };
  double worst = 0.0;
  std::string bad;
  for (const auto& f : fx) {
    const double err = std::abs(f.got - f.want);
    if (err > worst) worst = err;
    if (err > 1e-6) bad += " " + f.name;
  }
  return {bad.empty(), std::to_string(fx.size()) + " fixtures, max error " + fmt(worst) + (bad.empty() ? "" : ", off:" + bad)};
}

Outcome cache_round_trip() {
  std::mt19937_64 rng(9);
  std::size_t exact = 0, truncations = 0, clean = 0;
  for (int i = 0; i < 100; ++i) {
    const auto c = live::testing::random_cache(rng);
    const std::string bytes = c.serialize();
    const auto back = EmbeddingCache::deserialize(bytes);
    exact += back.serialize() == bytes && back.size() == c.size();
    for (std::size_t n = 0; n < bytes.size(); ++n) {
      ++truncations;
      try {
        EmbeddingCache::deserialize(std::string_view(bytes).substr(0, n));
      } catch (const Error& e) {
        clean += e.code() == ErrorCode::TruncatedFile;
      }
    }
  }
  return {exact == 100 && clean == truncations, std::to_string(exact) + "/100 caches round-trip bit-exact; " +
                                                    std::to_string(clean) + "/" + std::to_string(truncations) +
                                                    " truncations rejected as TruncatedFile"};
}

Outcome theta_sweep() {
  std::mt19937_64 rng(10);
  const auto words = word_list(200);
  std::vector<std::string> texts;
  for (int i = 0; i < 200; ++i) texts.push_back(random_sentence(words, 3 + rng() % 6, rng) + ".");
  MockAugmenter aug;
  const auto corpus = make_corpus(texts, Vocab::from_tokens(words), aug, 2, 4);
  std::vector<double> gammas;
  for (const auto& src : corpus.sources) {
    const auto g = source_gammas(src, corpus.cache);
    gammas.insert(gammas.end(), g.begin(), g.end());
  }
  std::vector<double> fractions;
  for (int i = 0; i < 20; ++i) fractions.push_back(gated_fraction(gammas, i / 19.0));
  bool monotone = true;
  for (std::size_t i = 1; i < fractions.size(); ++i) monotone = monotone && fractions[i] <= fractions[i - 1];
  return {monotone && fractions.front() == 1.0 && fractions.back() == 0.0,
          std::to_string(gammas.size()) + " sentences, gated fraction " + fmt(fractions.front()) + " -> " +
              fmt(fractions[5]) + " (theta=" + fmt(5 / 19.0, 3) + ") -> " + fmt(fractions.back()) +
              (monotone ? ", non-increasing" : ", NOT monotone")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<std::string> only;
  app.add_option("--only", only, "run only the named criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {"plug-out", 60, plug_out},
      {"identity-at-init", 60, identity_at_init},
      {"gradient-check", 120, gradient_check},
      {"frozen-backbone", 120, frozen_backbone},
      {"informative-image", 600, informative_image},
      {"overfit", 300, overfit},
      {"decoding-oracles", 60, decoding_oracles},
      {"masking-statistics", 30, masking_statistics},
      {"metric-fixtures", 10, metric_fixtures},
      {"cache", 60, cache_round_trip},
      {"theta-sweep", 30, theta_sweep},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << (pass ? "PASS " : "FAIL ") << std::left << std::setw(20) << c.name << std::right << std::fixed
              << std::setprecision(1) << std::setw(7) << secs << "s / " << c.budget_seconds << "s  " << o.detail
              << (in_time ? "" : " [over time budget]") << std::endl;
    std::cout.unsetf(std::ios::fixed);
  }
  return failures;
}
