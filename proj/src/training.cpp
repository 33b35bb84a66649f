#include "live/training.hpp"

#include "live/digest.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

namespace live {

void PretrainConfig::validate() const {
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw Error(ErrorCode::InvalidArgument, "mask_ratio must lie in (0, 1)");
  if (!(span_lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "span_lambda must be positive");
  if (batch_size == 0) throw Error(ErrorCode::InvalidArgument, "pretrain batch_size must be positive");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "pretrain learning_rate must be positive");
}

void FinetuneConfig::validate() const {
  if (!(smoothing >= 0.0 && smoothing < 1.0)) throw Error(ErrorCode::InvalidArgument, "smoothing must lie in [0, 1)");
  if (batch_size == 0) throw Error(ErrorCode::InvalidArgument, "finetune batch_size must be positive");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "finetune learning_rate must be positive");
}

namespace {

bool is_special(TokenId t) { return t == kBos || t == kEos || t == kPad; }

}  // namespace

MaskedText mask_spans(const std::vector<TokenId>& tokens, double mask_ratio, double span_lambda, std::mt19937_64& rng) {
  std::vector<std::size_t> content;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (!is_special(tokens[i])) content.push_back(i);
  if (content.empty()) throw Error(ErrorCode::InvalidArgument, "mask_spans: no content tokens");

  MaskedText out;
  out.target = tokens;
  out.content_tokens = content.size();
  std::vector<bool> masked(content.size(), false);
  std::poisson_distribution<int> poisson(span_lambda);
  const double need = mask_ratio * static_cast<double>(content.size());

  while (static_cast<double>(out.masked_tokens) < need) {
    const int drawn = poisson(rng);
    out.drawn_lengths.push_back(drawn);
    const std::size_t len = static_cast<std::size_t>(std::max(1, drawn));
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < masked.size(); ++i)
      if (!masked[i]) free.push_back(i);
    std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
    const std::size_t start = free[pick(rng)];
    for (std::size_t i = start; i < std::min(start + len, masked.size()); ++i) {
      if (!masked[i]) ++out.masked_tokens;
      masked[i] = true;
    }
  }

  std::vector<bool> is_masked(tokens.size(), false);
  for (std::size_t i = 0; i < content.size(); ++i) is_masked[content[i]] = masked[i];
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (is_masked[i]) {
      if (i > 0 && is_masked[i - 1]) continue;  // inside a run already emitted
      out.noised.push_back(kMask);
    } else {
      out.noised.push_back(tokens[i]);
    }
    out.origin.push_back(static_cast<int>(i));
  }
  return out;
}

FusionAssignment remap_assignment(const FusionAssignment& source, const std::vector<int>& origin) {
  FusionAssignment a;
  a.image_count = source.image_count;
  a.image_of.reserve(origin.size());
  for (int o : origin) a.image_of.push_back(source.image_of[static_cast<std::size_t>(o)]);
  return a;
}

SgdMomentum::SgdMomentum(const ParamSet<float>& params, double learning_rate, double momentum, double max_grad_norm)
    : lr_(learning_rate), momentum_(momentum), max_grad_norm_(max_grad_norm), velocity_(zero_grads(params)) {}

void SgdMomentum::step(ParamSet<float>& params, const GradSet<float>& grads,
                       const std::function<bool(Partition)>& trainable) {
  double scale = 1.0;
  if (max_grad_norm_ > 0.0) {
    double sq = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i)
      if (trainable(params[i].partition)) sq += grads[i].cast<double>().squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > max_grad_norm_) scale = max_grad_norm_ / norm;
  }
  const auto mu = static_cast<float>(momentum_);
  const auto lr = static_cast<float>(lr_);
  const auto s = static_cast<float>(scale);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!trainable(params[i].partition)) continue;
    velocity_[i] = mu * velocity_[i] + s * grads[i];
    params[i].value -= lr * velocity_[i];
  }
}

double pretrain_step(Seq2Seq<float>& model, SgdMomentum& opt, std::span<const Seq2SeqInput> batch,
                     const PretrainConfig&) {
  auto lg = model.param_gradients(batch, 0.0f, /*freeze_backbone=*/true);
  opt.step(model.params(), lg.grads, [](Partition p) { return p != Partition::backbone; });
  return lg.loss;
}

double finetune_step(Seq2Seq<float>& model, SgdMomentum& opt, std::span<const Seq2SeqInput> batch,
                     const FinetuneConfig& cfg) {
  auto lg = model.param_gradients(batch, static_cast<float>(cfg.smoothing));
  opt.step(model.params(), lg.grads, [](Partition) { return true; });
  return lg.loss;
}

std::vector<std::size_t> few_shot_split(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error(ErrorCode::InvalidArgument, "fraction must lie in (0, 1]");
  if (n == 0) throw Error(ErrorCode::EmptyCorpus, "few_shot_split on an empty dataset");
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::size_t> out;
  out.reserve(k);
  std::mt19937_64 rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(out), static_cast<std::ptrdiff_t>(k), rng);
  return out;
}

std::vector<std::uint64_t> few_shot_seeds(std::uint64_t master, std::size_t groups) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t g = 0; g < groups; ++g) seeds.push_back(derive_seed(master, "fewshot/group/" + std::to_string(g)));
  return seeds;
}

double teacher_forced_accuracy(const Seq2Seq<float>& model, std::span<const Seq2SeqInput> data) {
  std::size_t hit = 0, total = 0;
  for (const auto& in : data) {
    const MatF logits = model.seq2seq_forward(in);
    for (std::size_t t = 0; t < in.tgt_out.size(); ++t) {
      if (in.tgt_out[t] == kPad) continue;
      Eigen::Index best;
      logits.row(static_cast<Eigen::Index>(t)).maxCoeff(&best);
      hit += best == in.tgt_out[t];
      ++total;
    }
  }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

std::string loss_log_line(std::size_t step, double loss, const ParamSet<float>& params) {
  std::ostringstream s;
  s << step << ' ' << std::setprecision(9) << loss << std::hex << std::setfill('0');
  for (Partition p : {Partition::backbone, Partition::fusion, Partition::projection})
    s << ' ' << to_string(p) << '=' << std::setw(16) << params.checksum(p);
  return s.str();
}

FinetuneResult finetune(Seq2Seq<float>& model, std::span<const Seq2SeqInput> train, const FinetuneConfig& cfg,
                        const Validator& validate, std::ostream* log, const EpochHook& on_epoch) {
  cfg.validate();
  if (train.empty()) throw Error(ErrorCode::EmptyCorpus, "finetune on an empty training set");
  SgdMomentum opt(model.params(), cfg.learning_rate, cfg.momentum, cfg.max_grad_norm);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  FinetuneResult res;
  res.best_metric = -std::numeric_limits<double>::infinity();
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      std::vector<Seq2SeqInput> batch;
      for (std::size_t i = b; i < std::min(b + cfg.batch_size, order.size()); ++i) batch.push_back(train[order[i]]);
      const double loss = finetune_step(model, opt, batch, cfg);
      sum += loss;
      ++batches;
      if (log) *log << loss_log_line(++step, loss, model.params()) << '\n';
    }
    res.epoch_losses.push_back(sum / static_cast<double>(batches));
    const double metric = validate ? validate(model) : -res.epoch_losses.back();
    res.epoch_metrics.push_back(metric);
    if (metric > res.best_metric) {
      res.best_metric = metric;
      res.best_epoch = epoch;
      res.best_params = model.params();
    }
    if (on_epoch) on_epoch(epoch, model);
  }
  return res;
}

Seq2SeqInput make_denoising_example(const Seq2SeqInput& clean, const PretrainConfig& cfg, std::mt19937_64& rng) {
  auto masked = mask_spans(clean.src, cfg.mask_ratio, cfg.span_lambda, rng);
  Seq2SeqInput in;
  in.src = masked.noised;
  in.images = clean.images;
  in.assign = remap_assignment(clean.assign, masked.origin);
  set_target(in, masked.target);
  return in;
}

std::vector<double> pretrain(Seq2Seq<float>& model, std::span<const Seq2SeqInput> data, const PretrainConfig& cfg,
                             std::ostream* log) {
  cfg.validate();
  if (data.empty()) throw Error(ErrorCode::EmptyCorpus, "pretrain on an empty corpus");
  SgdMomentum opt(model.params(), cfg.learning_rate, cfg.momentum, cfg.max_grad_norm);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::vector<double> losses;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<Seq2SeqInput> batch;
    for (std::size_t i = 0; i < cfg.batch_size; ++i) batch.push_back(make_denoising_example(data[pick(rng)], cfg, rng));
    losses.push_back(pretrain_step(model, opt, batch, cfg));
    if (log) *log << loss_log_line(step + 1, losses.back(), model.params()) << '\n';
  }
  return losses;
}

}  // namespace live
