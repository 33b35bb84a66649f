#pragma once

#include "live/model.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace live {

struct PretrainConfig {
  double mask_ratio = 0.5;
  double span_lambda = 3.5;
  std::size_t batch_size = 8;
  std::size_t steps = 1000;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double max_grad_norm = 0.0;  // 0 disables clipping
  std::uint64_t seed = 0;

  void validate() const;
};

struct FinetuneConfig {
  std::size_t batch_size = 8;
  std::size_t epochs = 10;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double max_grad_norm = 0.0;
  double smoothing = 0.1;
  std::string validation_metric = "bleu4";
  std::uint64_t seed = 0;

  void validate() const;
};

struct MaskedText {
  std::vector<TokenId> noised;   // spans collapsed to single <mask> tokens
  std::vector<TokenId> target;   // the original sequence
  std::vector<int> origin;       // noised position -> first original position it covers
  std::size_t content_tokens = 0;
  std::size_t masked_tokens = 0;
  std::vector<int> drawn_lengths;  // span lengths before the >= 1 clamp
};

// Draws Poisson span lengths (clamped to >= 1) at uniformly random unmasked
// start positions until the masked share of content tokens first reaches
// mask_ratio. <bos>, <eos> and <pad> are never masked.
MaskedText mask_spans(const std::vector<TokenId>& tokens, double mask_ratio, double span_lambda, std::mt19937_64& rng);

// Maps a source assignment onto the noised sequence through `origin`.
FusionAssignment remap_assignment(const FusionAssignment& source, const std::vector<int>& origin);

// Plain SGD with momentum and a constant learning rate. Only partitions for
// which `trainable` holds are touched; the rest stay bit-identical.
class SgdMomentum {
 public:
  SgdMomentum(const ParamSet<float>& params, double learning_rate, double momentum, double max_grad_norm = 0.0);

  void step(ParamSet<float>& params, const GradSet<float>& grads, const std::function<bool(Partition)>& trainable);

 private:
  double lr_;
  double momentum_;
  double max_grad_norm_;
  GradSet<float> velocity_;
};

// One fusion-only update: gradients are taken with the backbone frozen and
// only fusion and projection tensors move.
double pretrain_step(Seq2Seq<float>& model, SgdMomentum& opt, std::span<const Seq2SeqInput> batch,
                     const PretrainConfig& cfg);

// One update of every partition.
double finetune_step(Seq2Seq<float>& model, SgdMomentum& opt, std::span<const Seq2SeqInput> batch,
                     const FinetuneConfig& cfg);

// Uniform sample without replacement of max(1, round(fraction * n)) indices,
// returned ascending.
std::vector<std::size_t> few_shot_split(std::size_t n, double fraction, std::uint64_t seed);

// The seeds of the `groups` independent few-shot groups.
std::vector<std::uint64_t> few_shot_seeds(std::uint64_t master, std::size_t groups = 5);

// Share of non-pad target positions whose argmax logit is the gold token.
double teacher_forced_accuracy(const Seq2Seq<float>& model, std::span<const Seq2SeqInput> data);

// "step loss backbone=<hex> fusion=<hex> projection=<hex>"
std::string loss_log_line(std::size_t step, double loss, const ParamSet<float>& params);

struct FinetuneResult {
  std::vector<double> epoch_losses;
  std::vector<double> epoch_metrics;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
  ParamSet<float> best_params;
};

using Validator = std::function<double(const Seq2Seq<float>&)>;
using EpochHook = std::function<void(std::size_t epoch, const Seq2Seq<float>&)>;

// Epoch loop with seed-determined shuffling; keeps the parameters of the
// epoch with the highest validation metric (earliest wins ties).
FinetuneResult finetune(Seq2Seq<float>& model, std::span<const Seq2SeqInput> train, const FinetuneConfig& cfg,
                        const Validator& validate, std::ostream* log = nullptr, const EpochHook& on_epoch = {});

// Fixed-step pretraining loop over `data` with seed-determined batches.
// make_example turns (clean example, rng) into the noised training input.
std::vector<double> pretrain(Seq2Seq<float>& model, std::span<const Seq2SeqInput> data, const PretrainConfig& cfg,
                             std::ostream* log = nullptr);

// Builds the denoising input for one clean caption example.
Seq2SeqInput make_denoising_example(const Seq2SeqInput& clean, const PretrainConfig& cfg, std::mt19937_64& rng);

}  // namespace live
