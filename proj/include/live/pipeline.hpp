#pragma once

#include "live/config.hpp"
#include "live/dataset.hpp"
#include "live/embed_cache.hpp"
#include "live/metrics.hpp"
#include "live/model.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace live {

// A source text segmented, tokenized and paired with the texts its images
// are synthesized from.
struct PreparedSource {
  SegmentedDocument doc;
  TokenizedDocument tokens;
  std::vector<std::string> image_texts;
};

PreparedSource prepare_source(std::string_view source, SegmentMode mode, const Vocab& vocab, Granularity granularity);

// Image texts for a source without needing a vocabulary.
std::vector<std::string> source_image_texts(std::string_view source, SegmentMode mode, Granularity granularity);

struct CacheStats {
  std::size_t requested = 0;  // distinct normalized texts
  std::size_t hits = 0;
  std::size_t misses = 0;

  double hit_rate() const { return requested ? static_cast<double>(hits) / static_cast<double>(requested) : 1.0; }
};

// Shape and seed knobs shared by every request of a run.
AugmentRequest augment_template(const RunConfig& cfg);

// Augments every text not yet cached, in request order, and stores the results.
CacheStats fill_cache(EmbeddingCache& cache, Augmenter& augmenter, const std::vector<std::string>& texts,
                      const AugmentRequest& knobs);

std::vector<double> source_gammas(const PreparedSource& src, const EmbeddingCache& cache);

// Model input for one source; only gated images are copied in.
Seq2SeqInput make_input(const PreparedSource& src, const EmbeddingCache& cache, const GateConfig& gate);

// Shared state of one CLI command: config, vocabulary, cache and augmenter.
class Workspace {
 public:
  explicit Workspace(RunConfig cfg);

  const RunConfig& config() const { return cfg_; }
  RunConfig& config() { return cfg_; }

  EmbeddingCache& cache();
  Augmenter& augmenter();
  void save_cache();

  // Loads <run-dir>/vocab.txt, or builds it from the training set and saves it.
  const Vocab& vocab();

  CacheStats ensure_images(const std::vector<Record>& records);

  std::vector<Seq2SeqInput> inputs(const std::vector<Record>& records, bool with_targets);

  // Model config with vocab_size pinned to the vocabulary.
  ModelConfig model_config();

  Seq2Seq<float> new_model();
  Seq2Seq<float> load_model(const std::string& path);

  std::vector<std::string> generate(const Seq2Seq<float>& model, const std::vector<Record>& records);

 private:
  RunConfig cfg_;
  std::unique_ptr<EmbeddingCache> cache_;
  std::unique_ptr<Augmenter> augmenter_;
  std::unique_ptr<Vocab> vocab_;
};

std::string run_path(const RunConfig& cfg, const std::string& name);

CacheStats run_prepare(Workspace& ws, std::ostream& out);
std::vector<double> run_pretrain(Workspace& ws, std::ostream& out);
FinetuneResult run_finetune(Workspace& ws, std::ostream& out);
std::vector<std::string> run_generate(Workspace& ws, std::ostream& out);
EvalReport run_evaluate(Workspace& ws, std::ostream& out);

struct SweepRow {
  double theta = 0.0;
  double gated_fraction = 0.0;
  std::map<std::string, double> scores;  // filled when a checkpoint is given
};
std::vector<SweepRow> run_sweep_theta(Workspace& ws, std::ostream& out);

struct FewshotRow {
  double fraction = 0.0;
  std::vector<std::size_t> subset_sizes;  // one per group
  std::map<std::string, double> mean_scores;
};
std::vector<FewshotRow> run_fewshot(Workspace& ws, std::ostream& out);

// Writes the metric table in metric_order().
void print_report(const EvalReport& report, std::ostream& out);
std::string report_json(const EvalReport& report, const RunConfig& cfg);

}  // namespace live
