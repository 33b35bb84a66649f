#include "live/pipeline.hpp"

#include "live/checkpoint.hpp"
#include "live/digest.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>

namespace live {

namespace fs = std::filesystem;

PreparedSource prepare_source(std::string_view source, SegmentMode mode, const Vocab& vocab, Granularity granularity) {
  PreparedSource p;
  p.doc = segment_text(source, mode);
  p.tokens = tokenize(p.doc, vocab);
  p.image_texts = image_texts(p.doc, p.tokens, granularity);
  return p;
}

std::vector<std::string> source_image_texts(std::string_view source, SegmentMode mode, Granularity granularity) {
  // Word pieces do not depend on the vocabulary, so an empty one suffices.
  static const Vocab reserved_only;
  return prepare_source(source, mode, reserved_only, granularity).image_texts;
}

AugmentRequest augment_template(const RunConfig& cfg) {
  AugmentRequest r;
  r.steps = cfg.diffusion_steps;
  r.seed = cfg.stage_seed("augment");
  r.patch_count = cfg.patch_count;
  r.dim = cfg.model.vision_dim;
  return r;
}

CacheStats fill_cache(EmbeddingCache& cache, Augmenter& augmenter, const std::vector<std::string>& texts,
                      const AugmentRequest& knobs) {
  CacheStats stats;
  std::set<Digest> seen;
  std::vector<AugmentRequest> misses;
  std::vector<Digest> keys;
  for (const auto& text : texts) {
    const Digest key = sentence_key(text);
    if (!seen.insert(key).second) continue;
    ++stats.requested;
    if (cache.lookup(key)) {
      ++stats.hits;
      continue;
    }
    AugmentRequest r = knobs;
    r.sentence = text;
    misses.push_back(std::move(r));
    keys.push_back(key);
  }
  stats.misses = misses.size();
  if (misses.empty()) return stats;
  auto results = augmenter.augment_batch(misses);
  for (std::size_t i = 0; i < results.size(); ++i)
    cache.store({keys[i], static_cast<float>(results[i].gamma), std::move(results[i].patches)});
  return stats;
}

std::vector<double> source_gammas(const PreparedSource& src, const EmbeddingCache& cache) {
  std::vector<double> g;
  for (const auto& text : src.image_texts) {
    auto e = cache.lookup(text);
    if (!e) throw Error(ErrorCode::EmbeddingCountMismatch, "no cached image for '" + text + "'; run prepare first");
    g.push_back(e->gamma);
  }
  return g;
}

Seq2SeqInput make_input(const PreparedSource& src, const EmbeddingCache& cache, const GateConfig& gate) {
  Seq2SeqInput in;
  in.src = src.tokens.ids;
  const auto gammas = source_gammas(src, cache);
  in.assign = build_fusion_assignment(src.doc, src.tokens, gammas, gate);
  in.images.resize(src.image_texts.size());
  for (int k : in.assign.used_images())
    in.images[static_cast<std::size_t>(k)] = cache.lookup(src.image_texts[static_cast<std::size_t>(k)])->patches;
  return in;
}

std::string run_path(const RunConfig& cfg, const std::string& name) { return (fs::path(cfg.run_dir) / name).string(); }

Workspace::Workspace(RunConfig cfg) : cfg_(std::move(cfg)) {
  if (!cfg_.noun_lexicon.empty()) cfg_.gate.noun_lexicon = load_noun_lexicon(cfg_.noun_lexicon);
  validate_config(cfg_);
}

EmbeddingCache& Workspace::cache() {
  if (!cache_) {
    if (!cfg_.cache_path.empty() && fs::exists(cfg_.cache_path)) {
      cache_ = std::make_unique<EmbeddingCache>(EmbeddingCache::load(cfg_.cache_path));
      if (cache_->p() != cfg_.patch_count || cache_->d() != cfg_.model.vision_dim)
        throw Error(ErrorCode::ShapeMismatch, "cache " + cfg_.cache_path + " holds " + std::to_string(cache_->p()) + "x" +
                                                  std::to_string(cache_->d()) + " patches, config wants " +
                                                  std::to_string(cfg_.patch_count) + "x" +
                                                  std::to_string(cfg_.model.vision_dim));
    } else {
      cache_ = std::make_unique<EmbeddingCache>(cfg_.patch_count, cfg_.model.vision_dim);
    }
  }
  return *cache_;
}

Augmenter& Workspace::augmenter() {
  if (!augmenter_) {
    RemoteOptions remote;
    remote.url = cfg_.sidecar_url;
    augmenter_ = make_augmenter(cfg_.backend, cfg_.gamma_fixture, remote);
  }
  return *augmenter_;
}

void Workspace::save_cache() {
  if (!cfg_.cache_path.empty()) cache().persist(cfg_.cache_path);
}

const Vocab& Workspace::vocab() {
  if (vocab_) return *vocab_;
  const std::string path = run_path(cfg_, "vocab.txt");
  if (fs::exists(path)) {
    vocab_ = std::make_unique<Vocab>(Vocab::load(path));
    return *vocab_;
  }
  if (cfg_.train_path.empty()) throw Error(ErrorCode::InvalidArgument, "no vocabulary in run-dir and no --train to build one");
  std::vector<std::string> corpus;
  for (const auto& r : load_dataset(cfg_.train_path)) {
    corpus.push_back(r.source);
    if (!r.target.empty()) corpus.push_back(r.target);
  }
  vocab_ = std::make_unique<Vocab>(build_vocab(corpus, cfg_.model.vocab_size));
  fs::create_directories(cfg_.run_dir);
  vocab_->save(path);
  return *vocab_;
}

CacheStats Workspace::ensure_images(const std::vector<Record>& records) {
  std::vector<std::string> texts;
  for (const auto& r : records) {
    auto t = source_image_texts(r.source, cfg_.segment_mode, cfg_.gate.granularity);
    texts.insert(texts.end(), t.begin(), t.end());
  }
  return fill_cache(cache(), augmenter(), texts, augment_template(cfg_));
}

std::vector<Seq2SeqInput> Workspace::inputs(const std::vector<Record>& records, bool with_targets) {
  const auto& v = vocab();
  ensure_images(records);
  std::vector<Seq2SeqInput> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    auto in = make_input(prepare_source(r.source, cfg_.segment_mode, v, cfg_.gate.granularity), cache(), cfg_.gate);
    if (with_targets) set_target(in, encode(r.target, v));
    out.push_back(std::move(in));
  }
  return out;
}

ModelConfig Workspace::model_config() {
  ModelConfig m = cfg_.model;
  m.vocab_size = vocab().size();
  m.theta = cfg_.gate.theta;
  return m;
}

Seq2Seq<float> Workspace::new_model() { return Seq2Seq<float>(model_config(), cfg_.stage_seed("model-init")); }

Seq2Seq<float> Workspace::load_model(const std::string& path) {
  return Seq2Seq<float>(model_config(), load_checkpoint(path));
}

std::vector<std::string> Workspace::generate(const Seq2Seq<float>& model, const std::vector<Record>& records) {
  const auto ins = inputs(records, false);
  std::vector<std::string> out;
  const std::uint64_t base = cfg_.stage_seed("decode");
  for (std::size_t i = 0; i < ins.size(); ++i) {
    DecodeConfig dc = cfg_.decode;
    dc.seed = derive_seed(base, std::to_string(i));
    out.push_back(decode(live::generate(model, ins[i], dc), vocab()));
  }
  return out;
}

namespace {

void write_snapshot(const RunConfig& cfg, const std::string& stage) {
  fs::create_directories(cfg.run_dir);
  std::ofstream out(run_path(cfg, stage + ".config.txt"));
  out << config_snapshot(cfg);
}

std::vector<Record> require_dataset(const std::string& path, const char* flag) {
  if (path.empty()) throw Error(ErrorCode::InvalidArgument, std::string("missing --") + flag);
  return load_dataset(path);
}

EvalReport score(const std::vector<std::string>& hyps, const std::vector<Record>& records, bool group) {
  if (hyps.size() != records.size())
    throw Error(ErrorCode::InvalidArgument, std::to_string(hyps.size()) + " hypotheses for " +
                                                std::to_string(records.size()) + " records");
  return evaluate_corpus(hyps, reference_lists(records, group));
}

}  // namespace

CacheStats run_prepare(Workspace& ws, std::ostream& out) {
  const auto& cfg = ws.config();
  if (cfg.cache_path.empty()) throw Error(ErrorCode::InvalidArgument, "prepare needs --cache");
  std::vector<Record> all;
  for (const auto* path : {&cfg.train_path, &cfg.valid_path, &cfg.test_path}) {
    if (path->empty()) continue;
    auto recs = load_dataset(*path);
    all.insert(all.end(), recs.begin(), recs.end());
  }
  if (all.empty()) throw Error(ErrorCode::InvalidArgument, "prepare needs at least one of --train/--valid/--test");
  const CacheStats stats = ws.ensure_images(all);
  ws.save_cache();
  out << "prepare: " << stats.requested << " texts, " << stats.hits << " cache hits (" << std::fixed
      << std::setprecision(1) << 100.0 * stats.hit_rate() << "%), " << stats.misses << " augmented\n";
  out << "prepare: cache " << cfg.cache_path << " holds " << ws.cache().size() << " entries\n";
  return stats;
}

std::vector<double> run_pretrain(Workspace& ws, std::ostream& out) {
  auto& cfg = ws.config();
  const auto records = require_dataset(cfg.train_path, "train");
  write_snapshot(cfg, "pretrain");
  auto model = cfg.checkpoint.empty() ? ws.new_model() : ws.load_model(cfg.checkpoint);

  // Captions are their own recovery targets.
  auto data = ws.inputs(records, false);
  for (auto& in : data) set_target(in, in.src);
  ws.save_cache();

  PretrainConfig pc = cfg.pretrain;
  pc.seed = cfg.stage_seed("pretrain");
  std::ofstream log(run_path(cfg, "pretrain.log"));
  const auto losses = pretrain(model, data, pc, &log);
  save_checkpoint(model.params(), run_path(cfg, "pretrain.ckpt"));
  out << "pretrain: " << losses.size() << " steps, loss " << std::setprecision(6) << losses.front() << " -> "
      << losses.back() << "\n";
  out << "pretrain: wrote " << run_path(cfg, "pretrain.ckpt") << "\n";
  return losses;
}

FinetuneResult run_finetune(Workspace& ws, std::ostream& out) {
  auto& cfg = ws.config();
  const auto records = require_dataset(cfg.train_path, "train");
  write_snapshot(cfg, "finetune");
  auto model = cfg.checkpoint.empty() ? ws.new_model() : ws.load_model(cfg.checkpoint);
  const auto train = ws.inputs(records, true);

  Validator validate;
  std::vector<Record> valid;
  std::vector<Seq2SeqInput> valid_inputs;
  if (!cfg.valid_path.empty()) {
    valid = load_dataset(cfg.valid_path);
    valid_inputs = ws.inputs(valid, true);
    if (cfg.finetune.validation_metric == "token_acc") {
      validate = [&](const Seq2Seq<float>& m) { return teacher_forced_accuracy(m, valid_inputs); };
    } else {
      const auto refs = reference_lists(valid, cfg.group_references);
      validate = [&, refs](const Seq2Seq<float>& m) {
        return metric_by_name(cfg.finetune.validation_metric, ws.generate(m, valid), refs);
      };
    }
  }
  ws.save_cache();

  FinetuneConfig fc = cfg.finetune;
  fc.seed = cfg.stage_seed("finetune");
  std::ofstream log(run_path(cfg, "finetune.log"));
  auto res = finetune(model, train, fc, validate, &log, [&](std::size_t epoch, const Seq2Seq<float>& m) {
    save_checkpoint(m.params(), run_path(cfg, "epoch_" + std::to_string(epoch + 1) + ".ckpt"));
  });
  save_checkpoint(res.best_params, run_path(cfg, "best.ckpt"));
  for (std::size_t e = 0; e < res.epoch_losses.size(); ++e)
    out << "finetune: epoch " << e + 1 << " loss " << std::setprecision(6) << res.epoch_losses[e] << " "
        << (validate ? cfg.finetune.validation_metric : std::string("-loss")) << " " << res.epoch_metrics[e] << "\n";
  out << "finetune: best epoch " << res.best_epoch + 1 << " -> " << run_path(cfg, "best.ckpt") << "\n";
  return res;
}

std::vector<std::string> run_generate(Workspace& ws, std::ostream& out) {
  auto& cfg = ws.config();
  const auto records = require_dataset(cfg.test_path, "test");
  const std::string ckpt = cfg.checkpoint.empty() ? run_path(cfg, "best.ckpt") : cfg.checkpoint;
  const auto model = ws.load_model(ckpt);
  auto texts = ws.generate(model, records);
  ws.save_cache();
  const std::string dest = cfg.output.empty() ? run_path(cfg, "generations.txt") : cfg.output;
  if (auto parent = fs::path(dest).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_lines(texts, dest);
  out << "generate: " << texts.size() << " outputs -> " << dest << "\n";
  return texts;
}

void print_report(const EvalReport& report, std::ostream& out) {
  out << std::left << std::setw(12) << "metric" << "score(x100)\n";
  for (const auto& name : metric_order())
    out << std::left << std::setw(12) << name << std::fixed << std::setprecision(2) << 100.0 * report.scores.at(name)
        << "\n";
  out << "n = " << report.corpus_size << "; ROUGE aggregation: " << report.rouge_aggregation << "\n";
}

std::string report_json(const EvalReport& report, const RunConfig& cfg) {
  nlohmann::ordered_json j;
  for (const auto& name : metric_order()) j["scores"][name] = report.scores.at(name);
  j["corpus_size"] = report.corpus_size;
  j["rouge_aggregation"] = report.rouge_aggregation;
  j["config"] = {{"theta", cfg.gate.theta},
                 {"fusion_strategy", to_string(cfg.model.fusion_strategy)},
                 {"granularity", to_string(cfg.gate.granularity)},
                 {"backend", to_string(cfg.backend)},
                 {"seed", cfg.seed}};
  return j.dump();
}

EvalReport run_evaluate(Workspace& ws, std::ostream& out) {
  auto& cfg = ws.config();
  const auto records = require_dataset(cfg.test_path, "test");
  const std::string hyp_path = cfg.hypotheses.empty() ? run_path(cfg, "generations.txt") : cfg.hypotheses;
  auto report = score(read_lines(hyp_path), records, cfg.group_references);
  print_report(report, out);
  if (!cfg.report.empty()) {
    std::ofstream rep(cfg.report, std::ios::app);
    if (!rep) throw Error(ErrorCode::IoError, "cannot append to " + cfg.report);
    rep << report_json(report, cfg) << "\n";
  }
  return report;
}

std::vector<SweepRow> run_sweep_theta(Workspace& ws, std::ostream& out) {
  auto& cfg = ws.config();
  const std::string& path = !cfg.test_path.empty() ? cfg.test_path : cfg.train_path;
  const auto records = require_dataset(path, "test");
  std::vector<double> grid = cfg.theta_grid;
  if (grid.empty())
    for (int i = 0; i < 20; ++i) grid.push_back(static_cast<double>(i) / 19.0);

  ws.ensure_images(records);
  ws.save_cache();
  std::vector<double> gammas;
  for (const auto& r : records)
    for (const auto& text : source_image_texts(r.source, cfg.segment_mode, cfg.gate.granularity))
      gammas.push_back(ws.cache().lookup(text)->gamma);

  std::optional<Seq2Seq<float>> model;
  if (!cfg.checkpoint.empty()) model.emplace(ws.load_model(cfg.checkpoint));

  std::vector<SweepRow> rows;
  out << "theta      gated_fraction" << (model ? "  bleu4   rougeL" : "") << "\n";
  for (double theta : grid) {
    SweepRow row{theta, gated_fraction(gammas, theta), {}};
    if (model) {
      cfg.gate.theta = theta;
      row.scores = score(ws.generate(*model, records), records, cfg.group_references).scores;
    }
    out << std::fixed << std::setprecision(4) << std::setw(8) << theta << "   " << std::setw(8) << row.gated_fraction;
    if (model) out << "  " << std::setprecision(2) << 100 * row.scores["bleu4"] << "  " << 100 * row.scores["rougeL"];
    out << "\n";
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<FewshotRow> run_fewshot(Workspace& ws, std::ostream& out) {
  auto& cfg = ws.config();
  const auto train_records = require_dataset(cfg.train_path, "train");
  const auto test_records = require_dataset(cfg.test_path, "test");
  const auto train = ws.inputs(train_records, true);
  ws.ensure_images(test_records);
  ws.save_cache();
  const auto seeds = few_shot_seeds(cfg.stage_seed("fewshot"), cfg.fewshot_groups);

  std::vector<FewshotRow> rows;
  for (double fraction : cfg.fewshot_fractions) {
    FewshotRow row;
    row.fraction = fraction;
    for (std::size_t g = 0; g < seeds.size(); ++g) {
      const auto subset_idx = few_shot_split(train.size(), fraction, seeds[g]);
      std::vector<Seq2SeqInput> subset;
      for (auto i : subset_idx) subset.push_back(train[i]);
      row.subset_sizes.push_back(subset.size());
      auto model = cfg.checkpoint.empty() ? Seq2Seq<float>(ws.model_config(), derive_seed(seeds[g], "model-init"))
                                          : ws.load_model(cfg.checkpoint);
      FinetuneConfig fc = cfg.finetune;
      fc.seed = derive_seed(seeds[g], "finetune");
      auto res = finetune(model, subset, fc, {});
      Seq2Seq<float> best(ws.model_config(), res.best_params);
      const auto report = score(ws.generate(best, test_records), test_records, cfg.group_references);
      for (const auto& [k, v] : report.scores) row.mean_scores[k] += v / static_cast<double>(seeds.size());
      out << "fewshot: fraction " << fraction << " group " << g + 1 << " on " << subset.size() << " examples: bleu4 "
          << std::fixed << std::setprecision(2) << 100 * report.scores.at("bleu4") << "\n";
      out.unsetf(std::ios::fixed);
    }
    out << "fewshot: fraction " << fraction << " mean over " << seeds.size() << " runs:";
    for (const auto& name : metric_order())
      out << " " << name << "=" << std::fixed << std::setprecision(2) << 100 * row.mean_scores[name];
    out << "\n";
    out.unsetf(std::ios::fixed);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace live
