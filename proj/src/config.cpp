#include "live/config.hpp"

#include "live/digest.hpp"
#include "live/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace live {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

[[noreturn]] void bad_value(const std::string& v, const char* what) {
  throw Error(ErrorCode::InvalidArgument, "expected " + std::string(what) + ", got '" + v + "'");
}

double to_double(const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) bad_value(v, "a number");
    return d;
  } catch (const std::logic_error&) {
    bad_value(v, "a number");
  }
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(v, "a non-negative integer");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(v, "a boolean");
}

template <typename T, typename F>
std::vector<T> to_list(const std::string& v, F parse) {
  std::vector<T> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse(item));
  }
  return out;
}

std::string fmt(double d) {
  std::ostringstream s;
  s.precision(17);
  s << d;
  return s.str();
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F show) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + show(xs[i]);
  return out;
}

std::vector<ConfigKey> make_keys() {
  std::vector<ConfigKey> k;
  auto num = [&](std::string name, std::string help, auto member) {
    k.push_back({std::move(name), std::move(help),
                 [member](RunConfig& c, const std::string& v) {
                   auto& ref = member(c);
                   using T = std::decay_t<decltype(ref)>;
                   if constexpr (std::is_same_v<T, double>) ref = to_double(v);
                   else if constexpr (std::is_same_v<T, bool>) ref = to_bool(v);
                   else ref = static_cast<T>(to_u64(v));
                 },
                 [member](const RunConfig& c) {
                   auto& ref = member(const_cast<RunConfig&>(c));
                   using T = std::decay_t<decltype(ref)>;
                   if constexpr (std::is_same_v<T, double>) return fmt(ref);
                   else if constexpr (std::is_same_v<T, bool>) return std::string(ref ? "true" : "false");
                   else return std::to_string(ref);
                 }});
  };
  auto str = [&](std::string name, std::string help, auto member) {
    k.push_back({std::move(name), std::move(help), [member](RunConfig& c, const std::string& v) { member(c) = v; },
                 [member](const RunConfig& c) { return member(const_cast<RunConfig&>(c)); }});
  };
  auto custom = [&](std::string name, std::string help, std::function<void(RunConfig&, const std::string&)> set,
                    std::function<std::string(const RunConfig&)> get) {
    k.push_back({std::move(name), std::move(help), std::move(set), std::move(get)});
  };

  num("seed", "master seed; stage seeds derive from it", [](RunConfig& c) -> auto& { return c.seed; });
  custom("segment-mode", "prose | e2e_mr",
         [](RunConfig& c, const std::string& v) {
           if (v == "prose") c.segment_mode = SegmentMode::prose;
           else if (v == "e2e_mr") c.segment_mode = SegmentMode::e2e_mr;
           else bad_value(v, "prose or e2e_mr");
         },
         [](const RunConfig& c) { return std::string(c.segment_mode == SegmentMode::prose ? "prose" : "e2e_mr"); });

  // gating
  custom("theta", "visuality threshold; gamma >= theta gates in",
         [](RunConfig& c, const std::string& v) { c.gate.theta = c.model.theta = to_double(v); },
         [](const RunConfig& c) { return fmt(c.gate.theta); });
  custom("granularity", "doc | sent | word",
         [](RunConfig& c, const std::string& v) { c.gate.granularity = parse_granularity(v); },
         [](const RunConfig& c) { return to_string(c.gate.granularity); });
  custom("scope", "all_tokens | nouns_only", [](RunConfig& c, const std::string& v) { c.gate.scope = parse_scope(v); },
         [](const RunConfig& c) { return to_string(c.gate.scope); });
  str("noun-lexicon", "noun list for nouns_only scope", [](RunConfig& c) -> auto& { return c.noun_lexicon; });

  // model
  num("vocab-size", "maximum vocabulary size", [](RunConfig& c) -> auto& { return c.model.vocab_size; });
  num("model-dim", "model width", [](RunConfig& c) -> auto& { return c.model.model_dim; });
  num("heads", "attention heads", [](RunConfig& c) -> auto& { return c.model.heads; });
  num("encoder-layers", "encoder layers", [](RunConfig& c) -> auto& { return c.model.encoder_layers; });
  num("decoder-layers", "decoder layers", [](RunConfig& c) -> auto& { return c.model.decoder_layers; });
  num("ffn-dim", "feed-forward width", [](RunConfig& c) -> auto& { return c.model.ffn_dim; });
  custom("fusion-strategy", "cross_attention | concat_encoder_output | self_attention_concat | none",
         [](RunConfig& c, const std::string& v) { c.model.fusion_strategy = parse_fusion_strategy(v); },
         [](const RunConfig& c) { return to_string(c.model.fusion_strategy); });
  custom("fusion-layers", "comma-separated encoder layer indices; empty = all",
         [](RunConfig& c, const std::string& v) {
           c.model.fusion_layers = to_list<int>(v, [](const std::string& s) { return static_cast<int>(to_u64(s)); });
         },
         [](const RunConfig& c) { return join(c.model.fusion_layers, [](int l) { return std::to_string(l); }); });
  custom("fusion-norm", "pre | post", [](RunConfig& c, const std::string& v) { c.model.fusion_norm = parse_fusion_norm(v); },
         [](const RunConfig& c) { return to_string(c.model.fusion_norm); });
  num("max-len", "maximum sequence length", [](RunConfig& c) -> auto& { return c.model.max_len; });
  num("vision-dim", "raw patch width d", [](RunConfig& c) -> auto& { return c.model.vision_dim; });
  num("patch-count", "patch rows p per image", [](RunConfig& c) -> auto& { return c.patch_count; });
  num("projection-hidden", "projection MLP width; 0 = 2 * model-dim",
      [](RunConfig& c) -> auto& { return c.model.projection_hidden; });
  num("zero-init-fusion-output", "start fusion output projections at zero",
      [](RunConfig& c) -> auto& { return c.model.zero_init_fusion_output; });

  // pretraining
  num("mask-ratio", "share of caption tokens to mask", [](RunConfig& c) -> auto& { return c.pretrain.mask_ratio; });
  num("span-lambda", "Poisson mean of masked span lengths", [](RunConfig& c) -> auto& { return c.pretrain.span_lambda; });
  num("pretrain-batch-size", "pretraining batch size", [](RunConfig& c) -> auto& { return c.pretrain.batch_size; });
  num("pretrain-steps", "pretraining steps", [](RunConfig& c) -> auto& { return c.pretrain.steps; });
  num("pretrain-lr", "pretraining learning rate", [](RunConfig& c) -> auto& { return c.pretrain.learning_rate; });
  num("pretrain-momentum", "pretraining momentum", [](RunConfig& c) -> auto& { return c.pretrain.momentum; });
  num("pretrain-grad-clip", "pretraining gradient norm clip; 0 = off",
      [](RunConfig& c) -> auto& { return c.pretrain.max_grad_norm; });

  // fine-tuning
  num("batch-size", "fine-tuning batch size", [](RunConfig& c) -> auto& { return c.finetune.batch_size; });
  num("epochs", "fine-tuning epochs", [](RunConfig& c) -> auto& { return c.finetune.epochs; });
  num("lr", "fine-tuning learning rate", [](RunConfig& c) -> auto& { return c.finetune.learning_rate; });
  num("momentum", "fine-tuning momentum", [](RunConfig& c) -> auto& { return c.finetune.momentum; });
  num("grad-clip", "fine-tuning gradient norm clip; 0 = off", [](RunConfig& c) -> auto& { return c.finetune.max_grad_norm; });
  num("smoothing", "label smoothing", [](RunConfig& c) -> auto& { return c.finetune.smoothing; });
  str("validation-metric", "checkpoint selection metric (bleu1..4, rouge1/2/L, token_acc)",
      [](RunConfig& c) -> auto& { return c.finetune.validation_metric; });

  // decoding
  custom("decode-mode", "beam | nucleus", [](RunConfig& c, const std::string& v) { c.decode.mode = parse_decode_mode(v); },
         [](const RunConfig& c) { return std::string(c.decode.mode == DecodeMode::beam ? "beam" : "nucleus"); });
  num("beam-size", "beam width", [](RunConfig& c) -> auto& { return c.decode.beam_size; });
  num("top-p", "nucleus mass", [](RunConfig& c) -> auto& { return c.decode.top_p; });
  num("temperature", "sampling temperature", [](RunConfig& c) -> auto& { return c.decode.temperature; });
  num("decode-max-len", "maximum generated tokens", [](RunConfig& c) -> auto& { return c.decode.max_len; });
  num("length-normalize", "divide beam scores by length", [](RunConfig& c) -> auto& { return c.decode.length_normalize; });

  // augmentation
  custom("backend", "mock | remote | noise", [](RunConfig& c, const std::string& v) { c.backend = parse_backend(v); },
         [](const RunConfig& c) { return to_string(c.backend); });
  str("gamma-fixture", "JSON sentence -> gamma overrides for the mock backend",
      [](RunConfig& c) -> auto& { return c.gamma_fixture; });
  str("sidecar-url", "augmentation sidecar base URL", [](RunConfig& c) -> auto& { return c.sidecar_url; });
  num("diffusion-steps", "synthesis steps forwarded to the sidecar", [](RunConfig& c) -> auto& { return c.diffusion_steps; });

  // paths
  str("train", "training JSONL", [](RunConfig& c) -> auto& { return c.train_path; });
  str("valid", "validation JSONL", [](RunConfig& c) -> auto& { return c.valid_path; });
  str("test", "test JSONL", [](RunConfig& c) -> auto& { return c.test_path; });
  str("cache", "LIVC embedding cache", [](RunConfig& c) -> auto& { return c.cache_path; });
  str("run-dir", "run directory", [](RunConfig& c) -> auto& { return c.run_dir; });
  str("checkpoint", "checkpoint to start from or decode with", [](RunConfig& c) -> auto& { return c.checkpoint; });
  str("output", "generation output file", [](RunConfig& c) -> auto& { return c.output; });
  str("hypotheses", "generated texts to evaluate", [](RunConfig& c) -> auto& { return c.hypotheses; });
  str("report", "file receiving one JSON report line per run", [](RunConfig& c) -> auto& { return c.report; });

  // analyses
  custom("theta-grid", "comma-separated thresholds; empty = 20 points on [0, 1]",
         [](RunConfig& c, const std::string& v) { c.theta_grid = to_list<double>(v, to_double); },
         [](const RunConfig& c) { return join(c.theta_grid, fmt); });
  custom("fractions", "few-shot training fractions",
         [](RunConfig& c, const std::string& v) { c.fewshot_fractions = to_list<double>(v, to_double); },
         [](const RunConfig& c) { return join(c.fewshot_fractions, fmt); });
  num("groups", "independent few-shot groups", [](RunConfig& c) -> auto& { return c.fewshot_groups; });
  num("group-references", "pool targets sharing a source as references",
      [](RunConfig& c) -> auto& { return c.group_references; });
  return k;
}

}  // namespace

std::uint64_t RunConfig::stage_seed(const std::string& label) const { return derive_seed(seed, label); }

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = make_keys();
  return keys;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : config_keys()) {
    if (k.name != key) continue;
    try {
      k.set(cfg, trim(value));
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidArgument, key + ": " + e.what());
    }
    return;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path);
  std::vector<std::pair<std::string, std::string>> out;
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::InvalidArgument, path + ":" + std::to_string(lineno) + ": expected key = value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

std::string config_snapshot(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : config_keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

void validate_config(const RunConfig& cfg) {
  cfg.model.validate();
  cfg.gate.validate();
  cfg.pretrain.validate();
  cfg.finetune.validate();
  cfg.decode.validate();
  if (cfg.patch_count == 0) throw Error(ErrorCode::InvalidArgument, "patch-count must be positive");
  if (cfg.gate.scope == GateScope::nouns_only && cfg.noun_lexicon.empty() && cfg.gate.noun_lexicon.empty())
    throw Error(ErrorCode::InvalidArgument, "scope nouns_only requires --noun-lexicon");
  if (!cfg.gamma_fixture.empty() && cfg.backend != BackendKind::mock)
    throw Error(ErrorCode::InvalidArgument, "gamma-fixture only applies to the mock backend");
  if (cfg.fewshot_groups == 0) throw Error(ErrorCode::InvalidArgument, "groups must be positive");
  for (double f : cfg.fewshot_fractions)
    if (!(f > 0.0 && f <= 1.0)) throw Error(ErrorCode::InvalidArgument, "few-shot fractions must lie in (0, 1]");
  for (double t : cfg.theta_grid)
    if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::InvalidArgument, "theta-grid values must lie in [0, 1]");
  const std::pair<const char*, const std::string*> inputs[] = {
      {"train", &cfg.train_path},          {"valid", &cfg.valid_path},   {"test", &cfg.test_path},
      {"gamma-fixture", &cfg.gamma_fixture}, {"noun-lexicon", &cfg.noun_lexicon}, {"checkpoint", &cfg.checkpoint},
      {"hypotheses", &cfg.hypotheses}};
  for (const auto& [key, path] : inputs)
    if (!path->empty() && !std::ifstream(*path))
      throw Error(ErrorCode::InvalidArgument, std::string(key) + " file " + *path + " is not readable");
}

}  // namespace live
