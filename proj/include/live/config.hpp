#pragma once

#include "live/augmenter.hpp"
#include "live/decoding.hpp"
#include "live/gating.hpp"
#include "live/model_config.hpp"
#include "live/segmentation.hpp"
#include "live/training.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace live {

// Everything one CLI invocation needs. Keys are the kebab-case names listed
// by config_keys(); a config file holds one `key = value` per line and
// command-line flags with the same names override it.
struct RunConfig {
  GateConfig gate;
  std::string noun_lexicon;
  ModelConfig model;
  std::size_t patch_count = 50;
  PretrainConfig pretrain;
  FinetuneConfig finetune;
  DecodeConfig decode;

  BackendKind backend = BackendKind::mock;
  std::string gamma_fixture;
  std::string sidecar_url = "http://127.0.0.1:8765";
  std::uint32_t diffusion_steps = 25;

  SegmentMode segment_mode = SegmentMode::prose;
  std::uint64_t seed = 0;

  std::string train_path;
  std::string valid_path;
  std::string test_path;
  std::string cache_path;
  std::string run_dir = "run";
  std::string checkpoint;
  std::string output;
  std::string hypotheses;
  std::string report;

  std::vector<double> theta_grid;       // empty: 20 evenly spaced points on [0, 1]
  std::vector<double> fewshot_fractions = {0.001, 0.003, 0.01, 0.03};
  std::size_t fewshot_groups = 5;
  bool group_references = true;

  // Stage seeds derived from the master seed.
  std::uint64_t stage_seed(const std::string& label) const;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<ConfigKey>& config_keys();

// Throws InvalidArgument on an unknown key or unparsable value.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

// `key = value` lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

// Every key in table order, one `key = value` per line.
std::string config_snapshot(const RunConfig& cfg);

// Cross-field checks shared by every command.
void validate_config(const RunConfig& cfg);

}  // namespace live
