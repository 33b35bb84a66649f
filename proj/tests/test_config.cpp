#include "live/config.hpp"
#include "live/error.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace live;

namespace {

std::string temp_file(const std::string& name, const std::string& body) {
  const auto path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream(path) << body;
  return path;
}

}  // namespace

TEST(Config, Defaults) {
  RunConfig c;
  EXPECT_DOUBLE_EQ(c.gate.theta, 0.27);
  EXPECT_EQ(c.patch_count, 50u);
  EXPECT_EQ(c.model.vision_dim, 768u);
  EXPECT_DOUBLE_EQ(c.pretrain.mask_ratio, 0.5);
  EXPECT_DOUBLE_EQ(c.pretrain.span_lambda, 3.5);
  EXPECT_DOUBLE_EQ(c.finetune.smoothing, 0.1);
  EXPECT_EQ(c.diffusion_steps, 25u);
  EXPECT_NO_THROW(validate_config(c));
}

TEST(Config, ApplySetting) {
  RunConfig c;
  apply_setting(c, "theta", "0.5");
  apply_setting(c, "granularity", "word");
  apply_setting(c, "fusion-layers", "0, 1");
  apply_setting(c, "fusion-strategy", "self_attention_concat");
  apply_setting(c, "length-normalize", "true");
  apply_setting(c, "fractions", "0.01,0.1");
  EXPECT_DOUBLE_EQ(c.gate.theta, 0.5);
  EXPECT_EQ(c.gate.granularity, Granularity::word);
  EXPECT_EQ(c.model.fusion_layers, (std::vector<int>{0, 1}));
  EXPECT_EQ(c.model.fusion_strategy, FusionStrategy::self_attention_concat);
  EXPECT_TRUE(c.decode.length_normalize);
  EXPECT_EQ(c.fewshot_fractions, (std::vector<double>{0.01, 0.1}));
  EXPECT_THROW(apply_setting(c, "no-such-key", "1"), Error);
  EXPECT_THROW(apply_setting(c, "epochs", "-3"), Error);
  EXPECT_THROW(apply_setting(c, "theta", "abc"), Error);
  EXPECT_THROW(apply_setting(c, "granularity", "paragraph"), Error);
}

TEST(Config, FileThenOverride) {
  const auto path = temp_file("live_cfg_test.conf", "# comment\nseed = 7\ntheta = 0.4  # trailing\n\nbeam-size=3\n");
  RunConfig c;
  for (const auto& [k, v] : read_config_file(path)) apply_setting(c, k, v);
  apply_setting(c, "theta", "0.6");
  std::filesystem::remove(path);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.decode.beam_size, 3u);
  EXPECT_DOUBLE_EQ(c.gate.theta, 0.6);

  const auto bad = temp_file("live_cfg_bad.conf", "seed 7\n");
  EXPECT_THROW(read_config_file(bad), Error);
  std::filesystem::remove(bad);
}

TEST(Config, SnapshotRoundTrip) {
  RunConfig a;
  apply_setting(a, "theta", "0.123456789");
  apply_setting(a, "scope", "all_tokens");
  apply_setting(a, "fusion-norm", "post");
  apply_setting(a, "seed", "18446744073709551615");
  const auto snap = config_snapshot(a);
  const auto path = temp_file("live_cfg_snap.conf", snap);
  RunConfig b;
  for (const auto& [k, v] : read_config_file(path)) apply_setting(b, k, v);
  std::filesystem::remove(path);
  EXPECT_EQ(config_snapshot(b), snap);
  for (const auto& k : config_keys()) EXPECT_NE(snap.find(k.name + " = "), std::string::npos) << k.name;
}

TEST(Config, StageSeedsDifferByLabel) {
  RunConfig c;
  EXPECT_NE(c.stage_seed("augment"), c.stage_seed("decode"));
  RunConfig d;
  d.seed = 1;
  EXPECT_NE(c.stage_seed("augment"), d.stage_seed("augment"));
}

TEST(Config, ValidationErrors) {
  auto invalid = [](auto mutate) {
    RunConfig c;
    mutate(c);
    EXPECT_THROW(validate_config(c), Error);
  };
  invalid([](RunConfig& c) { c.gate.theta = 1.5; });
  invalid([](RunConfig& c) { c.gate.scope = GateScope::nouns_only; });
  invalid([](RunConfig& c) { c.patch_count = 0; });
  invalid([](RunConfig& c) { c.fewshot_fractions = {0.0}; });
  invalid([](RunConfig& c) { c.theta_grid = {-0.1}; });
  invalid([](RunConfig& c) { c.train_path = "/nonexistent/train.jsonl"; });
  invalid([](RunConfig& c) {
    c.backend = BackendKind::noise;
    c.gamma_fixture = "x.json";
  });
  invalid([](RunConfig& c) { c.model.heads = 3; });
  invalid([](RunConfig& c) { c.decode.top_p = 1.5; });
}
