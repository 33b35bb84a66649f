#include "live/cli.hpp"

#include "live/error.hpp"
#include "live/pipeline.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>

namespace live {

namespace {

using Command = std::function<void(Workspace&, std::ostream&)>;

const std::vector<std::pair<std::string, Command>>& commands() {
  static const std::vector<std::pair<std::string, Command>> table = {
      {"prepare", [](Workspace& ws, std::ostream& o) { run_prepare(ws, o); }},
      {"pretrain", [](Workspace& ws, std::ostream& o) { run_pretrain(ws, o); }},
      {"finetune", [](Workspace& ws, std::ostream& o) { run_finetune(ws, o); }},
      {"generate", [](Workspace& ws, std::ostream& o) { run_generate(ws, o); }},
      {"evaluate", [](Workspace& ws, std::ostream& o) { run_evaluate(ws, o); }},
      {"sweep-theta", [](Workspace& ws, std::ostream& o) { run_sweep_theta(ws, o); }},
      {"fewshot", [](Workspace& ws, std::ostream& o) { run_fewshot(ws, o); }},
  };
  return table;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Visually-augmented text generation: prepare, train, decode and evaluate", "live"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  app.add_option("--config", config_file, "key = value settings file; flags override it");

  // Flags mirror config keys one to one; values are parsed by the config table.
  std::map<std::string, std::optional<std::string>> flags;
  for (const auto& key : config_keys()) {
    auto& slot = flags[key.name];
    std::string names = "--" + key.name;
    if (key.name == "fractions") names += ",--fraction";
    app.add_option_function<std::string>(names, [&slot](const std::string& v) { slot = v; }, key.help);
  }

  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, _] : commands()) subs[name] = app.add_subcommand(name);
  subs["prepare"]->description("segment the corpora and fill the image cache");
  subs["pretrain"]->description("fusion-only denoising pretraining with a frozen backbone");
  subs["finetune"]->description("train every parameter on source/target pairs");
  subs["generate"]->description("decode the test sources");
  subs["evaluate"]->description("score generations against test references");
  subs["sweep-theta"]->description("gated fraction (and metrics with --checkpoint) across a theta grid");
  subs["fewshot"]->description("seeded few-shot runs at each training fraction");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::string command;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) command = name;

  std::optional<Workspace> ws;
  try {
    RunConfig cfg;
    if (!config_file.empty())
      for (const auto& [k, v] : read_config_file(config_file)) apply_setting(cfg, k, v);
    for (const auto& key : config_keys())
      if (const auto& v = flags[key.name]) apply_setting(cfg, key.name, *v);
    ws.emplace(std::move(cfg));
  } catch (const std::exception& e) {
    err << command << ": config: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    for (const auto& [name, run] : commands())
      if (name == command) run(*ws, out);
  } catch (const std::exception& e) {
    err << command << ": " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace live
