// Copyright 2026 The pileaff Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Talks to the library only through the C interface.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pileaff/pileaff.h"

namespace {

struct Flags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
  std::string scenario, split, method = "full", module;
  std::string retrieve, place, pick, dataset, input, output;
  std::int64_t count = -1, epochs = -1;
  std::optional<std::uint64_t> seed, scene_seed;
  int pick_index = -1;
  bool low_p_high = false;
  int verbosity = 2;
};

int exitCodeFor(pa_status s) {
  switch (s) {
    case PA_OK:
    case PA_ERR_BUFFER_TOO_SMALL: return 0;
    case PA_ERR_NUMERICAL: return 3;
    case PA_ERR_INCOMPLETE:
    case PA_ERR_SCENE_GENERATION:
    case PA_ERR_EMPTY_OBSERVATION: return 4;
    case PA_ERR_INTERNAL: return 1;
    default: return 2;  // configuration, input, format and i/o problems
  }
}

int fail(pa_status s, const std::string& context) {
  std::fprintf(stderr, "error: %s: %s (%s)\n", context.c_str(), pa_last_error(), pa_status_name(s));
  return exitCodeFor(s);
}

using CommandFn = pa_status (*)(const pa_config*, const pa_run_options*, char*, size_t, size_t*);

int run(const Flags& f, CommandFn fn, const std::string& name, const char* module) {
  pa_set_log_level(f.verbosity);
  pa_config* cfg = nullptr;
  pa_status s = f.config_path.empty() ? pa_config_default(&cfg) : pa_config_load(f.config_path.c_str(), &cfg);
  if (s != PA_OK) return fail(s, "loading config");
  std::vector<std::string> sets = f.overrides;
  if (!f.output_dir.empty()) sets.push_back("output_dir=" + f.output_dir);
  for (const std::string& a : sets) {
    s = pa_config_set(cfg, a.c_str());
    if (s != PA_OK) {
      pa_config_free(cfg);
      return fail(s, "--set " + a);
    }
  }

  pa_run_options o;
  pa_run_options_init(&o);
  auto cstr = [](const std::string& v) { return v.empty() ? nullptr : v.c_str(); };
  o.module = module ? module : cstr(f.module);
  o.scenario = cstr(f.scenario);
  o.split = cstr(f.split);
  o.method = cstr(f.method);
  o.retrieve_ckpt = cstr(f.retrieve);
  o.place_ckpt = cstr(f.place);
  o.pick_ckpt = cstr(f.pick);
  o.dataset = cstr(f.dataset);
  o.input = cstr(f.input);
  o.output = cstr(f.output);
  o.count = f.count;
  o.epochs = f.epochs;
  o.has_seed = f.seed.has_value();
  o.seed = f.seed.value_or(0);
  o.has_scene_seed = f.scene_seed.has_value();
  o.scene_seed = f.scene_seed.value_or(0);
  o.pick_index = f.pick_index;
  o.low_p_high_only = f.low_p_high ? 1 : 0;

  std::vector<char> buf(1 << 22, '\0');
  size_t len = 0;
  s = fn(cfg, &o, buf.data(), buf.size(), &len);
  pa_config_free(cfg);
  if (s != PA_OK && s != PA_ERR_BUFFER_TOO_SMALL) return fail(s, name);
  std::fputs(buf.data(), stdout);
  if (len > 0 && buf[std::min(len, buf.size() - 1) - 1] != '\n') std::fputc('\n', stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pileaff: affordance-guided retrieval from simulated garment piles"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("-c,--config", f.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--set", f.overrides, "Override a config field, e.g. --set policy.max_adapt_rounds=2");
  app.add_option("-o,--output-dir", f.output_dir, "Directory for default outputs");
  app.add_option("-v,--verbosity", f.verbosity, "0 quiet, 1 warnings, 2 info, 3 debug")->check(CLI::Range(0, 3));

  auto add = [&](const std::string& name, const std::string& help) { return app.add_subcommand(name, help); };
  auto seedOpt = [&](CLI::App* c) { c->add_option("--seed", f.seed, "Seed (default from config)"); };
  auto scenarioOpt = [&](CLI::App* c) {
    c->add_option("--scenario", f.scenario, "washing_machine, basket or sofa (default: config list)");
  };
  auto splitOpt = [&](CLI::App* c) { c->add_option("--split", f.split, "seen, novel_shape or novel_category"); };
  auto ckptOpts = [&](CLI::App* c) {
    c->add_option("--retrieve", f.retrieve, "Retrieval checkpoint")->check(CLI::ExistingFile);
    c->add_option("--place", f.place, "Place checkpoint")->check(CLI::ExistingFile);
    c->add_option("--pick", f.pick, "Pick checkpoint")->check(CLI::ExistingFile);
  };
  auto sceneOpts = [&](CLI::App* c) {
    c->add_option("--input", f.input, "Scene snapshot (.pile)")->check(CLI::ExistingFile);
    c->add_option("--scene-seed", f.scene_seed, "Generate the scene from this seed");
    scenarioOpt(c);
    splitOpt(c);
  };
  auto outOpt = [&](CLI::App* c) { c->add_option("--output", f.output, "Primary output path"); };

  struct Entry {
    CLI::App* cmd;
    CommandFn fn;
    const char* module;
  };
  std::vector<Entry> entries;

  auto* gen = add("gen-scenes", "Generate seeded scenes as snapshots");
  scenarioOpt(gen), splitOpt(gen), seedOpt(gen);
  gen->add_option("--count", f.count, "Scenes per scenario");
  gen->add_option("--output", f.output, "Output directory");
  entries.push_back({gen, pa_cmd_gen_scenes, nullptr});

  const char* collect_modules[] = {"retrieve", "place", "pick"};
  for (const char* m : collect_modules) {
    auto* c = add(std::string("collect-") + m, std::string("Collect labeled ") + m + " data");
    scenarioOpt(c), splitOpt(c), seedOpt(c), ckptOpts(c), outOpt(c);
    c->add_option("--count", f.count, "Number of samples");
    entries.push_back({c, pa_cmd_collect, m});
  }

  auto* train = add("train", "Train one module offline");
  train->add_option("--module", f.module, "retrieve, place or pick")->required();
  train->add_option("--dataset", f.dataset, "AFFD dataset")->required()->check(CLI::ExistingFile);
  train->add_option("--epochs", f.epochs, "Epochs (default from config)");
  seedOpt(train), outOpt(train);
  entries.push_back({train, pa_cmd_train, nullptr});

  auto* tune = add("online-tune", "Fine-tune a module on inference-time failures");
  tune->add_option("--module", f.module, "retrieve, place or pick")->required();
  tune->add_option("--dataset", f.dataset, "Offline AFFD dataset mixed into each update")
      ->required()
      ->check(CLI::ExistingFile);
  tune->add_option("--max-iterations", f.count, "Episode cap (default from config)");
  scenarioOpt(tune), splitOpt(tune), seedOpt(tune), ckptOpts(tune), outOpt(tune);
  entries.push_back({tune, pa_cmd_online_tune, nullptr});

  auto* eval = add("eval", "Evaluate a method on seeded scenes");
  eval->add_option("--method", f.method,
                   "full, no-adaptation, no-pick-afford, no-place-afford, random-adapt, random-point, highest-point");
  eval->add_option("--scenes", f.count, "Scenes per scenario (default from config)");
  eval->add_flag("--low-p-high", f.low_p_high, "Keep only scenes whose initial P_high is at most the threshold");
  scenarioOpt(eval), splitOpt(eval), seedOpt(eval), ckptOpts(eval), outOpt(eval);
  entries.push_back({eval, pa_cmd_eval, nullptr});

  auto* sweep = add("sweep-rounds", "Success rate for 0..3 adaptation rounds and 3 random rounds");
  sweep->add_option("--scenes", f.count, "Scenes per scenario (default from config)");
  sweep->add_flag("--low-p-high", f.low_p_high, "Keep only scenes whose initial P_high is at most the threshold");
  scenarioOpt(sweep), splitOpt(sweep), seedOpt(sweep), ckptOpts(sweep), outOpt(sweep);
  entries.push_back({sweep, pa_cmd_sweep_rounds, nullptr});

  auto* oracle = add("oracle", "Brute-force retrieval outcome at farthest-point candidates");
  oracle->add_option("--candidates", f.count, "Number of candidates (at most 64)");
  sceneOpts(oracle), outOpt(oracle);
  entries.push_back({oracle, pa_cmd_oracle, nullptr});

  auto* exp = add("export-affordance", "Write an affordance map as ASCII PLY");
  exp->add_option("--module", f.module, "retrieve, place or pick")->required();
  exp->add_option("--pick-index", f.pick_index, "Pick point for place maps (default: pick model argmax)");
  sceneOpts(exp), ckptOpts(exp), outOpt(exp);
  entries.push_back({exp, pa_cmd_export_affordance, nullptr});

  auto* ep = add("run-episode", "Run one episode and write its step log");
  ep->add_option("--method", f.method, "Method (see eval)");
  sceneOpts(ep), seedOpt(ep), ckptOpts(ep), outOpt(ep);
  entries.push_back({ep, pa_cmd_run_episode, nullptr});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  for (const Entry& e : entries) {
    if (e.cmd->parsed()) return run(f, e.fn, e.cmd->get_name(), e.module);
  }
  return 2;
}
