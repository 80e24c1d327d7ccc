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

#include "pileaff/pileaff.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "pileaff/bytes.hpp"
#include "pileaff/commands.hpp"
#include "pileaff/log.hpp"

using namespace pileaff;

struct pa_config {
  RunConfig cfg;
};
struct pa_scene {
  SceneState state;
};
struct pa_model {
  ModelF model;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
pa_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return PA_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<pa_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return PA_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PA_ERR_INTERNAL;
  }
}

void notNull(const void* p, const char* what) {
  require(p != nullptr, ErrorCode::kInvalidParameter, std::string(what) + " must not be NULL");
}

pa_status copyOut(const std::string& s, char* buf, size_t cap, size_t* len) {
  if (len) *len = s.size();
  if (buf && cap > 0) {
    const size_t n = std::min(cap - 1, s.size());
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
  }
  if (buf == nullptr && cap == 0) return PA_OK;
  if (cap <= s.size()) {
    g_last_error = "output buffer too small: need " + std::to_string(s.size() + 1) + " bytes";
    return PA_ERR_BUFFER_TOO_SMALL;
  }
  return PA_OK;
}

pa_status copyPoints(const Cloud& pts, double* xyz, size_t cap, size_t* count) {
  if (count) *count = pts.size();
  if (xyz == nullptr && cap == 0) return PA_OK;
  if (cap < 3 * pts.size()) {
    g_last_error = "output buffer too small: need " + std::to_string(3 * pts.size()) + " doubles";
    return PA_ERR_BUFFER_TOO_SMALL;
  }
  for (size_t i = 0; i < pts.size(); ++i) {
    xyz[3 * i] = pts[i].x;
    xyz[3 * i + 1] = pts[i].y;
    xyz[3 * i + 2] = pts[i].z;
  }
  return PA_OK;
}

Cloud toCloud(const double* xyz, size_t n) {
  Cloud c(n);
  for (size_t i = 0; i < n; ++i) c[i] = {xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]};
  return c;
}

std::string str(const char* s) { return s ? std::string(s) : std::string(); }

CommandOptions toOptions(const pa_run_options* o) {
  CommandOptions c;
  if (!o) return c;
  c.module = str(o->module);
  c.scenario = str(o->scenario);
  c.split = str(o->split);
  if (o->method && *o->method) c.method = o->method;
  c.retrieve_ckpt = str(o->retrieve_ckpt);
  c.place_ckpt = str(o->place_ckpt);
  c.pick_ckpt = str(o->pick_ckpt);
  c.dataset = str(o->dataset);
  c.input = str(o->input);
  c.output = str(o->output);
  c.count = o->count;
  c.epochs = o->epochs;
  if (o->has_seed) c.seed = o->seed;
  if (o->has_scene_seed) c.scene_seed = o->scene_seed;
  c.pick_index = o->pick_index;
  c.low_p_high_only = o->low_p_high_only != 0;
  return c;
}

using CommandFn = std::string (*)(const RunConfig&, const CommandOptions&);

pa_status runCommand(CommandFn fn, const pa_config* cfg, const pa_run_options* opts, char* summary, size_t cap,
                     size_t* len) {
  std::string out;
  const pa_status st = guarded([&] {
    notNull(cfg, "config");
    out = fn(cfg->cfg, toOptions(opts));
  });
  if (st != PA_OK) {
    // Keep the failure message; the summary mirrors it for callers that only read the buffer.
    const std::string err = g_last_error;
    copyOut(err, summary, cap, len);
    g_last_error = err;
    return st;
  }
  return copyOut(out, summary, cap, len);
}

}  // namespace

extern "C" {

const char* pa_last_error(void) { return g_last_error.c_str(); }

const char* pa_status_name(pa_status s) {
  switch (s) {
    case PA_OK: return "ok";
    case PA_ERR_INVALID_PARAMETER: return "invalid parameter";
    case PA_ERR_CONFIG: return "config error";
    case PA_ERR_NUMERICAL: return "numerical error";
    case PA_ERR_INCOMPLETE: return "incomplete run";
    case PA_ERR_FORMAT: return "format error";
    case PA_ERR_IO: return "i/o error";
    case PA_ERR_PRECONDITION: return "precondition violated";
    case PA_ERR_SCENE_GENERATION: return "scene generation failed";
    case PA_ERR_EMPTY_OBSERVATION: return "empty observation";
    case PA_ERR_INPUT: return "invalid input";
    case PA_ERR_BUFFER_TOO_SMALL: return "buffer too small";
    case PA_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* pa_version(void) { return "0.1.0"; }

pa_status pa_config_default(pa_config** out) {
  return guarded([&] {
    notNull(out, "out");
    *out = new pa_config{};
  });
}

pa_status pa_config_parse(const char* json_text, pa_config** out) {
  return guarded([&] {
    notNull(json_text, "json_text");
    notNull(out, "out");
    *out = new pa_config{parseRunConfig(json_text)};
  });
}

pa_status pa_config_load(const char* path, pa_config** out) {
  return guarded([&] {
    notNull(path, "path");
    notNull(out, "out");
    *out = new pa_config{loadRunConfig(path)};
  });
}

pa_status pa_config_set(pa_config* cfg, const char* assignment) {
  return guarded([&] {
    notNull(cfg, "config");
    notNull(assignment, "assignment");
    RunConfig next = cfg->cfg;
    applyOverride(next, assignment);
    next.validate();
    cfg->cfg = std::move(next);
  });
}

pa_status pa_config_hash(const pa_config* cfg, char* buf, size_t cap, size_t* len) {
  std::string s;
  const pa_status st = guarded([&] {
    notNull(cfg, "config");
    s = cfg->cfg.hash();
  });
  return st != PA_OK ? st : copyOut(s, buf, cap, len);
}

pa_status pa_config_json(const pa_config* cfg, char* buf, size_t cap, size_t* len) {
  std::string s;
  const pa_status st = guarded([&] {
    notNull(cfg, "config");
    s = runConfigJson(cfg->cfg);
  });
  return st != PA_OK ? st : copyOut(s, buf, cap, len);
}

void pa_config_free(pa_config* cfg) { delete cfg; }

pa_status pa_scene_generate(const pa_config* cfg, pa_scenario scenario, pa_split split, uint64_t seed,
                            pa_scene** out) {
  return guarded([&] {
    notNull(cfg, "config");
    notNull(out, "out");
    require(scenario >= PA_WASHING_MACHINE && scenario <= PA_SOFA, ErrorCode::kInvalidParameter,
            "unknown scenario");
    require(split >= PA_SPLIT_SEEN && split <= PA_SPLIT_NOVEL_CATEGORY, ErrorCode::kInvalidParameter,
            "unknown split");
    const TemplatePool pool = defaultTemplatePool();
    *out = new pa_scene{makeScene(cfg->cfg.env, pool, static_cast<ContainerKind>(scenario),
                                  static_cast<Split>(split), seed)};
  });
}

pa_status pa_scene_load(const char* path, pa_scene** out) {
  return guarded([&] {
    notNull(path, "path");
    notNull(out, "out");
    *out = new pa_scene{restore(readFile(path))};
  });
}

pa_status pa_scene_save(const pa_scene* scene, const char* path) {
  return guarded([&] {
    notNull(scene, "scene");
    notNull(path, "path");
    writeFile(path, snapshot(scene->state));
  });
}

pa_status pa_scene_clone(const pa_scene* scene, pa_scene** out) {
  return guarded([&] {
    notNull(scene, "scene");
    notNull(out, "out");
    *out = new pa_scene{scene->state};
  });
}

pa_status pa_scene_step(pa_scene* scene, const pa_config* cfg, int steps) {
  return guarded([&] {
    notNull(scene, "scene");
    notNull(cfg, "config");
    require(steps >= 0, ErrorCode::kInvalidParameter, "steps must be >= 0");
    for (int i = 0; i < steps; ++i) step(scene->state, cfg->cfg.env.sim);
  });
}

pa_status pa_scene_garment_count(const pa_scene* scene, size_t* out) {
  return guarded([&] {
    notNull(scene, "scene");
    notNull(out, "out");
    *out = scene->state.garments.size();
  });
}

pa_status pa_scene_particle_count(const pa_scene* scene, size_t* out) {
  return guarded([&] {
    notNull(scene, "scene");
    notNull(out, "out");
    *out = scene->state.particleCount();
  });
}

pa_status pa_scene_positions(const pa_scene* scene, double* xyz, size_t cap, size_t* count) {
  Cloud pts;
  const pa_status st = guarded([&] {
    notNull(scene, "scene");
    for (const GarmentInstance& g : scene->state.garments) pts.insert(pts.end(), g.positions.begin(), g.positions.end());
  });
  return st != PA_OK ? st : copyPoints(pts, xyz, cap, count);
}

pa_status pa_scene_energy(const pa_scene* scene, const pa_config* cfg, double* total) {
  return guarded([&] {
    notNull(scene, "scene");
    notNull(cfg, "config");
    notNull(total, "total");
    *total = mechanicalEnergy(scene->state, cfg->cfg.env.sim).total();
  });
}

pa_status pa_scene_observe(const pa_scene* scene, const pa_config* cfg, double* xyz, size_t cap, size_t* count) {
  Cloud pts;
  const pa_status st = guarded([&] {
    notNull(scene, "scene");
    notNull(cfg, "config");
    pts = observe(cfg->cfg.env, scene->state).points;
  });
  return st != PA_OK ? st : copyPoints(pts, xyz, cap, count);
}

pa_status pa_scene_equal(const pa_scene* a, const pa_scene* b, int* equal) {
  return guarded([&] {
    notNull(a, "a");
    notNull(b, "b");
    notNull(equal, "equal");
    *equal = bitIdentical(a->state, b->state) ? 1 : 0;
  });
}

void pa_scene_free(pa_scene* scene) { delete scene; }

pa_status pa_model_load(const char* path, pa_model** out) {
  return guarded([&] {
    notNull(path, "path");
    notNull(out, "out");
    *out = new pa_model{loadCheckpoint(readFile(path))};
  });
}

pa_status pa_model_save(const pa_model* model, const char* path, const char* config_hash, uint64_t seed) {
  return guarded([&] {
    notNull(model, "model");
    notNull(path, "path");
    writeFile(path, saveCheckpoint(model->model, {str(config_hash), seed}));
  });
}

pa_status pa_model_kind(const pa_model* model, pa_module* out) {
  return guarded([&] {
    notNull(model, "model");
    notNull(out, "out");
    *out = static_cast<pa_module>(static_cast<int>(model->model.kind()));
  });
}

pa_status pa_model_score(const pa_model* model, const double* cloud_xyz, size_t m, const double* query_xyz,
                         size_t n, int pick_index, double* scores) {
  return guarded([&] {
    notNull(model, "model");
    notNull(cloud_xyz, "cloud_xyz");
    require(n == 0 || (query_xyz && scores), ErrorCode::kInvalidParameter, "query_xyz and scores must not be NULL");
    const auto s = model->model.score(toCloud(cloud_xyz, m), toCloud(query_xyz, n), pick_index);
    std::copy(s.begin(), s.end(), scores);
  });
}

void pa_model_free(pa_model* model) { delete model; }

void pa_run_options_init(pa_run_options* opts) {
  if (!opts) return;
  std::memset(opts, 0, sizeof(*opts));
  opts->count = -1;
  opts->epochs = -1;
  opts->pick_index = -1;
}

#define PA_DEFINE_COMMAND(name, fn)                                                                 \
  pa_status name(const pa_config* cfg, const pa_run_options* opts, char* summary, size_t cap, size_t* len) { \
    return runCommand(fn, cfg, opts, summary, cap, len);                                            \
  }
PA_DEFINE_COMMAND(pa_cmd_gen_scenes, cmdGenScenes)
PA_DEFINE_COMMAND(pa_cmd_collect, cmdCollect)
PA_DEFINE_COMMAND(pa_cmd_train, cmdTrain)
PA_DEFINE_COMMAND(pa_cmd_online_tune, cmdOnlineTune)
PA_DEFINE_COMMAND(pa_cmd_eval, cmdEval)
PA_DEFINE_COMMAND(pa_cmd_sweep_rounds, cmdSweepRounds)
PA_DEFINE_COMMAND(pa_cmd_oracle, cmdOracle)
PA_DEFINE_COMMAND(pa_cmd_export_affordance, cmdExportAffordance)
PA_DEFINE_COMMAND(pa_cmd_run_episode, cmdRunEpisode)
#undef PA_DEFINE_COMMAND

void pa_set_log_level(int level) {
  const LogLevel map[] = {LogLevel::kError, LogLevel::kWarn, LogLevel::kInfo, LogLevel::kDebug};
  setLogLevel(map[std::clamp(level, 0, 3)]);
}

}  // extern "C"
