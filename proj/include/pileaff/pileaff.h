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

#ifndef PILEAFF_PILEAFF_H_
#define PILEAFF_PILEAFF_H_

/* C interface to pileaff: garment-pile simulation, affordance models and the experiment commands.
 * Every function returns a pa_status; on failure pa_last_error() describes the cause (per thread). */

#include <stddef.h>
#include <stdint.h>

#if defined(PILEAFF_BUILDING)
#define PA_API __attribute__((visibility("default")))
#else
#define PA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pa_status {
  PA_OK = 0,
  PA_ERR_INVALID_PARAMETER = 1,
  PA_ERR_CONFIG = 2,
  PA_ERR_NUMERICAL = 3,
  PA_ERR_INCOMPLETE = 4,
  PA_ERR_FORMAT = 5,
  PA_ERR_IO = 6,
  PA_ERR_PRECONDITION = 7,
  PA_ERR_SCENE_GENERATION = 8,
  PA_ERR_EMPTY_OBSERVATION = 9,
  PA_ERR_INPUT = 10,
  PA_ERR_BUFFER_TOO_SMALL = 11,
  PA_ERR_INTERNAL = 12
} pa_status;

typedef enum pa_scenario { PA_WASHING_MACHINE = 0, PA_BASKET = 1, PA_SOFA = 2 } pa_scenario;
typedef enum pa_split { PA_SPLIT_SEEN = 0, PA_SPLIT_NOVEL_SHAPE = 1, PA_SPLIT_NOVEL_CATEGORY = 2 } pa_split;
typedef enum pa_module { PA_MODULE_RETRIEVE = 0, PA_MODULE_PLACE = 1, PA_MODULE_PICK = 2 } pa_module;

typedef struct pa_config pa_config;
typedef struct pa_scene pa_scene;
typedef struct pa_model pa_model;

/* Message of the last failed call on this thread; empty after a success. Never NULL. */
PA_API const char* pa_last_error(void);
PA_API const char* pa_status_name(pa_status status);
PA_API const char* pa_version(void);

/* String outputs: copies up to cap bytes including the terminator into buf and stores the full
 * length (without terminator) in *len when len is non-NULL. Returns PA_ERR_BUFFER_TOO_SMALL when
 * truncated; pass buf = NULL, cap = 0 to query the length. */

/* ---- configuration ---- */
PA_API pa_status pa_config_default(pa_config** out);
PA_API pa_status pa_config_parse(const char* json_text, pa_config** out);
PA_API pa_status pa_config_load(const char* path, pa_config** out);
/* "dotted.key=value"; the value is JSON or a bare string. */
PA_API pa_status pa_config_set(pa_config* cfg, const char* assignment);
PA_API pa_status pa_config_hash(const pa_config* cfg, char* buf, size_t cap, size_t* len);
PA_API pa_status pa_config_json(const pa_config* cfg, char* buf, size_t cap, size_t* len);
PA_API void pa_config_free(pa_config* cfg);

/* ---- scenes ---- */
PA_API pa_status pa_scene_generate(const pa_config* cfg, pa_scenario scenario, pa_split split, uint64_t seed,
                                   pa_scene** out);
PA_API pa_status pa_scene_load(const char* path, pa_scene** out);
PA_API pa_status pa_scene_save(const pa_scene* scene, const char* path);
PA_API pa_status pa_scene_clone(const pa_scene* scene, pa_scene** out);
PA_API pa_status pa_scene_step(pa_scene* scene, const pa_config* cfg, int steps);
PA_API pa_status pa_scene_garment_count(const pa_scene* scene, size_t* out);
PA_API pa_status pa_scene_particle_count(const pa_scene* scene, size_t* out);
/* xyz triples of every particle, garment by garment; cap counts doubles. */
PA_API pa_status pa_scene_positions(const pa_scene* scene, double* xyz, size_t cap, size_t* count);
PA_API pa_status pa_scene_energy(const pa_scene* scene, const pa_config* cfg, double* total);
/* Observed cloud (xyz triples); cap counts doubles, *count receives the number of points. */
PA_API pa_status pa_scene_observe(const pa_scene* scene, const pa_config* cfg, double* xyz, size_t cap,
                                  size_t* count);
/* Bitwise comparison of dynamic state; *equal receives 1 or 0. */
PA_API pa_status pa_scene_equal(const pa_scene* a, const pa_scene* b, int* equal);
PA_API void pa_scene_free(pa_scene* scene);

/* ---- models ---- */
PA_API pa_status pa_model_load(const char* path, pa_model** out);
PA_API pa_status pa_model_save(const pa_model* model, const char* path, const char* config_hash, uint64_t seed);
PA_API pa_status pa_model_kind(const pa_model* model, pa_module* out);
/* Scores n query points against an m-point cloud; place models condition on cloud point pick_index. */
PA_API pa_status pa_model_score(const pa_model* model, const double* cloud_xyz, size_t m, const double* query_xyz,
                                size_t n, int pick_index, double* scores);
PA_API void pa_model_free(pa_model* model);

/* ---- commands ---- */
typedef struct pa_run_options {
  const char* module;
  const char* scenario;
  const char* split;
  const char* method;
  const char* retrieve_ckpt;
  const char* place_ckpt;
  const char* pick_ckpt;
  const char* dataset;
  const char* input;
  const char* output;
  int64_t count;
  int64_t epochs;
  int has_seed;
  uint64_t seed;
  int has_scene_seed;
  uint64_t scene_seed;
  int pick_index;
  int low_p_high_only;
} pa_run_options;

/* Zeroes every field and sets the numeric "unset" markers (count = epochs = pick_index = -1). */
PA_API void pa_run_options_init(pa_run_options* opts);

/* Each command writes its artifacts and a human-readable summary into summary/cap/len. */
#define PA_DECLARE_COMMAND(name)                                                                   \
  PA_API pa_status name(const pa_config* cfg, const pa_run_options* opts, char* summary, size_t cap, \
                        size_t* len)
PA_DECLARE_COMMAND(pa_cmd_gen_scenes);
PA_DECLARE_COMMAND(pa_cmd_collect);
PA_DECLARE_COMMAND(pa_cmd_train);
PA_DECLARE_COMMAND(pa_cmd_online_tune);
PA_DECLARE_COMMAND(pa_cmd_eval);
PA_DECLARE_COMMAND(pa_cmd_sweep_rounds);
PA_DECLARE_COMMAND(pa_cmd_oracle);
PA_DECLARE_COMMAND(pa_cmd_export_affordance);
PA_DECLARE_COMMAND(pa_cmd_run_episode);
#undef PA_DECLARE_COMMAND

/* 0 = quiet, 1 = warnings, 2 = info, 3 = debug. */
PA_API void pa_set_log_level(int level);

#ifdef __cplusplus
}
#endif

#endif /* PILEAFF_PILEAFF_H_ */
