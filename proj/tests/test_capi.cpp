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

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "pileaff/pileaff.h"

namespace {

std::string tempDir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("pileaff_capi_" + name);
  std::filesystem::create_directories(p);
  return p.string();
}

struct Config {
  pa_config* ptr = nullptr;
  Config() { EXPECT_EQ(pa_config_default(&ptr), PA_OK); }
  ~Config() { pa_config_free(ptr); }
};

TEST(CApi, ConfigHashAndOverrides) {
  Config c;
  char hash[64];
  size_t len = 0;
  ASSERT_EQ(pa_config_hash(c.ptr, hash, sizeof hash, &len), PA_OK);
  EXPECT_EQ(len, 16u);
  const std::string before = hash;
  EXPECT_EQ(pa_config_set(c.ptr, "policy.max_adapt_rounds=1"), PA_OK);
  ASSERT_EQ(pa_config_hash(c.ptr, hash, sizeof hash, &len), PA_OK);
  EXPECT_NE(before, hash);
  EXPECT_EQ(pa_config_set(c.ptr, "policy.nothing=1"), PA_ERR_CONFIG);
  EXPECT_NE(std::string(pa_last_error()).find("policy.nothing"), std::string::npos);
  // A rejected override leaves the config unchanged.
  EXPECT_EQ(pa_config_set(c.ptr, "policy.p_high_gate=3"), PA_ERR_CONFIG);
  char hash2[64];
  ASSERT_EQ(pa_config_hash(c.ptr, hash2, sizeof hash2, nullptr), PA_OK);
  EXPECT_STREQ(hash, hash2);
  EXPECT_STREQ(pa_last_error(), "");
}

TEST(CApi, ConfigFileWithCommentsMatchesDefaults) {
  Config d;
  pa_config* loaded = nullptr;
  ASSERT_EQ(pa_config_load(PILEAFF_DEFAULT_CONFIG, &loaded), PA_OK) << pa_last_error();
  char a[64];
  char b[64];
  ASSERT_EQ(pa_config_hash(d.ptr, a, sizeof a, nullptr), PA_OK);
  ASSERT_EQ(pa_config_hash(loaded, b, sizeof b, nullptr), PA_OK);
  EXPECT_STREQ(a, b);
  pa_config_free(loaded);
  pa_config* parsed = nullptr;
  EXPECT_EQ(pa_config_parse("// note\n{\"seed\": 3 /* inline */}", &parsed), PA_OK);
  pa_config_free(parsed);
}

TEST(CApi, BufferSizing) {
  Config c;
  size_t len = 0;
  ASSERT_EQ(pa_config_json(c.ptr, nullptr, 0, &len), PA_OK);
  EXPECT_GT(len, 100u);
  std::vector<char> small(8);
  EXPECT_EQ(pa_config_json(c.ptr, small.data(), small.size(), &len), PA_ERR_BUFFER_TOO_SMALL);
  EXPECT_EQ(small.back(), '\0');
  std::vector<char> buf(len + 1);
  ASSERT_EQ(pa_config_json(c.ptr, buf.data(), buf.size(), nullptr), PA_OK);
  pa_config* parsed = nullptr;
  ASSERT_EQ(pa_config_parse(buf.data(), &parsed), PA_OK);
  pa_config_free(parsed);
}

TEST(CApi, NullArgumentsAreRejected) {
  EXPECT_EQ(pa_config_default(nullptr), PA_ERR_INVALID_PARAMETER);
  EXPECT_EQ(pa_scene_load(nullptr, nullptr), PA_ERR_INVALID_PARAMETER);
  EXPECT_EQ(pa_config_parse("{bad", nullptr), PA_ERR_INVALID_PARAMETER);
  pa_config* c = nullptr;
  EXPECT_EQ(pa_config_parse("{bad", &c), PA_ERR_CONFIG);
  EXPECT_EQ(c, nullptr);
  EXPECT_EQ(pa_config_load("/nonexistent/file.json", &c), PA_ERR_CONFIG);
  pa_config_free(nullptr);
  pa_scene_free(nullptr);
  pa_model_free(nullptr);
}

TEST(CApi, SceneLifecycle) {
  Config c;
  pa_scene* s = nullptr;
  ASSERT_EQ(pa_scene_generate(c.ptr, PA_BASKET, PA_SPLIT_SEEN, 5, &s), PA_OK) << pa_last_error();
  size_t garments = 0, particles = 0, count = 0;
  ASSERT_EQ(pa_scene_garment_count(s, &garments), PA_OK);
  ASSERT_EQ(pa_scene_particle_count(s, &particles), PA_OK);
  EXPECT_GE(garments, 2u);
  std::vector<double> xyz(3 * particles);
  ASSERT_EQ(pa_scene_positions(s, xyz.data(), xyz.size(), &count), PA_OK);
  EXPECT_EQ(count, particles);
  EXPECT_EQ(pa_scene_positions(s, xyz.data(), 3, &count), PA_ERR_BUFFER_TOO_SMALL);

  std::vector<double> cloud(3 * 512);
  ASSERT_EQ(pa_scene_observe(s, c.ptr, cloud.data(), cloud.size(), &count), PA_OK);
  EXPECT_EQ(count, 512u);

  const std::string path = tempDir("scene") + "/s.pile";
  ASSERT_EQ(pa_scene_save(s, path.c_str()), PA_OK);
  pa_scene* loaded = nullptr;
  ASSERT_EQ(pa_scene_load(path.c_str(), &loaded), PA_OK);
  int eq = 0;
  ASSERT_EQ(pa_scene_equal(s, loaded, &eq), PA_OK);
  EXPECT_EQ(eq, 1);

  pa_scene* clone = nullptr;
  ASSERT_EQ(pa_scene_clone(s, &clone), PA_OK);
  double e0 = 0, e1 = 0;
  ASSERT_EQ(pa_scene_energy(clone, c.ptr, &e0), PA_OK);
  ASSERT_EQ(pa_scene_step(clone, c.ptr, 10), PA_OK);
  ASSERT_EQ(pa_scene_energy(clone, c.ptr, &e1), PA_OK);
  EXPECT_LE(e1, e0 + 1e-5);
  ASSERT_EQ(pa_scene_step(loaded, c.ptr, 10), PA_OK);
  ASSERT_EQ(pa_scene_equal(clone, loaded, &eq), PA_OK);
  EXPECT_EQ(eq, 1);
  EXPECT_EQ(pa_scene_step(clone, c.ptr, -1), PA_ERR_INVALID_PARAMETER);
  pa_scene_free(clone);
  pa_scene_free(loaded);
  pa_scene_free(s);
}

TEST(CApi, BadScenarioAndCorruptSnapshot) {
  Config c;
  pa_scene* s = nullptr;
  EXPECT_EQ(pa_scene_generate(c.ptr, static_cast<pa_scenario>(9), PA_SPLIT_SEEN, 1, &s), PA_ERR_INVALID_PARAMETER);
  const std::string path = tempDir("corrupt") + "/bad.pile";
  FILE* f = std::fopen(path.c_str(), "wb");
  std::fputs("garbage", f);
  std::fclose(f);
  EXPECT_EQ(pa_scene_load(path.c_str(), &s), PA_ERR_FORMAT);
}

TEST(CApi, CommandsReportConfigErrors) {
  Config c;
  pa_run_options o;
  pa_run_options_init(&o);
  EXPECT_EQ(o.count, -1);
  char buf[1024];
  // Place collection without a retrieval checkpoint breaks the supervision chain.
  o.module = "place";
  EXPECT_EQ(pa_cmd_collect(c.ptr, &o, buf, sizeof buf, nullptr), PA_ERR_CONFIG);
  EXPECT_NE(std::string(buf).find("retrieval checkpoint"), std::string::npos);
  pa_run_options_init(&o);
  o.method = "full";
  EXPECT_EQ(pa_cmd_eval(c.ptr, &o, buf, sizeof buf, nullptr), PA_ERR_CONFIG);
  o.method = "random-point";
  o.count = 0;
  EXPECT_EQ(pa_cmd_eval(c.ptr, &o, buf, sizeof buf, nullptr), PA_ERR_CONFIG);
  pa_run_options_init(&o);
  o.module = "retrieve";
  o.dataset = "/nonexistent.affd";
  EXPECT_EQ(pa_cmd_train(c.ptr, &o, buf, sizeof buf, nullptr), PA_ERR_IO);
}

TEST(CApi, OracleCommandWritesCsv) {
  Config c;
  const std::string dir = tempDir("oracle");
  const std::string set = "output_dir=" + dir;
  ASSERT_EQ(pa_config_set(c.ptr, set.c_str()), PA_OK);
  pa_run_options o;
  pa_run_options_init(&o);
  o.scenario = "basket";
  o.has_scene_seed = 1;
  o.scene_seed = 3;
  o.count = 4;
  char buf[1024];
  ASSERT_EQ(pa_cmd_oracle(c.ptr, &o, buf, sizeof buf, nullptr), PA_OK) << pa_last_error();
  EXPECT_TRUE(std::filesystem::exists(dir + "/oracle.csv"));
  o.count = 65;
  EXPECT_EQ(pa_cmd_oracle(c.ptr, &o, buf, sizeof buf, nullptr), PA_ERR_CONFIG);
}

TEST(CApi, StatusNames) {
  EXPECT_STREQ(pa_status_name(PA_OK), "ok");
  EXPECT_STREQ(pa_status_name(PA_ERR_NUMERICAL), "numerical error");
  EXPECT_STRNE(pa_version(), "");
}

}  // namespace
