/*
 * Copyright 2026 the momics authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "momics.h"

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("momics_capi_" + tag);
  fs::remove_all(dir);
  return dir;
}

struct ConfigHandle {
  momics_config* cfg = nullptr;
  ConfigHandle() { REQUIRE(momics_config_create(&cfg) == MOMICS_OK); }
  ~ConfigHandle() { momics_config_free(cfg); }
};

void set_ok(momics_config* cfg, const char* section, const char* key,
            const std::string& value) {
  REQUIRE(momics_config_set(cfg, section, key, value.c_str()) == MOMICS_OK);
}

// Every intermediate config must stay valid, so shrink dependent values
// (wsi_latent_dim <= latent_dim, groups <= features) ahead of their bounds.
void shrink(momics_config* cfg) {
  set_ok(cfg, "synth", "num_patients", "10");
  set_ok(cfg, "synth", "wsi_latent_dim", "3");
  set_ok(cfg, "synth", "latent_dim", "3");
  set_ok(cfg, "synth", "patch_dim", "5");
  set_ok(cfg, "synth", "patches_min", "3");
  set_ok(cfg, "synth", "patches_max", "4");
  set_ok(cfg, "synth", "rna_groups", "3");
  set_ok(cfg, "synth", "dnam_groups", "2");
  set_ok(cfg, "synth", "cnv_groups", "2");
  set_ok(cfg, "synth", "rna_features", "6");
  set_ok(cfg, "synth", "dnam_features", "4");
  set_ok(cfg, "synth", "cnv_features", "4");
}

}  // namespace

TEST_CASE("the library reports a version") {
  REQUIRE(momics_version() != nullptr);
  CHECK(std::strcmp(momics_version(), "1.0.0") == 0);
}

TEST_CASE("config values round trip through the c api") {
  ConfigHandle h;
  char buf[64];

  // Defaults are readable.
  REQUIRE(momics_config_get(h.cfg, "run", "seed", buf, sizeof buf) ==
          MOMICS_OK);
  CHECK(std::string(buf) == "1");
  REQUIRE(momics_config_get(h.cfg, "model", "d", buf, sizeof buf) ==
          MOMICS_OK);
  CHECK(std::string(buf) == "256");

  CHECK(momics_config_set(h.cfg, "run", "seed", "42") == MOMICS_OK);
  REQUIRE(momics_config_get(h.cfg, "run", "seed", buf, sizeof buf) ==
          MOMICS_OK);
  CHECK(std::string(buf) == "42");
  CHECK(momics_config_set(h.cfg, "model", "heads", "4") == MOMICS_OK);
  REQUIRE(momics_config_get(h.cfg, "model", "heads", buf, sizeof buf) ==
          MOMICS_OK);
  CHECK(std::string(buf) == "4");
}

TEST_CASE("invalid settings surface through the error text") {
  ConfigHandle h;
  CHECK(momics_config_set(h.cfg, "synth", "censoring_rate", "2.0") ==
        MOMICS_ERR_CONFIG);
  CHECK(std::string(momics_last_error()).find("synth.censoring_rate") !=
        std::string::npos);

  CHECK(momics_config_set(h.cfg, "nonsense", "key", "1") ==
        MOMICS_ERR_CONFIG);
  CHECK(momics_config_set(h.cfg, "run", "nonsense", "1") ==
        MOMICS_ERR_CONFIG);
  CHECK(std::string(momics_last_error()).find("nonsense") !=
        std::string::npos);

  char buf[4];
  CHECK(momics_config_get(h.cfg, "run", "wrong", buf, sizeof buf) ==
        MOMICS_ERR_CONFIG);
  // A successful call clears the error text.
  CHECK(momics_config_get(h.cfg, "run", "seed", buf, sizeof buf) ==
        MOMICS_OK);
  CHECK(std::string(momics_last_error()).empty());
}

TEST_CASE("small buffers are rejected without truncation") {
  ConfigHandle h;
  char tiny[2];
  CHECK(momics_config_get(h.cfg, "model", "d", tiny, sizeof tiny) ==
        MOMICS_ERR_CONFIG);  // needs "256" + NUL
  char exact[4];
  CHECK(momics_config_get(h.cfg, "model", "d", exact, sizeof exact) ==
        MOMICS_OK);
  CHECK(std::string(exact) == "256");
}

TEST_CASE("null arguments are rejected, not dereferenced") {
  CHECK(momics_config_create(nullptr) == MOMICS_ERR_CONFIG);
  CHECK(momics_config_set(nullptr, "run", "seed", "1") == MOMICS_ERR_CONFIG);
  ConfigHandle h;
  CHECK(momics_config_set(h.cfg, nullptr, "seed", "1") == MOMICS_ERR_CONFIG);
  CHECK(momics_config_set(h.cfg, "run", nullptr, "1") == MOMICS_ERR_CONFIG);
  CHECK(momics_config_set(h.cfg, "run", "seed", nullptr) ==
        MOMICS_ERR_CONFIG);
  char buf[8];
  CHECK(momics_config_get(nullptr, "run", "seed", buf, sizeof buf) ==
        MOMICS_ERR_CONFIG);
  CHECK(momics_config_get(h.cfg, "run", "seed", nullptr, 8) ==
        MOMICS_ERR_CONFIG);
  CHECK(momics_run_synth(nullptr, nullptr) == MOMICS_ERR_CONFIG);
  momics_config_free(nullptr);  // must be a harmless no-op
}

TEST_CASE("configs load from disk with file-position errors") {
  ConfigHandle h;
  fs::path dir = fresh_dir("load");
  fs::create_directories(dir);

  fs::path good = dir / "good.ini";
  std::ofstream(good) << "[run]\nseed = 9\n";
  momics_config* loaded = nullptr;
  REQUIRE(momics_config_load(good.string().c_str(), &loaded) == MOMICS_OK);
  char buf[8];
  REQUIRE(momics_config_get(loaded, "run", "seed", buf, sizeof buf) ==
          MOMICS_OK);
  CHECK(std::string(buf) == "9");
  momics_config_free(loaded);

  fs::path bad = dir / "bad.ini";
  std::ofstream(bad) << "[run]\nunknown_key = 1\n";
  momics_config* rejected = nullptr;
  CHECK(momics_config_load(bad.string().c_str(), &rejected) ==
        MOMICS_ERR_CONFIG);
  CHECK(std::string(momics_last_error()).find("unknown_key") !=
        std::string::npos);

  momics_config* missing = nullptr;
  CHECK(momics_config_load((dir / "absent.ini").string().c_str(), &missing) !=
        MOMICS_OK);
}

TEST_CASE("runs execute through the c api and map error kinds") {
  ConfigHandle h;
  shrink(h.cfg);
  fs::path out = fresh_dir("run");
  set_ok(h.cfg, "run", "out", out.string());

  momics_run_options dry{};
  dry.dry_run = 1;
  CHECK(momics_run_synth(h.cfg, &dry) == MOMICS_OK);
  CHECK_FALSE(fs::exists(out));

  CHECK(momics_run_synth(h.cfg, nullptr) == MOMICS_OK);
  CHECK(fs::exists(out / "manifest.ini"));

  // Second run without force: a data error with a readable message.
  CHECK(momics_run_synth(h.cfg, nullptr) == MOMICS_ERR_DATA);
  CHECK(std::string(momics_last_error()).find("force") != std::string::npos);

  momics_run_options force{};
  force.force = 1;
  CHECK(momics_run_synth(h.cfg, &force) == MOMICS_OK);

  // Pretraining through the api, reusing the synthetic dataset.
  momics_config* pre = nullptr;
  REQUIRE(momics_config_create(&pre) == MOMICS_OK);
  shrink(pre);
  fs::path pre_out = fresh_dir("run_pre");
  set_ok(pre, "run", "out", pre_out.string());
  set_ok(pre, "data", "manifest", (out / "manifest.ini").string());
  set_ok(pre, "model", "d", "8");
  set_ok(pre, "model", "heads", "2");
  set_ok(pre, "model", "mlp_dim", "8");
  set_ok(pre, "model", "num_prototypes", "2");
  set_ok(pre, "model", "patch_sample", "3");
  set_ok(pre, "model", "dropout", "0");
  set_ok(pre, "pretrain", "warmup_epochs", "0");
  set_ok(pre, "pretrain", "epochs", "1");
  set_ok(pre, "pretrain", "batch_size", "5");
  CHECK(momics_run_pretrain(pre, nullptr) == MOMICS_OK);
  CHECK(fs::exists(pre_out / "model.ckpt"));
  momics_config_free(pre);
}
