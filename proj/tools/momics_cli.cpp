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

// Command-line front end. All pipeline work happens behind the C API of the
// momics shared library; this file only parses flags, overlays them onto the
// configuration, and maps statuses to exit codes (0 ok, 1 internal, 2 config,
// 3 data, 4 numeric).

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "momics.h"

namespace {

struct CommonFlags {
  std::string config;
  std::string seed;
  std::string out;
  std::string checkpoint;
  std::string threads;
  bool force = false;
  bool dry_run = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "INI configuration file");
  cmd->add_option("--seed", f.seed, "root random seed, overrides [run] seed");
  cmd->add_option("--out", f.out, "output directory, overrides [run] out");
  cmd->add_option("--checkpoint", f.checkpoint,
                  "checkpoint path, overrides [run] checkpoint");
  cmd->add_option("--threads", f.threads,
                  "worker threads, overrides [run] threads");
  cmd->add_flag("--force", f.force, "overwrite a non-empty output directory");
  cmd->add_flag("--dry-run", f.dry_run,
                "validate the configuration and print the plan only");
}

int fail(momics_status s) {
  std::cerr << "error: " << momics_last_error() << '\n';
  return static_cast<int>(s);
}

using RunFn = momics_status (*)(const momics_config*,
                                const momics_run_options*);

int run_command(const CommonFlags& f, RunFn run) {
  momics_config* cfg = nullptr;
  momics_status s = f.config.empty()
                        ? momics_config_create(&cfg)
                        : momics_config_load(f.config.c_str(), &cfg);
  if (s != MOMICS_OK) return fail(s);

  const struct {
    const char* key;
    const std::string* value;
  } overrides[] = {{"seed", &f.seed},
                   {"out", &f.out},
                   {"checkpoint", &f.checkpoint},
                   {"threads", &f.threads}};
  for (const auto& kv : overrides) {
    if (kv.value->empty()) continue;
    s = momics_config_set(cfg, "run", kv.key, kv.value->c_str());
    if (s != MOMICS_OK) {
      momics_config_free(cfg);
      return fail(s);
    }
  }

  momics_run_options opts{};
  opts.force = f.force ? 1 : 0;
  opts.dry_run = f.dry_run ? 1 : 0;
  opts.echo = 1;
  s = run(cfg, &opts);
  momics_config_free(cfg);
  return s == MOMICS_OK ? 0 : fail(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"masked-omics multimodal pretraining pipeline"};
  app.set_version_flag("--version", std::string(momics_version()));
  app.require_subcommand(1);

  const struct {
    const char* name;
    const char* help;
    RunFn fn;
  } commands[] = {
      {"synth-data", "generate a synthetic cohort dataset", momics_run_synth},
      {"pretrain", "masked-omics pretraining", momics_run_pretrain},
      {"finetune-subtype", "few-shot subtype classification",
       momics_run_finetune_subtype},
      {"finetune-survival", "cross-validated survival fine-tuning",
       momics_run_finetune_survival},
      {"generate", "any-to-any omics generation", momics_run_generate},
      {"evaluate", "score generation against observed profiles",
       momics_run_evaluate},
  };

  constexpr int kNumCommands = 6;
  CommonFlags flags[kNumCommands];
  CLI::App* subs[kNumCommands];
  for (int i = 0; i < kNumCommands; ++i) {
    subs[i] = app.add_subcommand(commands[i].name, commands[i].help);
    add_common(subs[i], flags[i]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(MOMICS_ERR_CONFIG);
  }

  for (int i = 0; i < kNumCommands; ++i) {
    if (subs[i]->parsed()) return run_command(flags[i], commands[i].fn);
  }
  return static_cast<int>(MOMICS_ERR_CONFIG);
}
