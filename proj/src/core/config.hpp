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

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "core/downstream.hpp"
#include "core/inifile.hpp"
#include "core/model.hpp"
#include "core/synth.hpp"

namespace momics::config {

// Full run configuration across all subcommands. Sections: [run] (seed,
// output dir, checkpoint, threads), [data] (manifest path), [synth],
// [model], [pretrain], [few_shot], [survival], [generate]. Unknown sections
// and keys are rejected with their full key path; absent keys keep the
// defaults below, which match the published hyperparameter tables.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out;
  std::string checkpoint;
  int threads = 1;

  std::string manifest;

  momics::synth::SynthConfig synth;
  momics::model::ModelConfig model;
  momics::model::PretrainConfig pretrain;
  int checkpoint_every = 50;  // epochs between periodic checkpoints; 0 = none

  momics::downstream::FewShotConfig few_shot;
  momics::downstream::SurvivalCvConfig survival;

  std::string combos = "wsi->rna";

  // Range-checks every section; from_ini calls this so invalid values are
  // rejected at parse time rather than at command dispatch.
  void validate() const;

  // Serializes every section with all defaults resolved; from_ini(to_ini())
  // reproduces the structure exactly.
  IniFile to_ini() const;
  static RunConfig from_ini(const IniFile& ini, const std::string& origin);
  static RunConfig load_file(const std::filesystem::path& path);
};

// "rna,dnam" style modality lists used by the inputs keys.
std::vector<Omics> parse_modalities(const std::string& text,
                                    const std::string& what);
std::string modalities_to_text(const std::vector<Omics>& mods);

}  // namespace momics::config
