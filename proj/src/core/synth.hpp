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

#include <array>
#include <cstdint>

#include "core/data.hpp"
#include "core/recon.hpp"

namespace momics::synth {

// Synthetic cohorts share one latent vector z ~ N(0, I_p) per patient; every
// modality observes fixed random linear views of z plus noise, so any
// modality is predictable from any other and simple oracles exist. Patch
// embeddings see only the first wsi_latent_dim coordinates, which keeps
// histopathology from trivially determining all omics; labels should
// therefore use coordinates below wsi_latent_dim.
struct SynthConfig {
  int num_patients = 128;
  int latent_dim = 8;
  int wsi_latent_dim = 8;
  int patch_dim = 32;
  int patches_min = 8;
  int patches_max = 16;
  std::array<int, kNumOmics> feature_counts{64, 64, 64};
  std::array<int, kNumOmics> group_counts{8, 8, 8};
  std::array<double, kNumOmics> noise_std{0.1, 0.1, 0.1};
  double patch_noise_std = 0.1;
  // subtype = 1 iff z[subtype_coord] > subtype_threshold
  int subtype_coord = 0;
  double subtype_threshold = 0.0;
  // survival time ~ Exponential(exp(risk)), risk = risk_scale * z[risk_coord];
  // with probability censoring_rate the time is censored uniformly in (0, T)
  int risk_coord = 1;
  double risk_scale = 1.0;
  double censoring_rate = 0.0;
  double cnv_missing_rate = 0.0;
  std::uint64_t seed = 1;

  void validate() const;  // throws Config naming the synth.* key
};

// Deterministic per (seed, patient index). Profiles are in raw value space
// (transformed = false); run data::transform_cohort or a save/load round
// trip before feeding them to tokenizers or oracles.
data::Cohort generate_cohort(const SynthConfig& cfg);

struct OracleResult {
  recon::PearsonResult pearson;
  double median = 0.0;
};

// Ridge regression (penalty 1e-3 * n_fit) from the concatenated input
// modalities (patient-mean patch embedding for WSI) to each target feature.
// Fit on the first half of the cohort, scored by per-feature Pearson on the
// second half. Requires transformed profiles.
OracleResult linear_oracle(const data::Cohort& cohort, bool use_wsi,
                           const std::vector<Omics>& inputs, Omics target);
OracleResult linear_oracle(const data::Cohort& cohort,
                           const recon::Combo& combo);

}  // namespace momics::synth
