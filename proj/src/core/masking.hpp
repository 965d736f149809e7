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
#include <string>
#include <vector>

#include "core/common.hpp"
#include "core/rng.hpp"

namespace momics::masking {

// Visibility plan over omics tokens. Histopathology tokens are never part of
// a plan; only omics tokens are maskable.
struct MaskPlan {
  double r = 0.0;
  std::array<double, kNumOmics> weights{};  // per-modality visible share
  std::array<std::vector<bool>, kNumOmics> visible;
  // Entry state of the RNG stream that produced the plan (0 for explicit
  // plans); a fresh Rng(seed_state) replays the draw.
  std::uint64_t seed_state = 0;

  int token_count(Omics o) const {
    return static_cast<int>(visible[static_cast<int>(o)].size());
  }
  int visible_count(Omics o) const;
  int total_tokens() const;
  int total_visible() const;
  bool is_visible(Omics o, int idx) const {
    return visible[static_cast<int>(o)][static_cast<std::size_t>(idx)];
  }
  std::vector<int> visible_indices(Omics o) const;  // ascending
  std::vector<int> masked_indices(Omics o) const;   // ascending

  // One line, replayable: "mask r=<r> w=<w,w,w> rna=<hex> dnam=<hex> cnv=<hex>"
  // with visibility bits packed little-endian per byte.
  std::string to_log() const;
  static MaskPlan from_log(const std::string& line,
                           const std::array<int, kNumOmics>& token_counts);
};

// Draws the visible-token budget split w ~ Dirichlet(alpha) over modalities,
// rounds budgets to integers by largest remainder, clamps each budget to the
// modality's token count with overflow redistributed proportionally to the
// remaining capacity, then picks visible tokens uniformly without
// replacement. Total visible count is exactly floor((1-r) * total tokens).
MaskPlan sample_mask_plan(const std::array<int, kNumOmics>& token_counts,
                          double r, double alpha, Rng& rng);

// Fully deterministic plan for generation: every token of a visible modality
// is visible; tokens of target and unlisted modalities are masked. The two
// sets must be disjoint.
MaskPlan explicit_mask_plan(const std::vector<Omics>& visible_modalities,
                            const std::vector<Omics>& target_modalities,
                            const std::array<int, kNumOmics>& token_counts);

}  // namespace momics::masking
