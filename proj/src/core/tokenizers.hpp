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

#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/layers.hpp"

namespace momics::tok {

// Summarizes an arbitrary number of patch embeddings into a fixed set of
// tokens: each learned prototype cross-attends (as query) over the projected
// patches, with layer norm on queries, keys, and values, and a residual from
// the prototype to its token. Output row order follows prototype index.
struct PrototypeTokenizer {
  nn::Node* prototypes = nullptr;  // (num_prototypes x d)
  nn::Linear key_proj, value_proj;
  nn::LayerNorm ln_q, ln_k, ln_v;
  int heads = 1;

  PrototypeTokenizer() = default;
  PrototypeTokenizer(nn::ParamStore& ps, const std::string& name,
                     int num_prototypes, int patch_dim, int d, int heads);
  // patches: (num_patches x patch_dim), at least one row.
  nn::Node* operator()(nn::Tape& t, nn::Node* patches) const;
};

// Gated-attention pooling over patches into one slide vector, used in place
// of the <cls> token when the model runs in abmil mode.
struct AbmilPool {
  nn::Linear embed;   // patch_dim -> d
  nn::Linear gate_v;  // patch_dim -> d, tanh branch
  nn::Linear gate_u;  // patch_dim -> d, sigmoid branch
  nn::Linear score;   // d -> 1

  AbmilPool() = default;
  AbmilPool(nn::ParamStore& ps, const std::string& name, int patch_dim, int d);
  nn::Node* operator()(nn::Tape& t, nn::Node* patches) const;  // -> (1 x d)
};

// One token per feature group: gathers the group's features (ascending
// index) from the profile row and applies the group's own SNN block.
struct OmicsGroupTokenizer {
  Omics modality = Omics::Rna;
  data::GroupingScheme grouping;
  std::vector<nn::SnnBlock> blocks;

  OmicsGroupTokenizer() = default;
  OmicsGroupTokenizer(nn::ParamStore& ps, const std::string& name,
                      data::GroupingScheme scheme, int d, double dropout_rate);
  // profile: (1 x feature_count) -> (num_groups x d)
  nn::Node* operator()(nn::Tape& t, nn::Node* profile, nn::Ctx& ctx) const;
};

}  // namespace momics::tok
