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

#include "core/tokenizers.hpp"

namespace momics::tok {

PrototypeTokenizer::PrototypeTokenizer(nn::ParamStore& ps,
                                       const std::string& name,
                                       int num_prototypes, int patch_dim,
                                       int d, int h)
    : key_proj(ps, name + ".key", patch_dim, d),
      value_proj(ps, name + ".value", patch_dim, d),
      ln_q(ps, name + ".ln_q", d),
      ln_k(ps, name + ".ln_k", d),
      ln_v(ps, name + ".ln_v", d),
      heads(h) {
  prototypes = ps.create(name + ".prototypes", num_prototypes, d,
                         nn::Init::Normal002);
}

nn::Node* PrototypeTokenizer::operator()(nn::Tape& t,
                                         nn::Node* patches) const {
  if (patches->rows() < 1) {
    throw_data("prototype tokenizer: empty patch set");
  }
  nn::Node* q = ln_q(t, prototypes);
  nn::Node* k = ln_k(t, key_proj(t, patches));
  nn::Node* v = ln_v(t, value_proj(t, patches));
  return nn::add(t, prototypes, nn::scaled_dot_attention(t, q, k, v, heads));
}

AbmilPool::AbmilPool(nn::ParamStore& ps, const std::string& name,
                     int patch_dim, int d)
    : embed(ps, name + ".embed", patch_dim, d),
      gate_v(ps, name + ".gate_v", patch_dim, d),
      gate_u(ps, name + ".gate_u", patch_dim, d),
      score(ps, name + ".score", d, 1) {}

nn::Node* AbmilPool::operator()(nn::Tape& t, nn::Node* patches) const {
  if (patches->rows() < 1) {
    throw_data("abmil pooling: empty patch set");
  }
  nn::Node* gate =
      nn::mul(t, nn::tanh(t, gate_v(t, patches)),
              nn::sigmoid(t, gate_u(t, patches)));
  nn::Node* logits = nn::transpose(t, score(t, gate));  // (1 x num_patches)
  nn::Node* weights = nn::softmax_rows(t, logits);
  return nn::matmul(t, weights, embed(t, patches));
}

OmicsGroupTokenizer::OmicsGroupTokenizer(nn::ParamStore& ps,
                                         const std::string& name,
                                         data::GroupingScheme scheme, int d,
                                         double dropout_rate)
    : modality(scheme.modality), grouping(std::move(scheme)) {
  blocks.reserve(grouping.groups.size());
  for (std::size_t k = 0; k < grouping.groups.size(); ++k) {
    blocks.emplace_back(ps, name + ".g" + std::to_string(k),
                        static_cast<int>(grouping.groups[k].indices.size()), d,
                        dropout_rate);
  }
}

nn::Node* OmicsGroupTokenizer::operator()(nn::Tape& t, nn::Node* profile,
                                          nn::Ctx& ctx) const {
  if (profile->rows() != 1 || profile->cols() != grouping.feature_count) {
    throw_data(omics_name(modality) + " tokenizer: profile length " +
               std::to_string(profile->cols()) + ", expected " +
               std::to_string(grouping.feature_count));
  }
  std::vector<nn::Node*> rows;
  rows.reserve(grouping.groups.size());
  for (std::size_t k = 0; k < grouping.groups.size(); ++k) {
    nn::Node* gathered = nn::select_cols(t, profile, grouping.groups[k].indices);
    rows.push_back(blocks[k](t, gathered, ctx));
  }
  return nn::concat_rows(t, rows);
}

}  // namespace momics::tok
