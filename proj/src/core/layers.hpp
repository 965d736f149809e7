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

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "core/autodiff.hpp"
#include "core/rng.hpp"

namespace momics::nn {

inline constexpr double kLayerNormEps = 1e-8;

enum class Init { Zero, One, LeCunNormal, Normal002 };

struct Parameter {
  std::string name;
  Node node;
};

// Ordered registry of trainable parameters. Each parameter's initial values
// come from a dedicated RNG stream keyed by its name, so initialization does
// not depend on registration order. Names must be unique; checkpoints refer
// to parameters by name.
class ParamStore {
 public:
  explicit ParamStore(Rng init_rng) : rng_(init_rng) {}

  Node* create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
               Init init);
  Node* find(const std::string& name) const;
  const std::vector<std::unique_ptr<Parameter>>& entries() const {
    return entries_;
  }
  void zero_grads();
  // Allocates a zero gradient for every parameter that has none, so an
  // optimizer step can run even when parts of the model sat outside the
  // current graph.
  void ensure_grads();
  std::size_t count() const { return entries_.size(); }
  std::size_t scalar_count() const;
  // Copies values by name; both stores must hold identical parameter sets.
  void copy_values_from(const ParamStore& other);

 private:
  Rng rng_;
  std::vector<std::unique_ptr<Parameter>> entries_;
  std::unordered_map<std::string, Parameter*> by_name_;
};

// Runtime context for a forward pass. Dropout draws from `rng` only when
// `training` is set; evaluation passes are deterministic and rng-free.
struct Ctx {
  bool training = false;
  Rng* rng = nullptr;
};

Node* dropout(Tape& t, Node* x, double rate, Ctx& ctx);

// SELU-preserving dropout: dropped units are set to -lambda*alpha and the
// result is affinely rescaled so mean and variance are kept.
Node* alpha_dropout(Tape& t, Node* x, double rate, Ctx& ctx);

struct Linear {
  Node* w = nullptr;  // (in x out)
  Node* b = nullptr;  // (1 x out)

  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, int in, int out);
  Node* operator()(Tape& t, Node* x) const;
};

struct LayerNorm {
  Node* gamma = nullptr;
  Node* beta = nullptr;

  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& name, int dim);
  Node* operator()(Tape& t, Node* x) const;
};

// Multi-head attention with learned q/k/v/output projections. Self-attention
// passes the same node for `q_in` and `kv_in`; cross-attention passes the
// memory as `kv_in`.
struct MultiHeadAttention {
  Linear wq, wk, wv, wo;
  int heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& ps, const std::string& name, int dim,
                     int heads);
  Node* operator()(Tape& t, Node* q_in, Node* kv_in) const;
};

// Self-normalizing block: linear, SELU, alpha-dropout.
struct SnnBlock {
  Linear fc;
  double rate = 0.0;

  SnnBlock() = default;
  SnnBlock(ParamStore& ps, const std::string& name, int in, int out,
           double dropout_rate);
  Node* operator()(Tape& t, Node* x, Ctx& ctx) const;
};

// Pre-norm transformer encoder block: self-attention then a GELU MLP, each
// wrapped in a residual with dropout on the sublayer output.
struct EncoderBlock {
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  Linear mlp1, mlp2;
  double rate = 0.0;

  EncoderBlock() = default;
  EncoderBlock(ParamStore& ps, const std::string& name, int dim, int heads,
               int mlp_dim, double dropout_rate);
  Node* operator()(Tape& t, Node* x, Ctx& ctx) const;
};

// Pre-norm decoder block: cross-attention to the memory, self-attention,
// then a GELU MLP, each residual.
struct DecoderBlock {
  LayerNorm ln1, ln2, ln3;
  MultiHeadAttention cross, self;
  Linear mlp1, mlp2;
  double rate = 0.0;

  DecoderBlock() = default;
  DecoderBlock(ParamStore& ps, const std::string& name, int dim, int heads,
               int mlp_dim, double dropout_rate);
  Node* operator()(Tape& t, Node* x, Node* memory, Ctx& ctx) const;
};

}  // namespace momics::nn
