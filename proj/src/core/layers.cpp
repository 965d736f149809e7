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

#include "core/layers.hpp"

#include <cmath>

namespace momics::nn {

Node* ParamStore::create(const std::string& name, Eigen::Index rows,
                         Eigen::Index cols, Init init) {
  if (by_name_.count(name) != 0) {
    throw_internal("duplicate parameter name: " + name);
  }
  Mat v(rows, cols);
  switch (init) {
    case Init::Zero:
      v.setZero();
      break;
    case Init::One:
      v.setOnes();
      break;
    case Init::LeCunNormal: {
      Rng r = rng_.derive(name);
      const double sd = 1.0 / std::sqrt(static_cast<double>(rows));
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) v(i, j) = sd * r.normal();
      break;
    }
    case Init::Normal002: {
      Rng r = rng_.derive(name);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) v(i, j) = 0.02 * r.normal();
      break;
    }
  }
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->node = Node(std::move(v), true);
  Parameter* raw = p.get();
  entries_.push_back(std::move(p));
  by_name_[name] = raw;
  return &raw->node;
}

Node* ParamStore::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : &it->second->node;
}

void ParamStore::zero_grads() {
  for (auto& p : entries_) p->node.zero_grad();
}

void ParamStore::ensure_grads() {
  for (auto& p : entries_) p->node.grad();
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : entries_) n += static_cast<std::size_t>(p->node.value.size());
  return n;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.entries_.size() != entries_.size()) {
    throw_internal("copy_values_from: parameter sets differ in size");
  }
  for (auto& p : entries_) {
    auto it = other.by_name_.find(p->name);
    if (it == other.by_name_.end()) {
      throw_internal("copy_values_from: missing parameter " + p->name);
    }
    const Mat& src = it->second->node.value;
    if (src.rows() != p->node.value.rows() ||
        src.cols() != p->node.value.cols()) {
      throw_internal("copy_values_from: shape mismatch for " + p->name);
    }
    p->node.value = src;
  }
}

Node* dropout(Tape& t, Node* x, double rate, Ctx& ctx) {
  if (!ctx.training || rate <= 0.0) return x;
  if (ctx.rng == nullptr) throw_internal("dropout: training ctx without rng");
  const double keep = 1.0 - rate;
  Mat m(x->rows(), x->cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = ctx.rng->uniform() < rate ? 0.0 : 1.0 / keep;
  return mul(t, x, t.constant(std::move(m)));
}

Node* alpha_dropout(Tape& t, Node* x, double rate, Ctx& ctx) {
  if (!ctx.training || rate <= 0.0) return x;
  if (ctx.rng == nullptr) {
    throw_internal("alpha_dropout: training ctx without rng");
  }
  const double q = 1.0 - rate;
  const double ap = -kSeluLambda * kSeluAlpha;
  const double a = 1.0 / std::sqrt(q + ap * ap * q * (1.0 - q));
  const double b = -a * (1.0 - q) * ap;
  Mat keep(x->rows(), x->cols());
  for (Eigen::Index i = 0; i < keep.rows(); ++i)
    for (Eigen::Index j = 0; j < keep.cols(); ++j)
      keep(i, j) = ctx.rng->uniform() < rate ? 0.0 : 1.0;
  // out = a*(x*m + ap*(1-m)) + b, folded so only one graph multiply is needed
  Mat offset = (a * ap) * (Mat::Ones(keep.rows(), keep.cols()) - keep);
  offset.array() += b;
  Node* masked = mul(t, x, t.constant(a * keep));
  return add(t, masked, t.constant(std::move(offset)));
}

Linear::Linear(ParamStore& ps, const std::string& name, int in, int out) {
  w = ps.create(name + ".w", in, out, Init::LeCunNormal);
  b = ps.create(name + ".b", 1, out, Init::Zero);
}

Node* Linear::operator()(Tape& t, Node* x) const {
  return add_rowvec(t, matmul(t, x, w), b);
}

LayerNorm::LayerNorm(ParamStore& ps, const std::string& name, int dim) {
  gamma = ps.create(name + ".g", 1, dim, Init::One);
  beta = ps.create(name + ".b", 1, dim, Init::Zero);
}

Node* LayerNorm::operator()(Tape& t, Node* x) const {
  Node* n = layer_norm_rows(t, x, kLayerNormEps);
  return add_rowvec(t, mul_rowvec(t, n, gamma), beta);
}

MultiHeadAttention::MultiHeadAttention(ParamStore& ps, const std::string& name,
                                       int dim, int h)
    : wq(ps, name + ".q", dim, dim),
      wk(ps, name + ".k", dim, dim),
      wv(ps, name + ".v", dim, dim),
      wo(ps, name + ".o", dim, dim),
      heads(h) {}

Node* MultiHeadAttention::operator()(Tape& t, Node* q_in, Node* kv_in) const {
  Node* q = wq(t, q_in);
  Node* k = wk(t, kv_in);
  Node* v = wv(t, kv_in);
  return wo(t, scaled_dot_attention(t, q, k, v, heads));
}

SnnBlock::SnnBlock(ParamStore& ps, const std::string& name, int in, int out,
                   double dropout_rate)
    : fc(ps, name, in, out), rate(dropout_rate) {}

Node* SnnBlock::operator()(Tape& t, Node* x, Ctx& ctx) const {
  return alpha_dropout(t, selu(t, fc(t, x)), rate, ctx);
}

EncoderBlock::EncoderBlock(ParamStore& ps, const std::string& name, int dim,
                           int heads, int mlp_dim, double dropout_rate)
    : ln1(ps, name + ".ln1", dim),
      ln2(ps, name + ".ln2", dim),
      attn(ps, name + ".attn", dim, heads),
      mlp1(ps, name + ".mlp1", dim, mlp_dim),
      mlp2(ps, name + ".mlp2", mlp_dim, dim),
      rate(dropout_rate) {}

Node* EncoderBlock::operator()(Tape& t, Node* x, Ctx& ctx) const {
  Node* h = ln1(t, x);
  x = add(t, x, dropout(t, attn(t, h, h), rate, ctx));
  Node* m = mlp2(t, gelu(t, mlp1(t, ln2(t, x))));
  return add(t, x, dropout(t, m, rate, ctx));
}

DecoderBlock::DecoderBlock(ParamStore& ps, const std::string& name, int dim,
                           int heads, int mlp_dim, double dropout_rate)
    : ln1(ps, name + ".ln1", dim),
      ln2(ps, name + ".ln2", dim),
      ln3(ps, name + ".ln3", dim),
      cross(ps, name + ".cross", dim, heads),
      self(ps, name + ".self", dim, heads),
      mlp1(ps, name + ".mlp1", dim, mlp_dim),
      mlp2(ps, name + ".mlp2", mlp_dim, dim),
      rate(dropout_rate) {}

Node* DecoderBlock::operator()(Tape& t, Node* x, Node* memory,
                               Ctx& ctx) const {
  x = add(t, x, dropout(t, cross(t, ln1(t, x), memory), rate, ctx));
  Node* h = ln2(t, x);
  x = add(t, x, dropout(t, self(t, h, h), rate, ctx));
  Node* m = mlp2(t, gelu(t, mlp1(t, ln3(t, x))));
  return add(t, x, dropout(t, m, rate, ctx));
}

}  // namespace momics::nn
