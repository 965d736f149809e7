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

#include "core/autodiff.hpp"

#include <cmath>
#include <utility>

namespace momics::nn {

namespace {

void check_same_shape(const char* op, const Node* a, const Node* b) {
  if (a->rows() != b->rows() || a->cols() != b->cols()) {
    throw_internal(std::string(op) + ": shape mismatch (" +
                   std::to_string(a->rows()) + "x" + std::to_string(a->cols()) +
                   " vs " + std::to_string(b->rows()) + "x" +
                   std::to_string(b->cols()) + ")");
  }
}

}  // namespace

Node* Tape::make(Mat value, bool requires_grad,
                 std::function<void()> backprop) {
  auto node = std::make_unique<Node>(std::move(value), requires_grad);
  node->backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return nodes_.back().get();
}

void Tape::backward(Node* loss) {
  if (loss->rows() != 1 || loss->cols() != 1) {
    throw_internal("backward: loss must be 1x1");
  }
  loss->grad()(0, 0) += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node* n = it->get();
    if (n->backprop && n->has_grad()) n->backprop();
  }
}

void Tape::clear() { nodes_.clear(); }

Node* matmul(Tape& t, Node* a, Node* b, bool trans_a, bool trans_b) {
  const Eigen::Index ar = trans_a ? a->cols() : a->rows();
  const Eigen::Index ac = trans_a ? a->rows() : a->cols();
  const Eigen::Index br = trans_b ? b->cols() : b->rows();
  const Eigen::Index bc = trans_b ? b->rows() : b->cols();
  if (ac != br) {
    throw_internal("matmul: inner dims differ (" + std::to_string(ac) +
                   " vs " + std::to_string(br) + ")");
  }
  Mat v(ar, bc);
  if (!trans_a && !trans_b) {
    v.noalias() = a->value * b->value;
  } else if (trans_a && !trans_b) {
    v.noalias() = a->value.transpose() * b->value;
  } else if (!trans_a && trans_b) {
    v.noalias() = a->value * b->value.transpose();
  } else {
    v.noalias() = a->value.transpose() * b->value.transpose();
  }
  bool rg = a->requires_grad || b->requires_grad;
  Node* out = t.make(std::move(v), rg);
  if (rg) {
    out->backprop = [a, b, out, trans_a, trans_b]() {
      const Mat& g = out->grad();
      if (a->requires_grad) {
        if (!trans_a && !trans_b) {
          a->grad().noalias() += g * b->value.transpose();
        } else if (trans_a && !trans_b) {
          a->grad().noalias() += b->value * g.transpose();
        } else if (!trans_a && trans_b) {
          a->grad().noalias() += g * b->value;
        } else {
          a->grad().noalias() += b->value.transpose() * g.transpose();
        }
      }
      if (b->requires_grad) {
        if (!trans_a && !trans_b) {
          b->grad().noalias() += a->value.transpose() * g;
        } else if (trans_a && !trans_b) {
          b->grad().noalias() += a->value * g;
        } else if (!trans_a && trans_b) {
          b->grad().noalias() += g.transpose() * a->value;
        } else {
          b->grad().noalias() += g.transpose() * a->value.transpose();
        }
      }
    };
  }
  return out;
}

Node* transpose(Tape& t, Node* a) {
  Node* out = t.make(a->value.transpose(), a->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, out]() { a->accumulate(out->grad().transpose()); };
  }
  return out;
}

Node* add(Tape& t, Node* a, Node* b) {
  check_same_shape("add", a, b);
  Node* out = t.make(a->value + b->value, a->requires_grad || b->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, b, out]() {
      a->accumulate(out->grad());
      b->accumulate(out->grad());
    };
  }
  return out;
}

Node* sub(Tape& t, Node* a, Node* b) {
  check_same_shape("sub", a, b);
  Node* out = t.make(a->value - b->value, a->requires_grad || b->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, b, out]() {
      a->accumulate(out->grad());
      b->accumulate(-out->grad());
    };
  }
  return out;
}

Node* mul(Tape& t, Node* a, Node* b) {
  check_same_shape("mul", a, b);
  Node* out = t.make(a->value.cwiseProduct(b->value),
                     a->requires_grad || b->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, b, out]() {
      a->accumulate(out->grad().cwiseProduct(b->value));
      b->accumulate(out->grad().cwiseProduct(a->value));
    };
  }
  return out;
}

Node* scale(Tape& t, Node* a, double s) {
  Node* out = t.make(a->value * s, a->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, out, s]() { a->accumulate(out->grad() * s); };
  }
  return out;
}

Node* add_rowvec(Tape& t, Node* a, Node* row) {
  if (row->rows() != 1 || row->cols() != a->cols()) {
    throw_internal("add_rowvec: row must be 1x" + std::to_string(a->cols()));
  }
  Mat v = a->value.rowwise() + row->value.row(0);
  Node* out = t.make(std::move(v), a->requires_grad || row->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, row, out]() {
      a->accumulate(out->grad());
      row->accumulate(out->grad().colwise().sum());
    };
  }
  return out;
}

Node* mul_rowvec(Tape& t, Node* a, Node* row) {
  if (row->rows() != 1 || row->cols() != a->cols()) {
    throw_internal("mul_rowvec: row must be 1x" + std::to_string(a->cols()));
  }
  Mat v = a->value.array().rowwise() * row->value.row(0).array();
  Node* out = t.make(std::move(v), a->requires_grad || row->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, row, out]() {
      if (a->requires_grad) {
        a->grad() +=
            (out->grad().array().rowwise() * row->value.row(0).array())
                .matrix();
      }
      if (row->requires_grad) {
        row->grad() +=
            (out->grad().array() * a->value.array()).colwise().sum().matrix();
      }
    };
  }
  return out;
}

Node* concat_rows(Tape& t, const std::vector<Node*>& parts) {
  if (parts.empty()) throw_internal("concat_rows: no parts");
  Eigen::Index cols = parts[0]->cols();
  Eigen::Index rows = 0;
  bool rg = false;
  for (Node* p : parts) {
    if (p->cols() != cols) throw_internal("concat_rows: column mismatch");
    rows += p->rows();
    rg = rg || p->requires_grad;
  }
  Mat v(rows, cols);
  Eigen::Index r = 0;
  for (Node* p : parts) {
    v.middleRows(r, p->rows()) = p->value;
    r += p->rows();
  }
  Node* out = t.make(std::move(v), rg);
  if (rg) {
    std::vector<Node*> ps = parts;
    out->backprop = [ps, out]() {
      Eigen::Index r = 0;
      for (Node* p : ps) {
        p->accumulate(out->grad().middleRows(r, p->rows()));
        r += p->rows();
      }
    };
  }
  return out;
}

Node* slice_rows(Tape& t, Node* a, int first, int count) {
  if (first < 0 || count < 0 || first + count > a->rows()) {
    throw_internal("slice_rows: range out of bounds");
  }
  Node* out = t.make(a->value.middleRows(first, count), a->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, out, first, count]() {
      a->grad().middleRows(first, count) += out->grad();
    };
  }
  return out;
}

Node* select_rows(Tape& t, Node* a, std::vector<int> index) {
  Mat v(static_cast<Eigen::Index>(index.size()), a->cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a->rows()) {
      throw_internal("select_rows: index out of bounds");
    }
    v.row(static_cast<Eigen::Index>(i)) = a->value.row(index[i]);
  }
  Node* out = t.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, out, idx = std::move(index)]() {
      Mat& g = a->grad();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        g.row(idx[i]) += out->grad().row(static_cast<Eigen::Index>(i));
      }
    };
  }
  return out;
}

Node* concat_cols(Tape& t, const std::vector<Node*>& parts) {
  if (parts.empty()) throw_internal("concat_cols: no parts");
  Eigen::Index rows = parts[0]->rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (Node* p : parts) {
    if (p->rows() != rows) throw_internal("concat_cols: row mismatch");
    cols += p->cols();
    rg = rg || p->requires_grad;
  }
  Mat v(rows, cols);
  Eigen::Index c = 0;
  for (Node* p : parts) {
    v.middleCols(c, p->cols()) = p->value;
    c += p->cols();
  }
  Node* out = t.make(std::move(v), rg);
  if (rg) {
    std::vector<Node*> ps = parts;
    out->backprop = [ps, out]() {
      Eigen::Index c = 0;
      for (Node* p : ps) {
        p->accumulate(out->grad().middleCols(c, p->cols()));
        c += p->cols();
      }
    };
  }
  return out;
}

Node* select_cols(Tape& t, Node* a, std::vector<int> index) {
  Mat v(a->rows(), static_cast<Eigen::Index>(index.size()));
  for (std::size_t j = 0; j < index.size(); ++j) {
    if (index[j] < 0 || index[j] >= a->cols()) {
      throw_internal("select_cols: index out of bounds");
    }
    v.col(static_cast<Eigen::Index>(j)) = a->value.col(index[j]);
  }
  Node* out = t.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, out, idx = std::move(index)]() {
      Mat& g = a->grad();
      for (std::size_t j = 0; j < idx.size(); ++j) {
        g.col(idx[j]) += out->grad().col(static_cast<Eigen::Index>(j));
      }
    };
  }
  return out;
}

Node* slice_cols(Tape& t, Node* a, int first, int count) {
  if (first < 0 || count < 0 || first + count > a->cols()) {
    throw_internal("slice_cols: range out of bounds");
  }
  Node* out = t.make(a->value.middleCols(first, count), a->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, out, first, count]() {
      a->grad().middleCols(first, count) += out->grad();
    };
  }
  return out;
}

Node* softmax_rows(Tape& t, Node* a) {
  Mat v(a->rows(), a->cols());
  for (Eigen::Index i = 0; i < a->rows(); ++i) {
    const double m = a->value.row(i).maxCoeff();
    Eigen::ArrayXd e = (a->value.row(i).array() - m).exp();
    v.row(i) = (e / e.sum()).matrix();
  }
  Node* out = t.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, out]() {
      const Mat& y = out->value;
      const Mat& gy = out->grad();
      Mat gx(y.rows(), y.cols());
      for (Eigen::Index i = 0; i < y.rows(); ++i) {
        const double dot = y.row(i).dot(gy.row(i));
        gx.row(i) =
            (y.row(i).array() * (gy.row(i).array() - dot)).matrix();
      }
      a->accumulate(gx);
    };
  }
  return out;
}

Node* layer_norm_rows(Tape& t, Node* a, double eps) {
  const Eigen::Index n = a->cols();
  Mat v(a->rows(), n);
  Vec inv_sd(a->rows());
  for (Eigen::Index i = 0; i < a->rows(); ++i) {
    const double mu = a->value.row(i).mean();
    Eigen::ArrayXd c = a->value.row(i).array() - mu;
    const double var = c.square().sum() / static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sd(i) = is;
    v.row(i) = (c * is).matrix();
  }
  Node* out = t.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, out, inv_sd = std::move(inv_sd), n]() {
      const Mat& y = out->value;
      const Mat& gy = out->grad();
      Mat gx(y.rows(), y.cols());
      const double inv_n = 1.0 / static_cast<double>(n);
      for (Eigen::Index i = 0; i < y.rows(); ++i) {
        const double mean_gy = gy.row(i).mean();
        const double mean_gy_y = gy.row(i).dot(y.row(i)) * inv_n;
        gx.row(i) = (inv_sd(i) *
                     (gy.row(i).array() - mean_gy - y.row(i).array() * mean_gy_y))
                        .matrix();
      }
      a->accumulate(gx);
    };
  }
  return out;
}

Node* tanh(Tape& t, Node* a) {
  Mat v = a->value.unaryExpr([](double x) { return std::tanh(x); });
  Node* out = t.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, out]() {
      Mat d = out->value.unaryExpr([](double y) { return 1.0 - y * y; });
      a->accumulate(out->grad().cwiseProduct(d));
    };
  }
  return out;
}

Node* selu(Tape& t, Node* a) {
  Mat v = a->value.unaryExpr([](double x) {
    return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
  });
  Node* out = t.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, out]() {
      Mat d = a->value.unaryExpr([](double x) {
        return x > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
      });
      a->accumulate(out->grad().cwiseProduct(d));
    };
  }
  return out;
}

Node* sigmoid(Tape& t, Node* a) {
  Mat v = a->value.unaryExpr([](double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                    : std::exp(x) / (1.0 + std::exp(x));
  });
  Node* out = t.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, out]() {
      Mat d = out->value.unaryExpr([](double y) { return y * (1.0 - y); });
      a->accumulate(out->grad().cwiseProduct(d));
    };
  }
  return out;
}

Node* gelu(Tape& t, Node* a) {
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  Mat v = a->value.unaryExpr([](double x) {
    return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  });
  Node* out = t.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, out]() {
      Mat d = a->value.unaryExpr([](double x) {
        const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        return cdf + x * pdf;
      });
      a->accumulate(out->grad().cwiseProduct(d));
    };
  }
  return out;
}

Node* softplus(Tape& t, Node* a) {
  Mat v = a->value.unaryExpr([](double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  });
  Node* out = t.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, out]() {
      Mat d = a->value.unaryExpr([](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                        : std::exp(x) / (1.0 + std::exp(x));
      });
      a->accumulate(out->grad().cwiseProduct(d));
    };
  }
  return out;
}

Node* abs(Tape& t, Node* a) {
  Node* out = t.make(a->value.cwiseAbs(), a->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, out]() {
      Mat d = a->value.unaryExpr(
          [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
      a->accumulate(out->grad().cwiseProduct(d));
    };
  }
  return out;
}

Node* logsumexp_rows(Tape& t, Node* a) {
  Mat v(a->rows(), 1);
  for (Eigen::Index i = 0; i < a->rows(); ++i) {
    const double m = a->value.row(i).maxCoeff();
    v(i, 0) = m + std::log((a->value.row(i).array() - m).exp().sum());
  }
  Node* out = t.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, out]() {
      Mat gx(a->rows(), a->cols());
      for (Eigen::Index i = 0; i < a->rows(); ++i) {
        gx.row(i) = ((a->value.row(i).array() - out->value(i, 0)).exp() *
                     out->grad()(i, 0))
                        .matrix();
      }
      a->accumulate(gx);
    };
  }
  return out;
}

Node* sum_all(Tape& t, Node* a) {
  Node* out = t.make(Mat::Constant(1, 1, a->value.sum()), a->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, out]() {
      a->grad().array() += out->grad()(0, 0);
    };
  }
  return out;
}

Node* mean_all(Tape& t, Node* a) {
  const double inv = 1.0 / static_cast<double>(a->value.size());
  Node* out = t.make(Mat::Constant(1, 1, a->value.sum() * inv),
                     a->requires_grad);
  if (out->requires_grad) {
    out->backprop = [a, out, inv]() {
      a->grad().array() += out->grad()(0, 0) * inv;
    };
  }
  return out;
}

Node* scaled_dot_attention(Tape& t, Node* q, Node* k, Node* v, int heads) {
  if (heads < 1) throw_internal("scaled_dot_attention: heads must be >= 1");
  const Eigen::Index d = q->cols();
  if (k->cols() != d || v->cols() != d) {
    throw_internal("scaled_dot_attention: q, k, v feature dims differ");
  }
  if (k->rows() != v->rows()) {
    throw_internal("scaled_dot_attention: k and v row counts differ");
  }
  if (d % heads != 0) {
    throw_internal("scaled_dot_attention: feature dim " + std::to_string(d) +
                   " not divisible by " + std::to_string(heads) + " heads");
  }
  const int dh = static_cast<int>(d) / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Node*> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Node* qh = slice_cols(t, q, h * dh, dh);
    Node* kh = slice_cols(t, k, h * dh, dh);
    Node* vh = slice_cols(t, v, h * dh, dh);
    Node* scores = scale(t, matmul(t, qh, kh, false, true), inv_sqrt_dh);
    Node* attn = softmax_rows(t, scores);
    outs.push_back(matmul(t, attn, vh));
  }
  return heads == 1 ? outs[0] : concat_cols(t, outs);
}

}  // namespace momics::nn
