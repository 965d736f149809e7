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
#include <functional>
#include <vector>

#include "core/optim.hpp"
#include "core/rng.hpp"
#include "doctest.h"

namespace nn = momics::nn;
using momics::Mat;
using momics::Rng;

namespace {

Mat random_mat(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

// Finite-difference check of one op composed into a scalar loss. `build`
// maps the parameter nodes to the op output; the loss is a fixed random
// weighted sum so every output coordinate influences it.
void fd_check(
    const std::vector<std::pair<Eigen::Index, Eigen::Index>>& shapes,
    const std::function<nn::Node*(nn::Tape&, const std::vector<nn::Node*>&)>&
        build,
    double tol = 1e-7, std::uint64_t seed = 21) {
  Rng rng(seed);
  nn::ParamStore ps(rng.derive("init"));
  std::vector<nn::Node*> params;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    nn::Node* p = ps.create("p" + std::to_string(i), shapes[i].first,
                            shapes[i].second, nn::Init::Normal002);
    p->value = random_mat(rng, shapes[i].first, shapes[i].second);
    params.push_back(p);
  }
  Mat weights;
  const auto loss_value = [&]() {
    nn::Tape t;
    nn::Node* out = build(t, params);
    if (weights.size() == 0) {
      Rng wr(seed + 1);
      weights = random_mat(wr, out->rows(), out->cols());
    }
    nn::Node* w = t.constant(weights);
    return nn::sum_all(t, nn::mul(t, out, w))->value(0, 0);
  };
  const auto grads = [&]() {
    nn::Tape t;
    nn::Node* out = build(t, params);
    nn::Node* w = t.constant(weights);
    nn::Node* loss = nn::sum_all(t, nn::mul(t, out, w));
    ps.zero_grads();
    t.backward(loss);
  };
  loss_value();  // fixes the loss weights to the output shape
  const nn::GradCheckReport rep = nn::grad_check(ps, loss_value, grads);
  INFO("worst " << rep.worst << " rel err " << rep.max_rel_err);
  CHECK(rep.max_rel_err < tol);
  CHECK(rep.checked > 0);
}

}  // namespace

TEST_CASE("backward on a quadratic gives exactly 2w") {
  Rng rng(3);
  nn::ParamStore ps(rng);
  nn::Node* w = ps.create("w", 3, 2, nn::Init::Normal002);
  w->value << 1.0, -2.0, 0.5, 3.0, -1.5, 0.25;

  nn::Tape t;
  nn::Node* loss = nn::sum_all(t, nn::mul(t, w, w));
  ps.zero_grads();
  t.backward(loss);
  CHECK((w->grad() - 2.0 * w->value).cwiseAbs().maxCoeff() == 0.0);

  const auto loss_fn = [&]() {
    nn::Tape tape;
    return nn::sum_all(tape, nn::mul(tape, w, w))->value(0, 0);
  };
  const auto grad_fn = [&]() {
    nn::Tape tape;
    nn::Node* l = nn::sum_all(tape, nn::mul(tape, w, w));
    ps.zero_grads();
    tape.backward(l);
  };
  const nn::GradCheckReport rep = nn::grad_check(ps, loss_fn, grad_fn);
  CHECK(rep.max_rel_err < 1e-8);
}

TEST_CASE("selu gradient matches finite differences away from the kink") {
  Rng rng(4);
  nn::ParamStore ps(rng);
  nn::Node* w = ps.create("w", 4, 4, nn::Init::Normal002);
  w->value = random_mat(rng, 4, 4);  // grad_check skips |x| near 0

  const auto loss_fn = [&]() {
    nn::Tape t;
    return nn::sum_all(t, nn::selu(t, w))->value(0, 0);
  };
  const auto grad_fn = [&]() {
    nn::Tape t;
    nn::Node* l = nn::sum_all(t, nn::selu(t, w));
    ps.zero_grads();
    t.backward(l);
  };
  const nn::GradCheckReport rep = nn::grad_check(ps, loss_fn, grad_fn);
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("matmul and transpose gradients") {
  fd_check({{3, 4}, {4, 2}}, [](nn::Tape& t, const std::vector<nn::Node*>& p) {
    return nn::matmul(t, p[0], p[1]);
  });
  fd_check({{3, 4}, {3, 2}}, [](nn::Tape& t, const std::vector<nn::Node*>& p) {
    return nn::matmul(t, p[0], p[1], true, false);  // a^T b
  });
  fd_check({{3, 4}, {2, 4}}, [](nn::Tape& t, const std::vector<nn::Node*>& p) {
    return nn::matmul(t, p[0], p[1], false, true);  // a b^T
  });
  fd_check({{3, 4}}, [](nn::Tape& t, const std::vector<nn::Node*>& p) {
    return nn::transpose(t, p[0]);
  });
}

TEST_CASE("elementwise and broadcast gradients") {
  fd_check({{3, 4}, {3, 4}},
           [](nn::Tape& t, const std::vector<nn::Node*>& p) {
             return nn::add(t, p[0], p[1]);
           });
  fd_check({{3, 4}, {3, 4}},
           [](nn::Tape& t, const std::vector<nn::Node*>& p) {
             return nn::sub(t, p[0], p[1]);
           });
  fd_check({{3, 4}, {3, 4}},
           [](nn::Tape& t, const std::vector<nn::Node*>& p) {
             return nn::mul(t, p[0], p[1]);
           });
  fd_check({{3, 4}}, [](nn::Tape& t, const std::vector<nn::Node*>& p) {
    return nn::scale(t, p[0], -2.5);
  });
  fd_check({{3, 4}, {1, 4}},
           [](nn::Tape& t, const std::vector<nn::Node*>& p) {
             return nn::add_rowvec(t, p[0], p[1]);
           });
  fd_check({{3, 4}, {1, 4}},
           [](nn::Tape& t, const std::vector<nn::Node*>& p) {
             return nn::mul_rowvec(t, p[0], p[1]);
           });
}

TEST_CASE("concat, slice, and select gradients") {
  fd_check({{2, 3}, {4, 3}},
           [](nn::Tape& t, const std::vector<nn::Node*>& p) {
             return nn::concat_rows(t, {p[0], p[1]});
           });
  fd_check({{3, 2}, {3, 4}},
           [](nn::Tape& t, const std::vector<nn::Node*>& p) {
             return nn::concat_cols(t, {p[0], p[1]});
           });
  fd_check({{5, 3}}, [](nn::Tape& t, const std::vector<nn::Node*>& p) {
    return nn::slice_rows(t, p[0], 1, 3);
  });
  fd_check({{3, 5}}, [](nn::Tape& t, const std::vector<nn::Node*>& p) {
    return nn::slice_cols(t, p[0], 2, 2);
  });
  fd_check({{4, 3}}, [](nn::Tape& t, const std::vector<nn::Node*>& p) {
    return nn::select_rows(t, p[0], {2, 0, 2, 3});  // duplicates accumulate
  });
  fd_check({{3, 4}}, [](nn::Tape& t, const std::vector<nn::Node*>& p) {
    return nn::select_cols(t, p[0], {1, 1, 3});
  });
}

TEST_CASE("nonlinearity gradients") {
  fd_check({{3, 4}}, [](nn::Tape& t, const std::vector<nn::Node*>& p) {
    return nn::tanh(t, p[0]);
  });
  fd_check({{3, 4}}, [](nn::Tape& t, const std::vector<nn::Node*>& p) {
    return nn::sigmoid(t, p[0]);
  });
  fd_check({{3, 4}}, [](nn::Tape& t, const std::vector<nn::Node*>& p) {
    return nn::gelu(t, p[0]);
  }, 1e-6);
  fd_check({{3, 4}}, [](nn::Tape& t, const std::vector<nn::Node*>& p) {
    return nn::softplus(t, p[0]);
  });
  fd_check({{3, 4}}, [](nn::Tape& t, const std::vector<nn::Node*>& p) {
    return nn::abs(t, p[0]);
  });
  fd_check({{4, 5}}, [](nn::Tape& t, const std::vector<nn::Node*>& p) {
    return nn::softmax_rows(t, p[0]);
  }, 1e-6);
  fd_check({{4, 5}}, [](nn::Tape& t, const std::vector<nn::Node*>& p) {
    return nn::layer_norm_rows(t, p[0], 1e-8);
  }, 1e-6);
  fd_check({{4, 5}}, [](nn::Tape& t, const std::vector<nn::Node*>& p) {
    return nn::logsumexp_rows(t, p[0]);
  });
  fd_check({{4, 5}}, [](nn::Tape& t, const std::vector<nn::Node*>& p) {
    return nn::mean_all(t, p[0]);
  });
}

TEST_CASE("attention gradient") {
  fd_check({{3, 8}, {5, 8}, {5, 8}},
           [](nn::Tape& t, const std::vector<nn::Node*>& p) {
             return nn::scaled_dot_attention(t, p[0], p[1], p[2], 2);
           },
           1e-6);
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(5);
  nn::Tape t;
  nn::Node* x = t.constant(10.0 * random_mat(rng, 6, 9));
  nn::Node* s = nn::softmax_rows(t, x);
  for (Eigen::Index i = 0; i < s->rows(); ++i) {
    CHECK(std::abs(s->value.row(i).sum() - 1.0) < 1e-12);
    CHECK(s->value.row(i).minCoeff() >= 0.0);
  }
}

TEST_CASE("layer norm rows have zero mean and unit variance") {
  Rng rng(6);
  nn::Tape t;
  nn::Node* x = t.constant(random_mat(rng, 5, 16) * 3.0);
  nn::Node* y = nn::layer_norm_rows(t, x, 1e-8);
  for (Eigen::Index i = 0; i < y->rows(); ++i) {
    const double mean = y->value.row(i).mean();
    const double var =
        (y->value.row(i).array() - mean).square().sum() / y->cols();
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(var - 1.0) < 1e-6);
  }
}

TEST_CASE("attention saturates onto the matching key") {
  // One query equal to one of several orthogonal keys, scaled large: softmax
  // concentrates all weight on that key's value row.
  const int d = 4;
  Mat keys = Mat::Identity(d, d) * 40.0;
  Mat values(d, d);
  Rng rng(7);
  values = random_mat(rng, d, d);

  nn::Tape t;
  nn::Node* q = t.constant(Mat(keys.row(2)));
  nn::Node* k = t.constant(keys);
  nn::Node* v = t.constant(values);
  nn::Node* out = nn::scaled_dot_attention(t, q, k, v, 1);
  CHECK((out->value.row(0) - values.row(2)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("attention over identical values returns that value") {
  Rng rng(8);
  Mat v_row = random_mat(rng, 1, 8);
  Mat values = v_row.replicate(5, 1);
  nn::Tape t;
  nn::Node* q = t.constant(random_mat(rng, 3, 8));
  nn::Node* k = t.constant(random_mat(rng, 5, 8));
  nn::Node* out = nn::scaled_dot_attention(t, q, k, t.constant(values), 2);
  for (Eigen::Index i = 0; i < out->rows(); ++i) {
    CHECK((out->value.row(i) - v_row).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("attention weight rows sum to one per head") {
  // With per-head values set to the identity, the output block of each head
  // equals that head's attention weights.
  const int nk = 4;
  Rng rng(9);
  Mat values(nk, 2 * nk);
  values << Mat::Identity(nk, nk), Mat::Identity(nk, nk);
  nn::Tape t;
  nn::Node* q = t.constant(random_mat(rng, 4, 8));
  nn::Node* k = t.constant(random_mat(rng, 4, 8));
  nn::Node* out = nn::scaled_dot_attention(t, q, k, t.constant(values), 2);
  for (Eigen::Index i = 0; i < out->rows(); ++i) {
    CHECK(std::abs(out->value.row(i).segment(0, nk).sum() - 1.0) < 1e-12);
    CHECK(std::abs(out->value.row(i).segment(nk, nk).sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("attention rejects bad shapes") {
  nn::Tape t;
  nn::Node* q = t.constant(Mat::Zero(2, 6));
  nn::Node* k = t.constant(Mat::Zero(3, 6));
  nn::Node* v = t.constant(Mat::Zero(3, 6));
  CHECK_THROWS_AS(nn::scaled_dot_attention(t, q, k, v, 4),
                  momics::Error);  // heads must divide d
  nn::Node* v_bad = t.constant(Mat::Zero(2, 6));
  CHECK_THROWS_AS(nn::scaled_dot_attention(t, q, k, v_bad, 2), momics::Error);
}

TEST_CASE("backward requires a scalar loss") {
  nn::Tape t;
  nn::Node* x = t.constant(Mat::Zero(2, 2));
  CHECK_THROWS_AS(t.backward(x), momics::Error);
}

TEST_CASE("gradients accumulate across two uses of one parameter") {
  Rng rng(10);
  nn::ParamStore ps(rng);
  nn::Node* w = ps.create("w", 2, 2, nn::Init::Normal002);
  w->value << 1.0, 2.0, 3.0, 4.0;

  nn::Tape t;
  // loss = sum(w) + sum(w*w): grad = 1 + 2w
  nn::Node* loss =
      nn::add(t, nn::sum_all(t, w), nn::sum_all(t, nn::mul(t, w, w)));
  ps.zero_grads();
  t.backward(loss);
  const Mat want = Mat::Ones(2, 2) + 2.0 * w->value;
  CHECK((w->grad() - want).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identical runs produce bit-identical values and gradients") {
  const auto run = [](Mat& grad_out) {
    Rng rng(11);
    nn::ParamStore ps(rng);
    nn::Node* w = ps.create("w", 3, 3, nn::Init::LeCunNormal);
    nn::Tape t;
    nn::Node* h = nn::gelu(t, nn::matmul(t, w, w));
    nn::Node* loss = nn::mean_all(t, nn::softmax_rows(t, h));
    ps.zero_grads();
    t.backward(loss);
    grad_out = w->grad();
    return loss->value(0, 0);
  };
  Mat g1, g2;
  const double l1 = run(g1);
  const double l2 = run(g2);
  CHECK(l1 == l2);
  CHECK((g1 - g2).cwiseAbs().maxCoeff() == 0.0);
}
