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

#include <cmath>
#include <vector>

#include "core/optim.hpp"
#include "core/tokenizers.hpp"
#include "doctest.h"

using namespace momics;

namespace {

Mat random_patches(int n, int dim, std::uint64_t seed) {
  Rng rng(seed);
  Mat m(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = rng.normal();
  return m;
}

Mat permute_rows(const Mat& m, const std::vector<int>& perm) {
  Mat out(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(perm[i]);
  return out;
}

data::GroupingScheme rna_scheme() {
  data::GroupingScheme scheme;
  scheme.modality = Omics::Rna;
  scheme.feature_count = 10;
  scheme.groups = {{"a", {0, 2, 4}}, {"b", {1, 2, 5}}, {"c", {6, 7}}};
  return scheme;
}

}  // namespace

TEST_CASE("prototype tokenizer output does not depend on patch order") {
  nn::ParamStore ps{Rng(3)};
  tok::PrototypeTokenizer tokzer(ps, "tok", 6, 12, 16, 4);

  Mat patches = random_patches(40, 12, 11);
  std::vector<int> perm(40);
  for (int i = 0; i < 40; ++i) perm[i] = (i * 7 + 3) % 40;

  nn::Tape t;
  Mat a = tokzer(t, t.constant(patches))->value;
  Mat b = tokzer(t, t.constant(permute_rows(patches, perm)))->value;
  REQUIRE(a.rows() == 6);
  REQUIRE(a.cols() == 16);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("prototype token count is fixed regardless of patch count") {
  nn::ParamStore ps{Rng(5)};
  tok::PrototypeTokenizer tokzer(ps, "tok", 8, 6, 12, 2);
  nn::Tape t;
  for (int n : {1, 13, 400}) {
    nn::Node* out = tokzer(t, t.constant(random_patches(n, 6, 77 + n)));
    CHECK(out->rows() == 8);
    CHECK(out->cols() == 12);
  }
  CHECK_THROWS_AS(tokzer(t, t.constant(Mat(0, 6))), Error);
}

TEST_CASE("single patch collapses attention onto its value vector") {
  nn::ParamStore ps{Rng(9)};
  tok::PrototypeTokenizer tokzer(ps, "tok", 5, 7, 8, 2);
  nn::Tape t;
  nn::Node* out = tokzer(t, t.constant(random_patches(1, 7, 123)));
  // With one key the softmax is 1, so every token is prototype + value row.
  Mat residue = out->value - tokzer.prototypes->value;
  for (int i = 1; i < residue.rows(); ++i) {
    CHECK((residue.row(i) - residue.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("abmil pooling reduces to the embedded patch when trivial") {
  nn::ParamStore ps{Rng(21)};
  tok::AbmilPool pool(ps, "pool", 9, 6);
  Mat one = random_patches(1, 9, 5);

  nn::Tape t;
  Mat pooled = pool(t, t.constant(one))->value;
  Mat embedded = pool.embed(t, t.constant(one))->value;
  REQUIRE(pooled.rows() == 1);
  REQUIRE(pooled.cols() == 6);
  CHECK((pooled - embedded).cwiseAbs().maxCoeff() < 1e-12);

  Mat repeated = one.replicate(17, 1);
  Mat pooled_rep = pool(t, t.constant(repeated))->value;
  CHECK((pooled_rep - embedded).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(pool(t, t.constant(Mat(0, 9))), Error);
}

TEST_CASE("abmil pooling does not depend on patch order") {
  nn::ParamStore ps{Rng(33)};
  tok::AbmilPool pool(ps, "pool", 5, 8);
  Mat patches = random_patches(25, 5, 6);
  std::vector<int> perm(25);
  for (int i = 0; i < 25; ++i) perm[i] = (i * 11 + 2) % 25;

  nn::Tape t;
  Mat a = pool(t, t.constant(patches))->value;
  Mat b = pool(t, t.constant(permute_rows(patches, perm)))->value;
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("omics tokenizer emits one token per group") {
  nn::ParamStore ps{Rng(41)};
  tok::OmicsGroupTokenizer tokzer(ps, "rna", rna_scheme(), 12, 0.0);
  nn::Ctx ctx;

  Rng rng(8);
  Mat profile(1, 10);
  for (int j = 0; j < 10; ++j) profile(0, j) = rng.uniform(0.0, 3.0);

  nn::Tape t;
  nn::Node* out = tokzer(t, t.constant(profile), ctx);
  CHECK(out->rows() == 3);
  CHECK(out->cols() == 12);

  Mat wrong(1, 9);
  wrong.setZero();
  CHECK_THROWS_AS(tokzer(t, t.constant(wrong), ctx), Error);
  Mat two_rows = Mat::Zero(2, 10);
  CHECK_THROWS_AS(tokzer(t, t.constant(two_rows), ctx), Error);
}

TEST_CASE("features outside every group cannot affect the tokens") {
  nn::ParamStore ps{Rng(43)};
  tok::OmicsGroupTokenizer tokzer(ps, "rna", rna_scheme(), 6, 0.0);
  nn::Ctx ctx;

  Mat profile(1, 10);
  for (int j = 0; j < 10; ++j) profile(0, j) = 0.1 * (j + 1);
  Mat tweaked = profile;
  tweaked(0, 8) = 99.0;  // indices 8 and 9 belong to no group
  tweaked(0, 9) = -99.0;

  nn::Tape t;
  Mat a = tokzer(t, t.constant(profile), ctx)->value;
  Mat b = tokzer(t, t.constant(tweaked), ctx)->value;
  CHECK((a.array() == b.array()).all());
}

TEST_CASE("zero-bias snn tokens vanish on a zero profile") {
  nn::ParamStore ps{Rng(47)};
  tok::OmicsGroupTokenizer tokzer(ps, "rna", rna_scheme(), 6, 0.0);
  nn::Ctx ctx;
  nn::Tape t;
  Mat out = tokzer(t, t.constant(Mat::Zero(1, 10)), ctx)->value;
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tokenizer gradients match finite differences") {
  nn::ParamStore ps{Rng(51)};
  tok::PrototypeTokenizer proto(ps, "proto", 3, 5, 8, 2);
  tok::AbmilPool pool(ps, "pool", 5, 8);
  tok::OmicsGroupTokenizer omics(ps, "rna", rna_scheme(), 8, 0.0);
  nn::Ctx ctx;

  Mat patches = random_patches(6, 5, 91);
  Mat profile = random_patches(1, 10, 92).cwiseAbs();
  Mat readout_a = random_patches(3, 8, 93);
  Mat readout_b = random_patches(1, 8, 94);
  Mat readout_c = random_patches(3, 8, 95);

  auto build = [&](nn::Tape& t) {
    nn::Node* pa = proto(t, t.constant(patches));
    nn::Node* pb = pool(t, t.constant(patches));
    nn::Node* pc = omics(t, t.constant(profile), ctx);
    nn::Node* loss = nn::sum_all(t, nn::mul(t, pa, t.constant(readout_a)));
    loss = nn::add(t, loss,
                   nn::sum_all(t, nn::mul(t, pb, t.constant(readout_b))));
    return nn::add(t, loss,
                   nn::sum_all(t, nn::mul(t, pc, t.constant(readout_c))));
  };

  auto loss_fn = [&]() {
    nn::Tape t;
    return build(t)->value(0, 0);
  };
  auto grad_fn = [&]() {
    nn::Tape t;
    ps.zero_grads();
    t.backward(build(t));
  };
  nn::GradCheckReport rep = nn::grad_check(ps, loss_fn, grad_fn, 1e-5, 20);
  CHECK(rep.max_rel_err < 1e-4);
  CHECK(rep.checked > 0);
}
