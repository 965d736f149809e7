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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

#include "core/downstream.hpp"
#include "core/synth.hpp"
#include "doctest.h"

using namespace momics;
namespace fs = std::filesystem;
using downstream::DiscretizationRule;

namespace {

data::SurvivalLabel lab(double t, bool e) { return {t, e}; }

data::Cohort labeled_cohort(int n, std::uint64_t seed) {
  synth::SynthConfig sc;
  sc.num_patients = n;
  sc.latent_dim = 3;
  sc.wsi_latent_dim = 3;
  sc.patch_dim = 5;
  sc.patches_min = 3;
  sc.patches_max = 5;
  sc.feature_counts = {6, 4, 4};
  sc.group_counts = {3, 2, 2};
  sc.noise_std = {0.02, 0.02, 0.02};
  sc.patch_noise_std = 0.02;
  sc.risk_scale = 6.0;
  sc.seed = seed;
  data::Cohort cohort = synth::generate_cohort(sc);
  data::transform_cohort(cohort);
  return cohort;
}

model::ModelConfig tiny_model_config() {
  model::ModelConfig cfg;
  cfg.d = 16;
  cfg.heads = 2;
  cfg.mlp_dim = 24;
  cfg.dropout = 0.0;
  cfg.num_prototypes = 4;
  cfg.patch_sample = 5;
  cfg.patch_dim = 5;
  return cfg;
}

}  // namespace

TEST_CASE("quantile edges split 1..8 into four intervals") {
  std::vector<double> times{5, 1, 7, 3, 8, 2, 6, 4};
  DiscretizationRule rule = DiscretizationRule::quantiles(times, 4);
  REQUIRE(rule.num_intervals() == 4);
  CHECK(rule.edges == std::vector<double>{2, 4, 6, 8});

  CHECK(rule.interval_of(0.5) == 1);
  CHECK(rule.interval_of(2.0) == 1);  // left-open intervals: (0, 2]
  CHECK(rule.interval_of(2.1) == 2);
  CHECK(rule.interval_of(6.0) == 3);
  CHECK(rule.interval_of(8.0) == 4);

  long clamped = 0;
  CHECK(rule.interval_of(11.0, &clamped) == 4);
  CHECK(clamped == 1);
}

TEST_CASE("tied times cannot form strictly increasing edges") {
  std::vector<double> tied{1, 1, 1, 1, 2, 2, 2, 2};
  try {
    DiscretizationRule::quantiles(tied, 4);
    FAIL_CHECK("expected a data error for tied quantiles");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
    CHECK(std::string(e.what()).find("tied") != std::string::npos);
  }
  CHECK_THROWS_AS(DiscretizationRule::quantiles({}, 2), Error);
  CHECK_THROWS_AS(DiscretizationRule::quantiles({1, 2, 3}, 0), Error);
}

TEST_CASE("hazard likelihood matches the closed form for one sample") {
  // One interval, logit 0 => h = 1/2. Event: -log h = ln 2. The censored
  // case with q(i) = 1 and delta = 0 contributes -log(1 - h) = ln 2 too.
  DiscretizationRule rule;
  rule.edges = {1.0};
  nn::Tape t;

  nn::Node* logits = t.constant(Mat::Zero(1, 1));
  double ev = downstream::hazard_nll(t, logits, {lab(1.0, true)}, rule)
                  ->value(0, 0);
  CHECK(std::abs(ev - std::log(2.0)) < 1e-9);
  double cz = downstream::hazard_nll(t, logits, {lab(1.0, false)}, rule)
                  ->value(0, 0);
  CHECK(std::abs(cz - std::log(2.0)) < 1e-9);

  // Two samples average: (ln2 + ln2) / 2.
  nn::Node* two = t.constant(Mat::Zero(2, 1));
  double both =
      downstream::hazard_nll(t, two, {lab(1.0, true), lab(1.0, false)}, rule)
          ->value(0, 0);
  CHECK(std::abs(both - std::log(2.0)) < 1e-9);
}

TEST_CASE("hazard likelihood rewards confident correct hazards") {
  DiscretizationRule rule;
  rule.edges = {1.0, 2.0};
  nn::Tape t;
  // Event in interval 1: ideal logits are (+inf, anything); check monotone
  // improvement as the first logit grows.
  Mat weak(1, 2), strong(1, 2);
  weak << 1.0, 0.0;
  strong << 8.0, 0.0;
  double lw = downstream::hazard_nll(t, t.constant(weak), {lab(0.5, true)},
                                     rule)
                  ->value(0, 0);
  double ls = downstream::hazard_nll(t, t.constant(strong), {lab(0.5, true)},
                                     rule)
                  ->value(0, 0);
  CHECK(ls < lw);
  CHECK(ls < 1e-3);

  // Censored at the last interval: survival through both intervals, ideal
  // logits are very negative.
  Mat low = Mat::Constant(1, 2, -8.0);
  double lc = downstream::hazard_nll(t, t.constant(low), {lab(2.0, false)},
                                     rule)
                  ->value(0, 0);
  CHECK(lc < 1e-3);

  long clamped = 0;
  downstream::hazard_nll(t, t.constant(weak), {lab(9.0, true)}, rule,
                         &clamped);
  CHECK(clamped == 1);
}

TEST_CASE("hazard likelihood is invariant to sample order") {
  DiscretizationRule rule;
  rule.edges = {1.0, 2.0, 3.0};
  Rng rng(31);
  Mat logits(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) logits(i, j) = rng.normal();
  std::vector<data::SurvivalLabel> labels{lab(0.5, true), lab(1.5, false),
                                          lab(2.5, true), lab(3.0, false)};

  nn::Tape t;
  double a = downstream::hazard_nll(t, t.constant(logits), labels, rule)
                 ->value(0, 0);
  Mat rev = logits.colwise().reverse();
  std::vector<data::SurvivalLabel> rlabels(labels.rbegin(), labels.rend());
  double b = downstream::hazard_nll(t, t.constant(rev), rlabels, rule)
                 ->value(0, 0);
  CHECK(std::abs(a - b) < 1e-12);
}

TEST_CASE("risk score accumulates per-interval hazards") {
  Vec zeros = Vec::Zero(4);
  CHECK(downstream::risk_score(zeros) == doctest::Approx(2.0).epsilon(1e-12));
  Vec low = Vec::Constant(4, -40.0);
  CHECK(downstream::risk_score(low) < 1e-12);
  Vec a(3), b(3);
  a << 0.0, 1.0, -1.0;
  b << 0.5, 1.0, -1.0;
  CHECK(downstream::risk_score(b) > downstream::risk_score(a));
}

TEST_CASE("concordance index handles perfect, random, and empty cases") {
  SUBCASE("perfectly anti-monotone risks") {
    std::vector<double> risks{4, 3, 2, 1};
    std::vector<data::SurvivalLabel> labels{lab(1, true), lab(2, true),
                                            lab(3, true), lab(4, true)};
    downstream::CIndex ci = downstream::concordance_index(risks, labels);
    CHECK(ci.defined);
    CHECK(ci.value == doctest::Approx(1.0));
    CHECK(ci.comparable == 6);
  }
  SUBCASE("all risks tied") {
    std::vector<double> risks{1, 1, 1};
    std::vector<data::SurvivalLabel> labels{lab(1, true), lab(2, true),
                                            lab(3, true)};
    downstream::CIndex ci = downstream::concordance_index(risks, labels);
    CHECK(ci.defined);
    CHECK(ci.value == doctest::Approx(0.5));
  }
  SUBCASE("censoring removes pairs") {
    // Only (i=1 event, T=1) < others makes pairs.
    std::vector<double> risks{9, 1, 2};
    std::vector<data::SurvivalLabel> labels{lab(1, false), lab(2, true),
                                            lab(3, false)};
    downstream::CIndex ci = downstream::concordance_index(risks, labels);
    CHECK(ci.defined);
    CHECK(ci.comparable == 1);  // only (2) vs (3)
  }
  SUBCASE("undefined without comparable pairs") {
    std::vector<double> risks{1, 2};
    std::vector<data::SurvivalLabel> labels{lab(1, false), lab(2, false)};
    downstream::CIndex ci = downstream::concordance_index(risks, labels);
    CHECK_FALSE(ci.defined);
  }
  SUBCASE("random risks sit near one half") {
    Rng rng(77);
    std::vector<double> risks(1000);
    std::vector<data::SurvivalLabel> labels;
    for (int i = 0; i < 1000; ++i) {
      risks[static_cast<std::size_t>(i)] = rng.normal();
      labels.push_back(lab(rng.uniform(0.1, 5.0), true));
    }
    downstream::CIndex ci = downstream::concordance_index(risks, labels);
    CHECK(ci.defined);
    CHECK(std::abs(ci.value - 0.5) < 0.05);
  }
  SUBCASE("monotone transforms leave the index unchanged") {
    Rng rng(78);
    std::vector<double> risks(50);
    std::vector<double> warped(50);
    std::vector<data::SurvivalLabel> labels;
    for (int i = 0; i < 50; ++i) {
      risks[static_cast<std::size_t>(i)] = rng.normal();
      warped[static_cast<std::size_t>(i)] =
          std::exp(risks[static_cast<std::size_t>(i)]);
      labels.push_back(lab(rng.uniform(0.1, 5.0), rng.uniform() < 0.7));
    }
    downstream::CIndex a = downstream::concordance_index(risks, labels);
    downstream::CIndex b = downstream::concordance_index(warped, labels);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
    CHECK(a.comparable == b.comparable);
  }
}

TEST_CASE("rank auc matches hand-computed cases") {
  CHECK(downstream::auc({0.1, 0.9}, {0, 1}) == doctest::Approx(1.0));
  CHECK(downstream::auc({0.9, 0.1}, {0, 1}) == doctest::Approx(0.0));
  CHECK(downstream::auc({0.5, 0.5}, {0, 1}) == doctest::Approx(0.5));
  // 3 positives vs 2 negatives with one tie: count pairs directly.
  std::vector<double> s{0.2, 0.4, 0.4, 0.7, 0.9};
  std::vector<int> y{0, 0, 1, 1, 1};
  CHECK(downstream::auc(s, y) == doctest::Approx((1.0 + 0.5 + 2 + 2) / 6.0));
  CHECK_THROWS_AS(downstream::auc({0.1, 0.2}, {1, 1}), Error);
  CHECK_THROWS_AS(downstream::auc({0.1, 0.2}, {0, 2}), Error);
  CHECK_THROWS_AS(downstream::auc({0.1}, {0, 1}), Error);
}

TEST_CASE("cross entropy on uniform logits is log num_classes") {
  nn::Tape t;
  nn::Node* logits = t.constant(Mat::Zero(4, 3));
  double loss = downstream::cross_entropy(t, logits, {0, 1, 2, 0})
                    ->value(0, 0);
  CHECK(std::abs(loss - std::log(3.0)) < 1e-12);

  Mat confident = Mat::Zero(2, 3);
  confident(0, 1) = 30.0;
  confident(1, 2) = 30.0;
  double good = downstream::cross_entropy(t, t.constant(confident), {1, 2})
                    ->value(0, 0);
  CHECK(good < 1e-9);
  CHECK_THROWS_AS(downstream::cross_entropy(t, logits, {0, 1, 3, 0}), Error);
}

TEST_CASE("head gradients match finite differences") {
  nn::ParamStore ps{Rng(3)};
  downstream::SubtypeHead sub(ps, "head.subtype", 6, 3);
  DiscretizationRule rule;
  rule.edges = {1.0, 2.0};
  downstream::SurvivalHead surv(ps, "head.survival", 6, rule);

  Rng rng(5);
  Mat cls(4, 6);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j) cls(i, j) = rng.normal();
  std::vector<int> labels{0, 2, 1, 0};
  std::vector<data::SurvivalLabel> surv_labels{lab(0.5, true), lab(1.5, false),
                                               lab(2.0, true), lab(0.7, false)};

  auto build = [&](nn::Tape& t) {
    nn::Node* c = t.constant(cls);
    nn::Node* ce = downstream::cross_entropy(t, sub(t, c), labels);
    nn::Node* hz = downstream::hazard_nll(t, surv(t, c), surv_labels, rule);
    return nn::add(t, ce, hz);
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
  nn::GradCheckReport rep = nn::grad_check(ps, loss_fn, grad_fn);
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("patient cls depends only on the requested modalities") {
  data::Cohort cohort = labeled_cohort(4, 21);
  model::Model m(tiny_model_config(), cohort.groupings, 9);
  nn::Ctx ctx;

  data::PatientRecord rec = cohort.patients[0];
  Mat patches = rec.patches.embeddings;

  nn::Tape t;
  Mat with_rna =
      downstream::patient_cls(m, t, rec, patches, {Omics::Rna}, ctx)->value;
  // Changing dnam cannot move a histo+rna representation.
  data::PatientRecord tweaked = rec;
  tweaked.omics[1]->values.array() += 0.25;
  Mat moved =
      downstream::patient_cls(m, t, tweaked, patches, {Omics::Rna}, ctx)->value;
  CHECK((with_rna.array() == moved.array()).all());

  // Changing rna must move it.
  tweaked = rec;
  tweaked.omics[0]->values.array() += 0.25;
  Mat shifted =
      downstream::patient_cls(m, t, tweaked, patches, {Omics::Rna}, ctx)->value;
  CHECK((with_rna - shifted).cwiseAbs().maxCoeff() > 0.0);

  CHECK(with_rna.rows() == 1);
  CHECK(with_rna.cols() == 16);
}

TEST_CASE("few-shot config validation names the offending key") {
  downstream::FewShotConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto expect = [](downstream::FewShotConfig bad, const std::string& needle) {
    try {
      bad.validate();
      FAIL_CHECK("expected a config error mentioning " << needle);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Config);
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  downstream::FewShotConfig bad;
  bad.k = 0;
  expect(bad, "few_shot.k");
  bad = downstream::FewShotConfig();
  bad.num_classes = 3;
  expect(bad, "few_shot.num_classes");
  bad = downstream::FewShotConfig();
  bad.dropout = 1.0;
  expect(bad, "few_shot.dropout");

  downstream::SurvivalCvConfig scfg;
  CHECK_NOTHROW(scfg.validate());
  auto sexpect = [](downstream::SurvivalCvConfig bad2,
                    const std::string& needle) {
    try {
      bad2.validate();
      FAIL_CHECK("expected a config error mentioning " << needle);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Config);
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  downstream::SurvivalCvConfig sbad;
  sbad.folds = 1;
  sexpect(sbad, "survival.folds");
  sbad = downstream::SurvivalCvConfig();
  sbad.num_intervals = 0;
  sexpect(sbad, "survival.num_intervals");
}

TEST_CASE("few-shot protocol runs deterministically on a toy cohort") {
  data::Cohort cohort = labeled_cohort(24, 33);
  model::Model m(tiny_model_config(), cohort.groupings, 13);

  downstream::FewShotConfig cfg;
  cfg.k = 3;
  cfg.runs = 2;
  cfg.epochs = 1;
  cfg.lr = 1e-4;
  cfg.dropout = 0.0;
  cfg.seed = 5;
  downstream::FewShotResult a = downstream::few_shot_protocol(m, cohort, cfg);
  REQUIRE(a.runs.size() == 2);
  for (const downstream::FewShotRun& run : a.runs) {
    CHECK(run.train_n == 6);
    CHECK(run.eval_n == 18);
    CHECK(run.auc >= 0.0);
    CHECK(run.auc <= 1.0);
  }
  downstream::FewShotResult b = downstream::few_shot_protocol(m, cohort, cfg);
  CHECK(a.mean == b.mean);
  CHECK(a.stddev == b.stddev);
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    CHECK(a.runs[i].auc == b.runs[i].auc);
  }

  // The protocol clones; the base model parameters stay untouched.
  model::Model fresh(tiny_model_config(), cohort.groupings, 13);
  for (std::size_t i = 0; i < m.params().entries().size(); ++i) {
    CHECK((m.params().entries()[i]->node.value.array() ==
           fresh.params().entries()[i]->node.value.array())
              .all());
  }
}

TEST_CASE("few-shot protocol requires enough labeled patients") {
  data::Cohort cohort = labeled_cohort(6, 40);
  model::Model m(tiny_model_config(), cohort.groupings, 13);
  downstream::FewShotConfig cfg;
  cfg.k = 10;
  cfg.runs = 1;
  CHECK_THROWS_AS(downstream::few_shot_protocol(m, cohort, cfg), Error);
}

TEST_CASE("survival cross-validation covers each patient exactly once") {
  data::Cohort cohort = labeled_cohort(25, 55);
  model::Model m(tiny_model_config(), cohort.groupings, 17);

  downstream::SurvivalCvConfig cfg;
  cfg.folds = 5;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.num_intervals = 3;
  cfg.warmup_epochs = 0;
  cfg.dropout = 0.0;
  cfg.seed = 3;
  downstream::SurvivalCvResult res = downstream::survival_cv(m, cohort, cfg);
  REQUIRE(res.folds.size() == 5);
  long total_test = 0;
  for (const downstream::SurvivalFold& fold : res.folds) {
    CHECK(fold.train_n + fold.test_n == 25);
    total_test += fold.test_n;
  }
  CHECK(total_test == 25);
  CHECK(res.defined_folds > 0);
  CHECK(std::isfinite(res.mean));

  downstream::SurvivalCvResult again = downstream::survival_cv(m, cohort, cfg);
  CHECK(res.mean == again.mean);
}

TEST_CASE("tidy rows and the results csv use the pinned layout") {
  downstream::FewShotResult fs_res;
  fs_res.runs = {{0, 0.9, 20, 100}, {1, 1.0, 20, 100}};
  fs_res.mean = 0.95;
  fs_res.stddev = 0.05;
  std::vector<downstream::ResultRow> rows = downstream::tidy_rows(fs_res, 7);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].task == "subtype_few_shot");
  CHECK(rows[0].split == "run0");
  CHECK(rows[0].metric == "auc");
  CHECK(rows[2].metric == "auc_mean");
  CHECK(rows[3].metric == "auc_std");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  downstream::SurvivalCvResult cv;
  cv.folds = {{0, true, 0.8, 10, 20, 5}, {1, false, nan, 0, 20, 5}};
  cv.mean = 0.8;
  cv.stddev = 0.0;
  cv.defined_folds = 1;
  std::vector<downstream::ResultRow> srows = downstream::tidy_rows(cv, 7);
  REQUIRE(srows.size() == 4);
  CHECK(srows[0].task == "survival_cv");
  CHECK(srows[0].metric == "c_index");
  CHECK(std::isnan(srows[1].value));

  fs::path dir = fs::temp_directory_path() / "momics_results_test";
  fs::create_directories(dir);
  fs::path csv = dir / "results.csv";
  downstream::write_results_csv(csv, srows);
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "task,split,metric,value,seed");
  std::getline(in, line);
  CHECK(line.rfind("survival_cv,fold0,c_index,", 0) == 0);
  std::getline(in, line);
  CHECK(line == "survival_cv,fold1,c_index,nan,7");
}
