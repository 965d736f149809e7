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

#include "core/synth.hpp"
#include "doctest.h"

using namespace momics;

namespace {

synth::SynthConfig small_config() {
  synth::SynthConfig cfg;
  cfg.num_patients = 40;
  cfg.latent_dim = 4;
  cfg.wsi_latent_dim = 4;
  cfg.patch_dim = 8;
  cfg.patches_min = 2;
  cfg.patches_max = 5;
  cfg.feature_counts = {12, 12, 12};
  cfg.group_counts = {3, 3, 3};
  cfg.seed = 7;
  return cfg;
}

bool mats_equal(const Mat& a, const Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.array() == b.array()).all();
}

bool vecs_equal(const Vec& a, const Vec& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

bool profiles_equal(const data::PatientRecord& a, const data::PatientRecord& b) {
  if (a.id != b.id) return false;
  if (!mats_equal(a.patches.embeddings, b.patches.embeddings)) return false;
  if (a.patches.source_slide_ids != b.patches.source_slide_ids) return false;
  for (Omics o : kAllOmics) {
    if (a.has_omics(o) != b.has_omics(o)) return false;
    if (!a.has_omics(o)) continue;
    if (!vecs_equal(a.profile(o).values, b.profile(o).values)) return false;
    if (a.profile(o).missing != b.profile(o).missing) return false;
    if (a.profile(o).transformed != b.profile(o).transformed) return false;
  }
  if (a.subtype != b.subtype) return false;
  if (a.survival.has_value() != b.survival.has_value()) return false;
  if (a.survival) {
    if (a.survival->time != b.survival->time) return false;
    if (a.survival->event != b.survival->event) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("generated cohorts are bit-identical for one config") {
  synth::SynthConfig cfg = small_config();
  data::Cohort a = synth::generate_cohort(cfg);
  data::Cohort b = synth::generate_cohort(cfg);
  REQUIRE(a.patients.size() == b.patients.size());
  for (std::size_t i = 0; i < a.patients.size(); ++i) {
    CHECK(profiles_equal(a.patients[i], b.patients[i]));
  }
}

TEST_CASE("seed changes the generated data") {
  synth::SynthConfig cfg = small_config();
  data::Cohort a = synth::generate_cohort(cfg);
  cfg.seed = 8;
  data::Cohort b = synth::generate_cohort(cfg);
  CHECK_FALSE(mats_equal(a.patients[0].patches.embeddings,
                         b.patients[0].patches.embeddings));
}

TEST_CASE("generated cohorts satisfy the data model invariants") {
  synth::SynthConfig cfg = small_config();
  cfg.cnv_missing_rate = 0.3;
  cfg.censoring_rate = 0.4;
  data::Cohort cohort = synth::generate_cohort(cfg);

  CHECK(cohort.patch_dim == cfg.patch_dim);
  CHECK(static_cast<int>(cohort.patients.size()) == cfg.num_patients);
  for (Omics o : kAllOmics) {
    const int i = static_cast<int>(o);
    CHECK(cohort.features(o) == cfg.feature_counts[i]);
    CHECK(static_cast<int>(cohort.grouping(o).groups.size()) ==
          cfg.group_counts[i]);
    CHECK_NOTHROW(cohort.grouping(o).validate("synth"));
  }

  int subtype_ones = 0;
  int censored = 0;
  int any_missing = 0;
  for (const data::PatientRecord& rec : cohort.patients) {
    CHECK(rec.patches.embeddings.rows() >= cfg.patches_min);
    CHECK(rec.patches.embeddings.rows() <= cfg.patches_max);
    CHECK(rec.patches.embeddings.cols() == cfg.patch_dim);
    for (Omics o : kAllOmics) {
      REQUIRE(rec.has_omics(o));
      const data::OmicsProfile& prof = rec.profile(o);
      CHECK(prof.modality == o);
      CHECK_FALSE(prof.transformed);
      CHECK(prof.values.size() == cfg.feature_counts[static_cast<int>(o)]);
      CHECK(prof.values.allFinite());
      if (o == Omics::Rna || o == Omics::Cnv) {
        CHECK(prof.values.minCoeff() >= 0.0);
      } else {
        CHECK(prof.values.minCoeff() >= 0.0);
        CHECK(prof.values.maxCoeff() <= 1.0);
      }
    }
    if (!rec.profile(Omics::Cnv).missing.empty()) ++any_missing;
    REQUIRE(rec.subtype.has_value());
    CHECK((*rec.subtype == 0 || *rec.subtype == 1));
    subtype_ones += *rec.subtype;
    REQUIRE(rec.survival.has_value());
    CHECK(rec.survival->time > 0.0);
    if (!rec.survival->event) ++censored;
  }
  // Both subtype classes occur for a zero threshold on a standard normal.
  CHECK(subtype_ones > 0);
  CHECK(subtype_ones < cfg.num_patients);
  CHECK(censored > 0);
  CHECK(censored < cfg.num_patients);
  CHECK(any_missing > 0);
}

TEST_CASE("zero censoring rate yields only observed events") {
  synth::SynthConfig cfg = small_config();
  cfg.censoring_rate = 0.0;
  data::Cohort cohort = synth::generate_cohort(cfg);
  for (const data::PatientRecord& rec : cohort.patients) {
    CHECK(rec.survival->event);
  }
}

TEST_CASE("zero missing rate leaves cnv missing flags empty") {
  synth::SynthConfig cfg = small_config();
  cfg.cnv_missing_rate = 0.0;
  data::Cohort cohort = synth::generate_cohort(cfg);
  for (const data::PatientRecord& rec : cohort.patients) {
    CHECK(rec.profile(Omics::Cnv).missing.empty());
  }
}

TEST_CASE("config validation names the offending key") {
  synth::SynthConfig cfg = small_config();
  CHECK_NOTHROW(cfg.validate());

  auto expect = [](synth::SynthConfig bad, const std::string& needle) {
    try {
      bad.validate();
      FAIL_CHECK("expected a config error mentioning " << needle);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Config);
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  synth::SynthConfig bad = small_config();
  bad.num_patients = 0;
  expect(bad, "synth.num_patients");
  bad = small_config();
  bad.wsi_latent_dim = bad.latent_dim + 1;
  expect(bad, "synth.wsi_latent_dim");
  bad = small_config();
  bad.patches_max = bad.patches_min - 1;
  expect(bad, "synth.patches_max");
  bad = small_config();
  bad.group_counts[1] = bad.feature_counts[1] + 1;
  expect(bad, "synth.dnam_groups");
  bad = small_config();
  bad.noise_std[0] = -0.1;
  expect(bad, "synth.rna_noise_std");
  bad = small_config();
  bad.subtype_coord = bad.latent_dim;
  expect(bad, "synth.subtype_coord");
  bad = small_config();
  bad.censoring_rate = 1.0;
  expect(bad, "synth.censoring_rate");
  bad = small_config();
  bad.cnv_missing_rate = 1.5;
  expect(bad, "synth.cnv_missing_rate");
}

TEST_CASE("linear oracle recovers noiseless cross-modality structure") {
  synth::SynthConfig cfg = small_config();
  cfg.num_patients = 80;
  cfg.noise_std = {0.0, 0.0, 0.0};
  cfg.patch_noise_std = 0.0;
  data::Cohort cohort = synth::generate_cohort(cfg);
  data::transform_cohort(cohort);

  SUBCASE("from another omics modality") {
    synth::OracleResult res =
        synth::linear_oracle(cohort, false, {Omics::Rna}, Omics::Dnam);
    CHECK(res.median >= 0.999);
  }
  SUBCASE("from patch embeddings") {
    synth::OracleResult res =
        synth::linear_oracle(cohort, true, {}, Omics::Rna);
    CHECK(res.median >= 0.999);
  }
  SUBCASE("from the target itself") {
    synth::OracleResult res =
        synth::linear_oracle(cohort, false, {Omics::Cnv}, Omics::Cnv);
    CHECK(res.median >= 0.999);
  }
}

TEST_CASE("noise lowers the oracle score") {
  synth::SynthConfig cfg = small_config();
  cfg.num_patients = 80;
  cfg.noise_std = {0.0, 0.0, 0.0};
  cfg.patch_noise_std = 0.0;
  data::Cohort clean = synth::generate_cohort(cfg);
  data::transform_cohort(clean);
  cfg.noise_std = {1.0, 1.0, 1.0};
  data::Cohort noisy = synth::generate_cohort(cfg);
  data::transform_cohort(noisy);

  synth::OracleResult a =
      synth::linear_oracle(clean, false, {Omics::Rna}, Omics::Dnam);
  synth::OracleResult b =
      synth::linear_oracle(noisy, false, {Omics::Rna}, Omics::Dnam);
  CHECK(a.median > b.median);
  CHECK(b.median < 0.9);
  CHECK(b.median > 0.0);
}

TEST_CASE("linear oracle rejects raw profiles and tiny cohorts") {
  synth::SynthConfig cfg = small_config();
  data::Cohort raw = synth::generate_cohort(cfg);
  CHECK_THROWS_AS(synth::linear_oracle(raw, false, {Omics::Rna}, Omics::Dnam),
                  Error);

  cfg.num_patients = 4;
  data::Cohort tiny = synth::generate_cohort(cfg);
  data::transform_cohort(tiny);
  CHECK_THROWS_AS(synth::linear_oracle(tiny, false, {Omics::Rna}, Omics::Dnam),
                  Error);
  data::Cohort ok = synth::generate_cohort(small_config());
  data::transform_cohort(ok);
  CHECK_THROWS_AS(synth::linear_oracle(ok, false, {}, Omics::Rna), Error);
}

TEST_CASE("combo overload matches the explicit argument form") {
  synth::SynthConfig cfg = small_config();
  cfg.num_patients = 60;
  data::Cohort cohort = synth::generate_cohort(cfg);
  data::transform_cohort(cohort);

  recon::Combo combo = recon::Combo::parse("wsi+rna->dnam");
  synth::OracleResult a = synth::linear_oracle(cohort, combo);
  synth::OracleResult b =
      synth::linear_oracle(cohort, true, {Omics::Rna}, Omics::Dnam);
  CHECK(a.median == b.median);
  CHECK(a.pearson.excluded == b.pearson.excluded);
  REQUIRE(a.pearson.r.size() == b.pearson.r.size());
  for (int i = 0; i < a.pearson.r.size(); ++i) {
    if (std::isnan(a.pearson.r[i])) {
      CHECK(std::isnan(b.pearson.r[i]));
    } else {
      CHECK(a.pearson.r[i] == b.pearson.r[i]);
    }
  }
}
