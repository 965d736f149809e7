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

#include "core/synth.hpp"

#include <cmath>
#include <cstdio>

#include "core/rng.hpp"

namespace momics::synth {

namespace {

// Offsets and scales mapping the unit-variance latent signal into each
// modality's valid transformed range. Values were chosen so range clamping
// is vanishingly rare (|signal| beyond 5 sigma) and stays a safety net.
constexpr double kRnaOffset = 6.0;
constexpr double kBetaOffset = 0.5;
constexpr double kBetaScale = 0.1;
constexpr double kBetaFloor = 1e-6;

void check(bool ok, const std::string& msg) {
  if (!ok) throw_config(msg);
}

double positive_uniform(Rng& rng) {
  double u = rng.uniform();
  while (u == 0.0) u = rng.uniform();
  return u;
}

}  // namespace

void SynthConfig::validate() const {
  check(num_patients >= 1, "synth.num_patients must be >= 1");
  check(latent_dim >= 1, "synth.latent_dim must be >= 1");
  check(wsi_latent_dim >= 1 && wsi_latent_dim <= latent_dim,
        "synth.wsi_latent_dim must be in [1, latent_dim]");
  check(patch_dim >= 1, "synth.patch_dim must be >= 1");
  check(patches_min >= 1, "synth.patches_min must be >= 1");
  check(patches_max >= patches_min,
        "synth.patches_max must be >= synth.patches_min");
  for (Omics o : kAllOmics) {
    const int i = static_cast<int>(o);
    const std::string name = omics_name(o);
    check(feature_counts[i] >= 1, "synth." + name + "_features must be >= 1");
    check(group_counts[i] >= 1 && group_counts[i] <= feature_counts[i],
          "synth." + name + "_groups must be in [1, " + name + "_features]");
    check(noise_std[i] >= 0.0, "synth." + name + "_noise_std must be >= 0");
  }
  check(patch_noise_std >= 0.0, "synth.patch_noise_std must be >= 0");
  check(subtype_coord >= 0 && subtype_coord < latent_dim,
        "synth.subtype_coord must be in [0, latent_dim)");
  check(risk_coord >= 0 && risk_coord < latent_dim,
        "synth.risk_coord must be in [0, latent_dim)");
  check(std::isfinite(subtype_threshold),
        "synth.subtype_threshold must be finite");
  check(std::isfinite(risk_scale), "synth.risk_scale must be finite");
  check(censoring_rate >= 0.0 && censoring_rate < 1.0,
        "synth.censoring_rate must be in [0, 1)");
  check(cnv_missing_rate >= 0.0 && cnv_missing_rate <= 1.0,
        "synth.cnv_missing_rate must be in [0, 1]");
}

namespace {

// Per-feature unit-norm loading vectors, as columns of a (p x n) matrix.
Mat draw_loadings(Rng rng, int latent_dim, int n_features) {
  Mat a(latent_dim, n_features);
  for (int j = 0; j < n_features; ++j) {
    for (int k = 0; k < latent_dim; ++k) a(k, j) = rng.normal();
    a.col(j).normalize();
  }
  return a;
}

data::GroupingScheme contiguous_grouping(Omics modality, int n_features,
                                         int n_groups) {
  data::GroupingScheme scheme;
  scheme.modality = modality;
  scheme.feature_count = n_features;
  const int base = n_features / n_groups;
  const int extra = n_features % n_groups;
  int at = 0;
  for (int k = 0; k < n_groups; ++k) {
    const int len = base + (k < extra ? 1 : 0);
    data::Group g;
    g.name = omics_name(modality) + "_" + std::to_string(k + 1);
    for (int i = 0; i < len; ++i) g.indices.push_back(at + i);
    scheme.groups.push_back(std::move(g));
    at += len;
  }
  return scheme;
}

}  // namespace

data::Cohort generate_cohort(const SynthConfig& cfg) {
  cfg.validate();
  Rng root(cfg.seed);

  const Mat map_wsi =
      draw_loadings(root.derive("map.wsi"), cfg.wsi_latent_dim, cfg.patch_dim);
  std::array<Mat, kNumOmics> maps;
  for (Omics o : kAllOmics) {
    maps[static_cast<int>(o)] =
        draw_loadings(root.derive("map." + omics_name(o)), cfg.latent_dim,
                      cfg.feature_counts[static_cast<int>(o)]);
  }

  data::Cohort cohort;
  cohort.name = "synth";
  cohort.patch_dim = cfg.patch_dim;
  cohort.feature_counts = cfg.feature_counts;
  for (Omics o : kAllOmics) {
    const int i = static_cast<int>(o);
    cohort.groupings[i] =
        contiguous_grouping(o, cfg.feature_counts[i], cfg.group_counts[i]);
  }

  const Rng patients_rng = root.derive("patient");
  for (int pi = 0; pi < cfg.num_patients; ++pi) {
    Rng prng = patients_rng.derive(static_cast<std::uint64_t>(pi));
    data::PatientRecord rec;
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "P%05d", pi + 1);
    rec.id = idbuf;

    Vec z(cfg.latent_dim);
    {
      Rng zr = prng.derive("z");
      for (int k = 0; k < cfg.latent_dim; ++k) z(k) = zr.normal();
    }

    {
      Rng pr = prng.derive("patches");
      const int n_patches =
          cfg.patches_min +
          static_cast<int>(pr.below(static_cast<std::uint64_t>(
              cfg.patches_max - cfg.patches_min + 1)));
      const Vec z_vis = z.head(cfg.wsi_latent_dim);
      Mat patches(n_patches, cfg.patch_dim);
      for (int r = 0; r < n_patches; ++r) {
        for (int c = 0; c < cfg.patch_dim; ++c) {
          patches(r, c) =
              z_vis.dot(map_wsi.col(c)) + cfg.patch_noise_std * pr.normal();
        }
      }
      rec.patches.embeddings = std::move(patches);
      rec.patches.source_slide_ids.push_back(rec.id);
    }

    for (Omics o : kAllOmics) {
      const int i = static_cast<int>(o);
      Rng nr = prng.derive("noise." + omics_name(o));
      const Mat& a = maps[i];
      data::OmicsProfile prof;
      prof.modality = o;
      prof.transformed = false;
      prof.values.resize(cfg.feature_counts[i]);
      for (int j = 0; j < cfg.feature_counts[i]; ++j) {
        const double signal = z.dot(a.col(j)) + cfg.noise_std[i] * nr.normal();
        double raw = 0.0;
        switch (o) {
          case Omics::Rna: {
            const double t = std::max(kRnaOffset + signal, 0.0);
            raw = std::exp2(t) - 1.0;
            break;
          }
          case Omics::Dnam: {
            double t = kBetaOffset + kBetaScale * signal;
            t = std::min(std::max(t, kBetaFloor), 1.0 - kBetaFloor);
            raw = t;
            break;
          }
          case Omics::Cnv: {
            const double t = std::max(kBetaOffset + kBetaScale * signal, 0.0);
            raw = 2.0 * (std::pow(10.0, t) - 1.0);
            break;
          }
        }
        prof.values(j) = raw;
      }
      if (o == Omics::Cnv && cfg.cnv_missing_rate > 0.0) {
        Rng mr = prng.derive("missing");
        prof.missing.resize(static_cast<std::size_t>(cfg.feature_counts[i]));
        for (int j = 0; j < cfg.feature_counts[i]; ++j) {
          if (mr.uniform() < cfg.cnv_missing_rate) {
            prof.missing[static_cast<std::size_t>(j)] = true;
            prof.values(j) = 0.0;
          }
        }
      }
      rec.omics[i] = std::move(prof);
    }

    rec.subtype = z(cfg.subtype_coord) > cfg.subtype_threshold ? 1 : 0;

    {
      Rng sr = prng.derive("survival");
      const double risk = cfg.risk_scale * z(cfg.risk_coord);
      const double t_event =
          -std::log(positive_uniform(sr)) * std::exp(-risk);
      data::SurvivalLabel lab;
      if (sr.uniform() < cfg.censoring_rate) {
        lab.event = false;
        lab.time = t_event * positive_uniform(sr);
      } else {
        lab.event = true;
        lab.time = t_event;
      }
      rec.survival = lab;
    }

    cohort.patients.push_back(std::move(rec));
  }
  return cohort;
}

namespace {

Vec mean_patch_embedding(const data::PatientRecord& rec) {
  return rec.patches.embeddings.colwise().mean().transpose();
}

}  // namespace

OracleResult linear_oracle(const data::Cohort& cohort, bool use_wsi,
                           const std::vector<Omics>& inputs, Omics target) {
  const int n = static_cast<int>(cohort.patients.size());
  if (n < 6) {
    throw_data("linear_oracle: need at least 6 patients, got " +
               std::to_string(n));
  }
  Eigen::Index input_dim = use_wsi ? cohort.patch_dim : 0;
  for (Omics o : inputs) input_dim += cohort.features(o);
  if (input_dim == 0) throw_data("linear_oracle: empty input set");

  Mat x(n, input_dim);
  Mat y(n, cohort.features(target));
  for (int i = 0; i < n; ++i) {
    const data::PatientRecord& rec = cohort.patients[static_cast<std::size_t>(i)];
    Eigen::Index at = 0;
    if (use_wsi) {
      x.row(i).segment(0, cohort.patch_dim) =
          mean_patch_embedding(rec).transpose();
      at = cohort.patch_dim;
    }
    for (Omics o : inputs) {
      if (!rec.has_omics(o) || !rec.profile(o).transformed) {
        throw_data("linear_oracle: patient " + rec.id + " lacks transformed " +
                   omics_name(o));
      }
      x.row(i).segment(at, cohort.features(o)) =
          rec.profile(o).values.transpose();
      at += cohort.features(o);
    }
    if (!rec.has_omics(target) || !rec.profile(target).transformed) {
      throw_data("linear_oracle: patient " + rec.id + " lacks transformed " +
                 omics_name(target));
    }
    y.row(i) = rec.profile(target).values.transpose();
  }

  const int n_fit = n / 2;
  const int n_eval = n - n_fit;
  const Mat x_fit = x.topRows(n_fit);
  const Mat y_fit = y.topRows(n_fit);
  const Eigen::RowVectorXd mu_x = x_fit.colwise().mean();
  const Eigen::RowVectorXd mu_y = y_fit.colwise().mean();
  const Mat xc = x_fit.rowwise() - mu_x;
  const Mat yc = y_fit.rowwise() - mu_y;

  const double ridge = 1e-3 * static_cast<double>(n_fit);
  Mat gram = xc.transpose() * xc;
  gram.diagonal().array() += ridge;
  const Mat beta = gram.ldlt().solve(xc.transpose() * yc);

  const Mat x_eval = x.bottomRows(n_eval).rowwise() - mu_x;
  Mat pred = x_eval * beta;
  pred.rowwise() += mu_y;

  OracleResult res;
  res.pearson = recon::pearson_per_feature(pred, y.bottomRows(n_eval));
  res.median = res.pearson.median();
  return res;
}

OracleResult linear_oracle(const data::Cohort& cohort,
                           const recon::Combo& combo) {
  return linear_oracle(cohort, combo.use_wsi, combo.inputs, combo.target);
}

}  // namespace momics::synth
