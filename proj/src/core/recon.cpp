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

#include "core/recon.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include "core/model.hpp"

namespace momics::recon {

double PearsonResult::median() const {
  std::vector<double> defined;
  for (Eigen::Index j = 0; j < r.size(); ++j) {
    if (std::isfinite(r(j))) defined.push_back(r(j));
  }
  if (defined.empty()) throw_data("median correlation: no defined features");
  return median_of(std::move(defined));
}

PearsonResult pearson_per_feature(const Mat& pred, const Mat& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw_data("pearson: shape mismatch (" + std::to_string(pred.rows()) +
               "x" + std::to_string(pred.cols()) + " vs " +
               std::to_string(truth.rows()) + "x" +
               std::to_string(truth.cols()) + ")");
  }
  if (pred.rows() < 3) {
    throw_data("pearson: need at least 3 patients, got " +
               std::to_string(pred.rows()));
  }
  PearsonResult res;
  res.r.resize(pred.cols());
  for (Eigen::Index j = 0; j < pred.cols(); ++j) {
    const Eigen::ArrayXd a = pred.col(j).array() - pred.col(j).mean();
    const Eigen::ArrayXd b = truth.col(j).array() - truth.col(j).mean();
    const double ssa = (a * a).sum();
    const double ssb = (b * b).sum();
    if (ssa == 0.0 || ssb == 0.0) {
      res.r(j) = std::numeric_limits<double>::quiet_NaN();
      res.excluded.push_back(static_cast<int>(j));
    } else {
      res.r(j) = (a * b).sum() / std::sqrt(ssa * ssb);
    }
  }
  return res;
}

std::vector<int> threshold_curve(const PearsonResult& result,
                                 const std::vector<double>& grid) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] < grid[i - 1]) {
      throw_config("threshold_curve: grid must be sorted ascending");
    }
  }
  std::vector<int> counts(grid.size(), 0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    int c = 0;
    for (Eigen::Index j = 0; j < result.r.size(); ++j) {
      if (std::isfinite(result.r(j)) && result.r(j) >= grid[i]) ++c;
    }
    counts[i] = c;
  }
  return counts;
}

std::vector<double> default_threshold_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(0.05 * i);
  return grid;
}

namespace {

struct GroupStats {
  double mean;
  double var;  // sample variance, n-1
};

GroupStats column_stats(const Mat& m, Eigen::Index j) {
  const double mu = m.col(j).mean();
  const double var =
      (m.col(j).array() - mu).square().sum() / static_cast<double>(m.rows() - 1);
  return {mu, var};
}

int sign_of(double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); }

}  // namespace

std::vector<int> significant_features(const Mat& true_a, const Mat& true_b,
                                      double alpha) {
  if (true_a.cols() != true_b.cols()) {
    throw_data("significant_features: feature counts differ");
  }
  if (true_a.rows() < 2 || true_b.rows() < 2) {
    throw_data("significant_features: each group needs at least 2 patients");
  }
  const double na = static_cast<double>(true_a.rows());
  const double nb = static_cast<double>(true_b.rows());
  std::vector<int> out;
  for (Eigen::Index j = 0; j < true_a.cols(); ++j) {
    const GroupStats sa = column_stats(true_a, j);
    const GroupStats sb = column_stats(true_b, j);
    const double se2 = sa.var / na + sb.var / nb;
    if (se2 <= 0.0) continue;
    const double t = (sa.mean - sb.mean) / std::sqrt(se2);
    const double df = se2 * se2 /
                      (sa.var * sa.var / (na * na * (na - 1.0)) +
                       sb.var * sb.var / (nb * nb * (nb - 1.0)));
    if (!(df > 0.0) || !std::isfinite(t)) continue;
    const boost::math::students_t dist(df);
    const double p = 2.0 * boost::math::cdf(boost::math::complement(
                               dist, std::abs(t)));
    if (p < alpha) out.push_back(static_cast<int>(j));
  }
  return out;
}

DirectionResult direction_accuracy(const Mat& pred_a, const Mat& pred_b,
                                   const Mat& true_a, const Mat& true_b,
                                   const std::vector<int>& significant) {
  if (pred_a.cols() != true_a.cols() || pred_b.cols() != true_b.cols() ||
      pred_a.cols() != pred_b.cols()) {
    throw_data("direction_accuracy: feature counts differ");
  }
  if (pred_a.rows() == 0 || pred_b.rows() == 0) {
    throw_data("direction_accuracy: empty group");
  }
  DirectionResult res;
  res.significant = static_cast<int>(significant.size());
  if (significant.empty()) return res;
  int correct = 0;
  for (int j : significant) {
    if (j < 0 || j >= pred_a.cols()) {
      throw_data("direction_accuracy: significant index " + std::to_string(j) +
                 " out of range");
    }
    const int true_sign =
        sign_of(true_a.col(j).mean() - true_b.col(j).mean());
    const int pred_sign =
        sign_of(pred_a.col(j).mean() - pred_b.col(j).mean());
    if (pred_sign != 0 && pred_sign == true_sign) ++correct;
  }
  res.accuracy = static_cast<double>(correct) / res.significant;
  res.defined = true;
  return res;
}

DirectionResult direction_accuracy(const Mat& pred_a, const Mat& pred_b,
                                   const Mat& true_a, const Mat& true_b,
                                   double alpha) {
  return direction_accuracy(pred_a, pred_b, true_a, true_b,
                            significant_features(true_a, true_b, alpha));
}

std::string Combo::label() const {
  std::string s;
  if (use_wsi) s = "wsi";
  for (Omics o : inputs) {
    if (!s.empty()) s += '+';
    s += omics_name(o);
  }
  if (s.empty()) s = "none";
  return s + "->" + omics_name(target);
}

Combo Combo::parse(const std::string& text) {
  const std::size_t arrow = text.find("->");
  if (arrow == std::string::npos) {
    throw_config("combo '" + text + "': expected 'inputs->target'");
  }
  Combo c;
  c.use_wsi = false;
  const std::string lhs = trim(text.substr(0, arrow));
  c.target = omics_from_name(trim(text.substr(arrow + 2)));
  std::set<Omics> seen;
  if (!lhs.empty() && lower(lhs) != "none") {
    for (const std::string& tok : split(lhs, '+')) {
      const std::string t = lower(trim(tok));
      if (t == "wsi") {
        c.use_wsi = true;
        continue;
      }
      const Omics o = omics_from_name(t);
      if (seen.insert(o).second) c.inputs.push_back(o);
    }
  }
  std::sort(c.inputs.begin(), c.inputs.end(),
            [](Omics a, Omics b) { return static_cast<int>(a) < static_cast<int>(b); });
  for (Omics o : c.inputs) {
    if (o == c.target) {
      throw_config("combo '" + text + "': target also listed as input");
    }
  }
  return c;
}

std::vector<Combo> parse_combo_list(const std::string& text) {
  std::vector<Combo> combos;
  for (const std::string& part : split(text, ';')) {
    if (trim(part).empty()) continue;
    combos.push_back(Combo::parse(trim(part)));
  }
  return combos;
}

std::vector<ReconReport> evaluate_combinations(model::Model& m,
                                               const data::Cohort& cohort,
                                               const std::vector<Combo>& combos) {
  std::vector<ReconReport> reports;
  for (const Combo& combo : combos) {
    const int nf = cohort.features(combo.target);
    Mat pred(static_cast<Eigen::Index>(cohort.patients.size()), nf);
    Mat truth(pred.rows(), nf);
    for (std::size_t i = 0; i < cohort.patients.size(); ++i) {
      const data::PatientRecord& rec = cohort.patients[i];
      if (!rec.has_omics(combo.target)) {
        throw_data("patient " + rec.id + ": target modality " +
                   omics_name(combo.target) + " missing from cohort");
      }
      const auto recon =
          m.generate(rec, combo.inputs, {combo.target});
      pred.row(static_cast<Eigen::Index>(i)) =
          recon[static_cast<int>(combo.target)]->transpose();
      truth.row(static_cast<Eigen::Index>(i)) =
          rec.profile(combo.target).values.transpose();
    }
    ReconReport rep;
    rep.combo = combo;
    rep.pearson = pearson_per_feature(pred, truth);
    rep.grid = default_threshold_grid();
    rep.counts = threshold_curve(rep.pearson, rep.grid);
    rep.median = rep.pearson.median();
    rep.pred = std::move(pred);
    rep.truth = std::move(truth);
    reports.push_back(std::move(rep));
  }
  return reports;
}

std::string combo_file_label(const Combo& combo) {
  std::string s = combo.label();
  const std::size_t arrow = s.find("->");
  return s.substr(0, arrow) + "_to_" + s.substr(arrow + 2);
}

void write_reports(const std::filesystem::path& dir,
                   const std::vector<ReconReport>& reports) {
  std::filesystem::create_directories(dir);
  std::ofstream summary(dir / "summary.csv", std::ios::trunc);
  if (!summary) throw_data("cannot write " + (dir / "summary.csv").string());
  summary << "combo,median";
  if (!reports.empty()) {
    for (double t : reports.front().grid) {
      summary << ",count_at_" << format_double(t);
    }
  }
  summary << '\n';
  for (const ReconReport& rep : reports) {
    summary << rep.combo.label() << ',' << format_double(rep.median);
    for (int c : rep.counts) summary << ',' << c;
    summary << '\n';

    const std::string base = combo_file_label(rep.combo);
    std::ofstream per(dir / ("recon_" + base + ".csv"), std::ios::trunc);
    per << "feature_id,r\n";
    for (Eigen::Index j = 0; j < rep.pearson.r.size(); ++j) {
      per << j << ',';
      if (std::isfinite(rep.pearson.r(j))) {
        per << format_double(rep.pearson.r(j));
      } else {
        per << "nan";
      }
      per << '\n';
    }
    std::ofstream curve(dir / ("recon_" + base + ".thresholds.txt"),
                        std::ios::trunc);
    for (std::size_t i = 0; i < rep.grid.size(); ++i) {
      curve << format_double(rep.grid[i]) << ' ' << rep.counts[i] << '\n';
    }
  }
}

}  // namespace momics::recon
