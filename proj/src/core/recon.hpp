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

#include <filesystem>
#include <string>
#include <vector>

#include "core/common.hpp"
#include "core/data.hpp"

namespace momics::model {
class Model;
}

namespace momics::recon {

struct PearsonResult {
  Vec r;                      // per feature; NaN where undefined
  std::vector<int> excluded;  // features with zero variance on either side

  // Median over defined features; throws Data when every feature is excluded.
  double median() const;
};

// Sample Pearson correlation per column between prediction and truth
// (patients x features). Columns that are constant in either matrix are
// flagged undefined and listed in `excluded`.
PearsonResult pearson_per_feature(const Mat& pred, const Mat& truth);

// Number of defined features with r >= t for each grid point; the grid must
// be sorted ascending.
std::vector<int> threshold_curve(const PearsonResult& result,
                                 const std::vector<double>& grid);
std::vector<double> default_threshold_grid();  // 0.0 to 1.0, step 0.05

// Features whose true group means differ significantly (Welch two-sample
// test, two-sided, p < alpha). Both groups need >= 2 rows.
std::vector<int> significant_features(const Mat& true_a, const Mat& true_b,
                                      double alpha = 0.01);

struct DirectionResult {
  double accuracy = 0.0;  // fraction of significant features, in [0,1]
  int significant = 0;
  bool defined = false;  // false when the significant set is empty
};

// Fraction of significant features where the predicted group-mean difference
// has the same sign as the true one. A zero predicted difference counts as
// incorrect.
DirectionResult direction_accuracy(const Mat& pred_a, const Mat& pred_b,
                                   const Mat& true_a, const Mat& true_b,
                                   const std::vector<int>& significant);
// Convenience overload: derives the significant set from the truth at alpha.
DirectionResult direction_accuracy(const Mat& pred_a, const Mat& pred_b,
                                   const Mat& true_a, const Mat& true_b,
                                   double alpha = 0.01);

// One conditioning scenario: which omics modalities are visible alongside
// histopathology, and which modality is reconstructed. `use_wsi` matters only
// for the linear oracle; the model always sees histopathology.
struct Combo {
  bool use_wsi = true;
  std::vector<Omics> inputs;  // visible omics, deduplicated, fixed order
  Omics target = Omics::Rna;

  std::string label() const;              // e.g. "wsi+rna->dnam"
  static Combo parse(const std::string& text);
};

std::vector<Combo> parse_combo_list(const std::string& text);  // ';'-separated

// Filesystem-safe combo label: "wsi+rna->dnam" becomes "wsi+rna_to_dnam".
std::string combo_file_label(const Combo& combo);

struct ReconReport {
  Combo combo;
  Mat pred;   // patients x features, generated
  Mat truth;  // patients x features, observed
  PearsonResult pearson;
  std::vector<double> grid;
  std::vector<int> counts;
  double median = 0.0;
};

// Runs generation for every combo over the cohort and scores it against the
// true profiles. Every patient must carry the input and target modalities.
std::vector<ReconReport> evaluate_combinations(model::Model& m,
                                               const data::Cohort& cohort,
                                               const std::vector<Combo>& combos);

// Writes recon_<combo>.csv (feature_id,r), recon_<combo>.thresholds.txt
// (two columns: t count), and summary.csv (combo, median, count per t).
void write_reports(const std::filesystem::path& dir,
                   const std::vector<ReconReport>& reports);

}  // namespace momics::recon
