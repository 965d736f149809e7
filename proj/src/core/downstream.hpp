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

#include "core/data.hpp"
#include "core/layers.hpp"
#include "core/model.hpp"

namespace momics::downstream {

// Linear classifier on the <cls> output.
struct SubtypeHead {
  nn::Linear fc;

  SubtypeHead() = default;
  SubtypeHead(nn::ParamStore& ps, const std::string& name, int d,
              int num_classes);
  nn::Node* operator()(nn::Tape& t, nn::Node* cls) const;
};

// Partition of the time axis into Q left-open intervals (0, t_1], (t_1, t_2],
// ..., (t_{Q-1}, t_Q]. Edges are strictly increasing; times past t_Q clamp
// into interval Q (follow-up truncation) and the clamp is counted.
struct DiscretizationRule {
  std::vector<double> edges;

  int num_intervals() const { return static_cast<int>(edges.size()); }
  int interval_of(double time, long* clamped = nullptr) const;  // 1-based

  // Edges at the k/q quantiles of the observed times (events and censored
  // alike), so every input time lands in exactly one interval.
  static DiscretizationRule quantiles(const std::vector<double>& times, int q);
};

// Linear map d -> Q hazard logits a_q, h_q = sigmoid(a_q).
struct SurvivalHead {
  nn::Linear fc;
  DiscretizationRule rule;

  SurvivalHead() = default;
  SurvivalHead(nn::ParamStore& ps, const std::string& name, int d,
               DiscretizationRule rule);
  nn::Node* operator()(nn::Tape& t, nn::Node* cls) const;
};

// Mean softmax cross-entropy; labels index rows of logits.
nn::Node* cross_entropy(nn::Tape& t, nn::Node* logits,
                        const std::vector<int>& labels);

// Discrete-time survival likelihood: per sample
//   -[delta * log h_{q(i)} + sum_{j=1}^{q(i)-delta} log(1 - h_j)],
// averaged over the batch; q(i) is the label's interval under `rule`.
// Computed through softplus for stability. `clamped` counts times beyond the
// last edge.
nn::Node* hazard_nll(nn::Tape& t, nn::Node* logits,
                     const std::vector<data::SurvivalLabel>& labels,
                     const DiscretizationRule& rule, long* clamped = nullptr);

// Cumulative-hazard risk proxy: sum_q sigmoid(a_q).
double risk_score(const Vec& logits);

struct CIndex {
  bool defined = false;
  double value = 0.0;
  long comparable = 0;
};

// Pair (i, j) is comparable iff T_i < T_j and subject i had the event;
// concordant when risk_i > risk_j, ties count 0.5. Undefined (not an error)
// when no pair is comparable.
CIndex concordance_index(const std::vector<double>& risks,
                         const std::vector<data::SurvivalLabel>& labels);

// Rank-based (Mann-Whitney) AUC with ties counted 0.5; labels are 0/1 and
// both classes must appear.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Encodes one patient with the listed omics modalities fully visible (all
// others contribute no tokens) and returns the <cls> output row.
nn::Node* patient_cls(model::Model& m, nn::Tape& t,
                      const data::PatientRecord& rec, const Mat& patches,
                      const std::vector<Omics>& input_modalities, nn::Ctx& ctx);

struct FewShotConfig {
  int k = 10;
  int runs = 10;
  int num_classes = 2;
  int epochs = 5;
  int batch_size = 1;
  double lr = 5e-5;
  double dropout = 0.35;
  double weight_decay = 1e-2;
  std::vector<Omics> input_modalities;  // empty = histopathology only
  std::uint64_t seed = 1;

  void validate() const;  // throws Config naming the few_shot.* key
};

struct FewShotRun {
  int run = 0;
  double auc = 0.0;
  long train_n = 0;
  long eval_n = 0;
};

struct FewShotResult {
  std::vector<FewShotRun> runs;
  double mean = 0.0;
  double stddev = 0.0;  // sample std over runs, 0 for a single run
};

// Per run: draw k labeled patients per class, fine-tune a clone of `base`
// end to end with a fresh classification head, and score AUC on every
// remaining labeled patient. Training samples patches per step; evaluation
// uses all patches.
FewShotResult few_shot_protocol(const model::Model& base,
                                const data::Cohort& cohort,
                                const FewShotConfig& cfg);

struct SurvivalCvConfig {
  int folds = 5;
  int epochs = 20;
  int batch_size = 32;
  int num_intervals = 4;
  int warmup_epochs = 5;
  double lr_start = 1e-5;
  double lr_peak = 5e-5;
  double lr_final = 6e-6;
  double dropout = 0.35;
  double weight_decay = 1e-2;
  std::vector<Omics> input_modalities;
  std::uint64_t seed = 1;

  void validate() const;  // throws Config naming the survival.* key
  nn::LrSchedule schedule() const;
};

struct SurvivalFold {
  int fold = 0;
  bool defined = false;
  double c_index = 0.0;
  long comparable = 0;
  long train_n = 0;
  long test_n = 0;
};

struct SurvivalCvResult {
  std::vector<SurvivalFold> folds;
  double mean = 0.0;    // over defined folds; NaN when none
  double stddev = 0.0;  // sample std over defined folds
  int defined_folds = 0;
  std::vector<std::string> warnings;
};

// Non-overlapping k-fold split of the survival-labeled patients; per fold,
// interval edges come from the training times, a clone of `base` plus a
// fresh hazard head is fine-tuned, and the held-out fold is scored with the
// concordance index of the cumulative-hazard risk.
SurvivalCvResult survival_cv(const model::Model& base,
                             const data::Cohort& cohort,
                             const SurvivalCvConfig& cfg);

// Tidy results table: one row per (task, split, metric, value, seed).
struct ResultRow {
  std::string task;
  std::string split;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
};

std::vector<ResultRow> tidy_rows(const FewShotResult& r, std::uint64_t seed);
std::vector<ResultRow> tidy_rows(const SurvivalCvResult& r, std::uint64_t seed);
void write_results_csv(const std::filesystem::path& path,
                       const std::vector<ResultRow>& rows);

}  // namespace momics::downstream
