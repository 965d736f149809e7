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

#include "core/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

namespace momics::downstream {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (static_cast<double>(xs.size()) - 1.0));
}

nn::AdamWConfig adamw_with_decay(double weight_decay) {
  nn::AdamWConfig cfg;
  cfg.weight_decay = weight_decay;
  return cfg;
}

}  // namespace

// ---- heads ------------------------------------------------------------------

SubtypeHead::SubtypeHead(nn::ParamStore& ps, const std::string& name, int d,
                         int num_classes) {
  if (num_classes < 2) throw_config("subtype head needs at least 2 classes");
  fc = nn::Linear(ps, name, d, num_classes);
}

nn::Node* SubtypeHead::operator()(nn::Tape& t, nn::Node* cls) const {
  return fc(t, cls);
}

int DiscretizationRule::interval_of(double time, long* clamped) const {
  const auto it = std::lower_bound(edges.begin(), edges.end(), time);
  if (it == edges.end()) {
    if (clamped) ++*clamped;
    return num_intervals();
  }
  return static_cast<int>(it - edges.begin()) + 1;
}

DiscretizationRule DiscretizationRule::quantiles(
    const std::vector<double>& times, int q) {
  if (q < 2) throw_config("time discretization needs at least 2 intervals");
  if (times.empty()) throw_data("no observed times to discretize");
  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  DiscretizationRule rule;
  rule.edges.reserve(static_cast<std::size_t>(q));
  for (int k = 1; k <= q; ++k) {
    const std::size_t pos =
        (n * static_cast<std::size_t>(k) + static_cast<std::size_t>(q) - 1) /
        static_cast<std::size_t>(q);
    rule.edges.push_back(sorted[pos - 1]);
  }
  for (int k = 1; k < q; ++k) {
    if (!(rule.edges[static_cast<std::size_t>(k)] >
          rule.edges[static_cast<std::size_t>(k) - 1])) {
      throw_data("observed times are too tied to cut " + std::to_string(q) +
                 " strictly increasing interval edges");
    }
  }
  return rule;
}

SurvivalHead::SurvivalHead(nn::ParamStore& ps, const std::string& name, int d,
                           DiscretizationRule r)
    : rule(std::move(r)) {
  if (rule.num_intervals() < 2) {
    throw_config("survival head needs at least 2 intervals");
  }
  fc = nn::Linear(ps, name, d, rule.num_intervals());
}

nn::Node* SurvivalHead::operator()(nn::Tape& t, nn::Node* cls) const {
  return fc(t, cls);
}

// ---- losses -------------------------------------------------------------------

nn::Node* cross_entropy(nn::Tape& t, nn::Node* logits,
                        const std::vector<int>& labels) {
  const Eigen::Index n = logits->rows();
  const Eigen::Index c = logits->cols();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw_internal("cross_entropy: label count does not match logits rows");
  }
  Mat onehot = Mat::Zero(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= c) {
      throw_data("class label " + std::to_string(y) + " outside [0, " +
                 std::to_string(c) + ")");
    }
    onehot(i, y) = 1.0;
  }
  nn::Node* lse = nn::sum_all(t, nn::logsumexp_rows(t, logits));
  nn::Node* picked = nn::sum_all(t, nn::mul(t, logits, t.constant(onehot)));
  return nn::scale(t, nn::sub(t, lse, picked), 1.0 / static_cast<double>(n));
}

nn::Node* hazard_nll(nn::Tape& t, nn::Node* logits,
                     const std::vector<data::SurvivalLabel>& labels,
                     const DiscretizationRule& rule, long* clamped) {
  const Eigen::Index n = logits->rows();
  const Eigen::Index q = logits->cols();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw_internal("hazard_nll: label count does not match logits rows");
  }
  if (q != rule.num_intervals()) {
    throw_internal("hazard_nll: logit width does not match interval count");
  }
  // log h = -softplus(-a), log(1-h) = -softplus(a); the two indicator masks
  // pick each sample's event term and its survived intervals.
  Mat event_mask = Mat::Zero(n, q);
  Mat survive_mask = Mat::Zero(n, q);
  for (Eigen::Index i = 0; i < n; ++i) {
    const data::SurvivalLabel& lab = labels[static_cast<std::size_t>(i)];
    const int qi = rule.interval_of(lab.time, clamped);
    if (lab.event) event_mask(i, qi - 1) = 1.0;
    const int survived = qi - (lab.event ? 1 : 0);
    for (int j = 0; j < survived; ++j) survive_mask(i, j) = 1.0;
  }
  nn::Node* sp_neg = nn::softplus(t, nn::scale(t, logits, -1.0));
  nn::Node* sp_pos = nn::softplus(t, logits);
  nn::Node* total =
      nn::add(t, nn::sum_all(t, nn::mul(t, sp_neg, t.constant(event_mask))),
              nn::sum_all(t, nn::mul(t, sp_pos, t.constant(survive_mask))));
  return nn::scale(t, total, 1.0 / static_cast<double>(n));
}

// ---- metrics ------------------------------------------------------------------

double risk_score(const Vec& logits) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    r += 1.0 / (1.0 + std::exp(-logits[i]));
  }
  return r;
}

CIndex concordance_index(const std::vector<double>& risks,
                         const std::vector<data::SurvivalLabel>& labels) {
  if (risks.size() != labels.size()) {
    throw_internal("concordance_index: risk and label counts differ");
  }
  const std::size_t n = risks.size();
  double concordant = 0.0;
  long comparable = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!labels[i].event) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || !(labels[i].time < labels[j].time)) continue;
      ++comparable;
      if (risks[i] > risks[j]) {
        concordant += 1.0;
      } else if (risks[i] == risks[j]) {
        concordant += 0.5;
      }
    }
  }
  CIndex out;
  out.comparable = comparable;
  if (comparable == 0) return out;
  out.defined = true;
  out.value = concordant / static_cast<double>(comparable);
  return out;
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw_internal("auc: score and label counts differ");
  }
  long npos = 0, nneg = 0;
  for (int y : labels) {
    if (y == 1) {
      ++npos;
    } else if (y == 0) {
      ++nneg;
    } else {
      throw_data("auc labels must be 0 or 1, got " + std::to_string(y));
    }
  }
  if (npos == 0 || nneg == 0) {
    throw_data("auc needs both classes; got " + std::to_string(npos) +
               " positives and " + std::to_string(nneg) + " negatives");
  }
  double wins = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / (static_cast<double>(npos) * static_cast<double>(nneg));
}

// ---- shared fine-tuning plumbing -----------------------------------------------

nn::Node* patient_cls(model::Model& m, nn::Tape& t,
                      const data::PatientRecord& rec, const Mat& patches,
                      const std::vector<Omics>& input_modalities,
                      nn::Ctx& ctx) {
  const masking::MaskPlan plan =
      masking::explicit_mask_plan(input_modalities, {}, m.token_counts());
  std::array<const Vec*, kNumOmics> profiles{};
  for (Omics o : input_modalities) {
    if (!rec.has_omics(o)) {
      throw_data("patient " + rec.id + ": " + omics_name(o) +
                 " is a model input but the profile is absent");
    }
    const data::OmicsProfile& prof = rec.profile(o);
    if (!prof.transformed) {
      throw_data("patient " + rec.id + ": " + omics_name(o) +
                 " profile holds raw values; transform the cohort first");
    }
    profiles[static_cast<int>(o)] = &prof.values;
  }
  model::Model::Encoded enc = m.encode(t, patches, profiles, plan, ctx);
  return m.cls_output(t, enc);
}

namespace {

std::vector<Omics> dedupe_modalities(const std::vector<Omics>& mods) {
  std::set<Omics> s(mods.begin(), mods.end());
  return {s.begin(), s.end()};
}

void check_common(const char* prefix, int epochs, int batch_size,
                  double dropout, double weight_decay) {
  const std::string p(prefix);
  if (epochs < 1) throw_config(p + ".epochs: must be positive");
  if (batch_size < 1) throw_config(p + ".batch_size: must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw_config(p + ".dropout: must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) {
    throw_config(p + ".weight_decay: must be >= 0");
  }
}

}  // namespace

// ---- few-shot subtyping ----------------------------------------------------------

void FewShotConfig::validate() const {
  if (k < 1) throw_config("few_shot.k: must be positive");
  if (runs < 1) throw_config("few_shot.runs: must be positive");
  if (num_classes != 2) {
    throw_config("few_shot.num_classes: AUC reporting requires exactly 2");
  }
  check_common("few_shot", epochs, batch_size, dropout, weight_decay);
  if (!(lr > 0.0)) throw_config("few_shot.lr: must be positive");
}

FewShotResult few_shot_protocol(const model::Model& base,
                                const data::Cohort& cohort,
                                const FewShotConfig& cfg) {
  cfg.validate();
  const std::vector<Omics> inputs = dedupe_modalities(cfg.input_modalities);

  std::vector<std::vector<int>> by_class(
      static_cast<std::size_t>(cfg.num_classes));
  for (std::size_t i = 0; i < cohort.patients.size(); ++i) {
    const data::PatientRecord& rec = cohort.patients[i];
    if (!rec.subtype) continue;
    const int y = *rec.subtype;
    if (y < 0 || y >= cfg.num_classes) {
      throw_data("patient " + rec.id + ": subtype " + std::to_string(y) +
                 " outside [0, " + std::to_string(cfg.num_classes) + ")");
    }
    by_class[static_cast<std::size_t>(y)].push_back(static_cast<int>(i));
  }
  for (int c = 0; c < cfg.num_classes; ++c) {
    const auto n = by_class[static_cast<std::size_t>(c)].size();
    if (n < static_cast<std::size_t>(cfg.k) + 1) {
      throw_data("class " + std::to_string(c) + " has " + std::to_string(n) +
                 " labeled patients; a " + std::to_string(cfg.k) +
                 "-shot draw needs at least " + std::to_string(cfg.k + 1));
    }
  }

  const Rng root = Rng(cfg.seed).derive("fewshot");
  FewShotResult result;
  for (int run = 0; run < cfg.runs; ++run) {
    const Rng rrng = root.derive(static_cast<std::uint64_t>(run));
    std::vector<int> train_idx;
    std::vector<bool> in_train(cohort.patients.size(), false);
    for (int c = 0; c < cfg.num_classes; ++c) {
      const auto& pool = by_class[static_cast<std::size_t>(c)];
      Rng draw = rrng.derive("draw").derive(static_cast<std::uint64_t>(c));
      for (int pick : draw.sample_without_replacement(
               static_cast<int>(pool.size()), cfg.k)) {
        const int pi = pool[static_cast<std::size_t>(pick)];
        train_idx.push_back(pi);
        in_train[static_cast<std::size_t>(pi)] = true;
      }
    }

    std::unique_ptr<model::Model> m = base.clone();
    m->set_dropout(cfg.dropout);
    SubtypeHead head(m->params(), "head.subtype", m->config().d,
                     cfg.num_classes);
    nn::AdamW opt(m->params(), adamw_with_decay(cfg.weight_decay));

    const int train_n = static_cast<int>(train_idx.size());
    const int steps = (train_n + cfg.batch_size - 1) / cfg.batch_size;
    std::vector<int> order = train_idx;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      Rng shuffle_rng =
          rrng.derive("order").derive(static_cast<std::uint64_t>(epoch));
      shuffle_rng.shuffle(order);
      for (int s = 0; s < steps; ++s) {
        const int lo = s * cfg.batch_size;
        const int hi = std::min(lo + cfg.batch_size, train_n);
        nn::Tape t;
        Rng drop_rng = rrng.derive("dropout")
                           .derive(static_cast<std::uint64_t>(epoch))
                           .derive(static_cast<std::uint64_t>(s));
        nn::Ctx ctx{true, &drop_rng};
        std::vector<nn::Node*> rows;
        std::vector<int> labels;
        for (int i = lo; i < hi; ++i) {
          const int pi = order[static_cast<std::size_t>(i)];
          const data::PatientRecord& rec =
              cohort.patients[static_cast<std::size_t>(pi)];
          const Mat patches = model::sample_patches(
              rec.patches, m->config().patch_sample,
              rrng.derive("patches")
                  .derive(static_cast<std::uint64_t>(epoch))
                  .derive(static_cast<std::uint64_t>(pi)));
          rows.push_back(patient_cls(*m, t, rec, patches, inputs, ctx));
          labels.push_back(*rec.subtype);
        }
        nn::Node* logits = head(t, nn::concat_rows(t, rows));
        nn::Node* loss = cross_entropy(t, logits, labels);
        if (!std::isfinite(loss->value(0, 0))) {
          throw_numeric("non-finite subtyping loss in run " +
                        std::to_string(run) + " epoch " +
                        std::to_string(epoch));
        }
        m->params().zero_grads();
        t.backward(loss);
        m->params().ensure_grads();
        opt.step(cfg.lr);
      }
    }

    std::vector<double> scores;
    std::vector<int> eval_labels;
    nn::Ctx eval_ctx{false, nullptr};
    for (std::size_t pi = 0; pi < cohort.patients.size(); ++pi) {
      const data::PatientRecord& rec = cohort.patients[pi];
      if (!rec.subtype || in_train[pi]) continue;
      nn::Tape t;
      nn::Node* logits = head(
          t, patient_cls(*m, t, rec, rec.patches.embeddings, inputs, eval_ctx));
      scores.push_back(logits->value(0, 1) - logits->value(0, 0));
      eval_labels.push_back(*rec.subtype);
    }

    FewShotRun rr;
    rr.run = run;
    rr.train_n = train_n;
    rr.eval_n = static_cast<long>(scores.size());
    rr.auc = auc(scores, eval_labels);
    result.runs.push_back(rr);
  }

  std::vector<double> aucs;
  for (const FewShotRun& rr : result.runs) aucs.push_back(rr.auc);
  result.mean = std::accumulate(aucs.begin(), aucs.end(), 0.0) /
                static_cast<double>(aucs.size());
  result.stddev = sample_std(aucs, result.mean);
  return result;
}

// ---- survival cross-validation ------------------------------------------------

void SurvivalCvConfig::validate() const {
  if (folds < 2) throw_config("survival.folds: must be at least 2");
  if (num_intervals < 2) {
    throw_config("survival.num_intervals: must be at least 2");
  }
  check_common("survival", epochs, batch_size, dropout, weight_decay);
  if (warmup_epochs < 0 || warmup_epochs > epochs) {
    throw_config("survival.warmup_epochs: must lie in [0, epochs]");
  }
  if (!(lr_start >= 0.0)) throw_config("survival.lr_start: must be >= 0");
  if (!(lr_peak > 0.0)) throw_config("survival.lr_peak: must be positive");
  if (!(lr_final >= 0.0)) throw_config("survival.lr_final: must be >= 0");
}

nn::LrSchedule SurvivalCvConfig::schedule() const {
  return nn::LrSchedule{warmup_epochs, epochs, lr_start, lr_peak, lr_final};
}

SurvivalCvResult survival_cv(const model::Model& base,
                             const data::Cohort& cohort,
                             const SurvivalCvConfig& cfg) {
  cfg.validate();
  const std::vector<Omics> inputs = dedupe_modalities(cfg.input_modalities);

  std::vector<int> labeled;
  for (std::size_t i = 0; i < cohort.patients.size(); ++i) {
    if (cohort.patients[i].survival) labeled.push_back(static_cast<int>(i));
  }
  if (labeled.size() < static_cast<std::size_t>(cfg.folds)) {
    throw_data("cross-validation over " + std::to_string(cfg.folds) +
               " folds needs at least that many survival-labeled patients, " +
               "got " + std::to_string(labeled.size()));
  }
  Rng fold_rng = Rng(cfg.seed).derive("folds");
  fold_rng.shuffle(labeled);
  const int n = static_cast<int>(labeled.size());

  SurvivalCvResult result;
  std::vector<double> defined_values;
  for (int fold = 0; fold < cfg.folds; ++fold) {
    const int lo = fold * n / cfg.folds;
    const int hi = (fold + 1) * n / cfg.folds;
    std::vector<int> test_idx(labeled.begin() + lo, labeled.begin() + hi);
    std::vector<int> train_idx;
    train_idx.insert(train_idx.end(), labeled.begin(), labeled.begin() + lo);
    train_idx.insert(train_idx.end(), labeled.begin() + hi, labeled.end());

    std::vector<double> train_times;
    for (int pi : train_idx) {
      train_times.push_back(
          cohort.patients[static_cast<std::size_t>(pi)].survival->time);
    }
    const DiscretizationRule rule =
        DiscretizationRule::quantiles(train_times, cfg.num_intervals);

    std::unique_ptr<model::Model> m = base.clone();
    m->set_dropout(cfg.dropout);
    SurvivalHead head(m->params(), "head.surv", m->config().d, rule);
    nn::AdamW opt(m->params(), adamw_with_decay(cfg.weight_decay));
    const nn::LrSchedule sched = cfg.schedule();

    const Rng frng =
        Rng(cfg.seed).derive("fold").derive(static_cast<std::uint64_t>(fold));
    const int train_n = static_cast<int>(train_idx.size());
    const int steps = (train_n + cfg.batch_size - 1) / cfg.batch_size;
    std::vector<int> order = train_idx;
    long clamped = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      Rng shuffle_rng =
          frng.derive("order").derive(static_cast<std::uint64_t>(epoch));
      shuffle_rng.shuffle(order);
      for (int s = 0; s < steps; ++s) {
        const int lo_b = s * cfg.batch_size;
        const int hi_b = std::min(lo_b + cfg.batch_size, train_n);
        nn::Tape t;
        Rng drop_rng = frng.derive("dropout")
                           .derive(static_cast<std::uint64_t>(epoch))
                           .derive(static_cast<std::uint64_t>(s));
        nn::Ctx ctx{true, &drop_rng};
        std::vector<nn::Node*> rows;
        std::vector<data::SurvivalLabel> labels;
        for (int i = lo_b; i < hi_b; ++i) {
          const int pi = order[static_cast<std::size_t>(i)];
          const data::PatientRecord& rec =
              cohort.patients[static_cast<std::size_t>(pi)];
          const Mat patches = model::sample_patches(
              rec.patches, m->config().patch_sample,
              frng.derive("patches")
                  .derive(static_cast<std::uint64_t>(epoch))
                  .derive(static_cast<std::uint64_t>(pi)));
          rows.push_back(patient_cls(*m, t, rec, patches, inputs, ctx));
          labels.push_back(*rec.survival);
        }
        nn::Node* logits = head(t, nn::concat_rows(t, rows));
        nn::Node* loss = hazard_nll(t, logits, labels, rule, &clamped);
        if (!std::isfinite(loss->value(0, 0))) {
          throw_numeric("non-finite survival loss in fold " +
                        std::to_string(fold) + " epoch " +
                        std::to_string(epoch));
        }
        m->params().zero_grads();
        t.backward(loss);
        m->params().ensure_grads();
        opt.step(sched.at(epoch + static_cast<double>(s) /
                                      static_cast<double>(steps)));
      }
    }
    if (clamped > 0) {
      result.warnings.push_back("fold " + std::to_string(fold) + ": " +
                                std::to_string(clamped) +
                                " training times clamped into the last "
                                "interval");
    }

    std::vector<double> risks;
    std::vector<data::SurvivalLabel> test_labels;
    nn::Ctx eval_ctx{false, nullptr};
    for (int pi : test_idx) {
      const data::PatientRecord& rec =
          cohort.patients[static_cast<std::size_t>(pi)];
      nn::Tape t;
      nn::Node* logits = head(
          t, patient_cls(*m, t, rec, rec.patches.embeddings, inputs, eval_ctx));
      risks.push_back(risk_score(logits->value.row(0).transpose()));
      test_labels.push_back(*rec.survival);
    }
    const CIndex ci = concordance_index(risks, test_labels);

    SurvivalFold fr;
    fr.fold = fold;
    fr.defined = ci.defined;
    fr.c_index = ci.defined ? ci.value : kNaN;
    fr.comparable = ci.comparable;
    fr.train_n = train_n;
    fr.test_n = static_cast<long>(test_idx.size());
    result.folds.push_back(fr);
    if (ci.defined) {
      defined_values.push_back(ci.value);
    } else {
      result.warnings.push_back(
          "fold " + std::to_string(fold) +
          ": no comparable pairs; concordance undefined, excluded from the "
          "mean");
    }
  }

  result.defined_folds = static_cast<int>(defined_values.size());
  if (defined_values.empty()) {
    result.mean = kNaN;
    result.stddev = kNaN;
    result.warnings.push_back("no fold produced a defined concordance index");
  } else {
    result.mean =
        std::accumulate(defined_values.begin(), defined_values.end(), 0.0) /
        static_cast<double>(defined_values.size());
    result.stddev = sample_std(defined_values, result.mean);
  }
  return result;
}

// ---- tidy results -----------------------------------------------------------

std::vector<ResultRow> tidy_rows(const FewShotResult& r, std::uint64_t seed) {
  std::vector<ResultRow> rows;
  for (const FewShotRun& run : r.runs) {
    rows.push_back({"subtype_few_shot", "run" + std::to_string(run.run), "auc",
                    run.auc, seed});
  }
  rows.push_back({"subtype_few_shot", "all", "auc_mean", r.mean, seed});
  rows.push_back({"subtype_few_shot", "all", "auc_std", r.stddev, seed});
  return rows;
}

std::vector<ResultRow> tidy_rows(const SurvivalCvResult& r,
                                 std::uint64_t seed) {
  std::vector<ResultRow> rows;
  for (const SurvivalFold& f : r.folds) {
    rows.push_back({"survival_cv", "fold" + std::to_string(f.fold), "c_index",
                    f.c_index, seed});
  }
  rows.push_back({"survival_cv", "all", "c_index_mean", r.mean, seed});
  rows.push_back({"survival_cv", "all", "c_index_std", r.stddev, seed});
  return rows;
}

void write_results_csv(const std::filesystem::path& path,
                       const std::vector<ResultRow>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw_data("cannot write results file: " + path.string());
  f << "task,split,metric,value,seed\n";
  for (const ResultRow& r : rows) {
    f << r.task << ',' << r.split << ',' << r.metric << ','
      << (std::isnan(r.value) ? std::string("nan") : format_double(r.value))
      << ',' << r.seed << '\n';
  }
  if (!f) throw_data("short write to results file: " + path.string());
}

}  // namespace momics::downstream
