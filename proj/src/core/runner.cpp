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

#include "core/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <limits>
#include <ostream>

#include "core/recon.hpp"

namespace momics::runner {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Line-oriented run log: one structured record per line, mirrored to the
// optional echo stream. The timestamp appears only in the header line so
// that record bodies stay byte-reproducible.
class RunLog {
 public:
  RunLog(const fs::path& dir, const std::string& command, std::ostream* echo)
      : echo_(echo) {
    const fs::path path = dir / (command + ".log");
    file_.open(path, std::ios::trunc);
    if (!file_) throw_data("cannot write log file: " + path.string());
    line("# momics " + command + " " + utc_now());
  }

  void line(const std::string& s) {
    if (file_.is_open()) file_ << s << '\n' << std::flush;
    if (echo_ != nullptr) *echo_ << s << '\n';
  }

 private:
  std::ofstream file_;
  std::ostream* echo_;
};

std::string fmt(double v) {
  return std::isnan(v) ? std::string("nan") : format_double(v);
}

void require_out(const config::RunConfig& cfg) {
  if (cfg.out.empty()) throw_config("run.out: required (pass --out)");
}

void require_manifest(const config::RunConfig& cfg) {
  if (cfg.manifest.empty()) {
    throw_config("data.manifest: required for this command");
  }
}

void require_checkpoint(const config::RunConfig& cfg) {
  if (cfg.checkpoint.empty()) {
    throw_config("run.checkpoint: required (pass --checkpoint)");
  }
}

void check_threads(const config::RunConfig& cfg) {
  if (cfg.threads < 1) throw_config("run.threads: must be positive");
}

void write_effective_config(const config::RunConfig& cfg) {
  cfg.to_ini().save((fs::path(cfg.out) / "effective-config.ini").string());
}

void plan_line(const RunOptions& opt, const std::string& s) {
  if (opt.echo != nullptr) *opt.echo << s << '\n';
}

data::Cohort load_dataset(const config::RunConfig& cfg) {
  require_manifest(cfg);
  return data::load_cohort(cfg.manifest);
}

// Fills model.patch_dim from the dataset when unset and rejects a mismatch.
void resolve_patch_dim(config::RunConfig& cfg, const data::Cohort& cohort) {
  if (cfg.model.patch_dim == 0) {
    cfg.model.patch_dim = cohort.patch_dim;
  } else if (cfg.model.patch_dim != cohort.patch_dim) {
    throw_config("model.patch_dim: " + std::to_string(cfg.model.patch_dim) +
                 " does not match the dataset patch dimension " +
                 std::to_string(cohort.patch_dim));
  }
}

void check_groupings_match(const model::Model& m, const data::Cohort& cohort,
                           const std::string& checkpoint) {
  for (Omics o : kAllOmics) {
    if (data::grouping_to_text(m.grouping(o)) !=
        data::grouping_to_text(cohort.grouping(o))) {
      throw_data("checkpoint " + checkpoint + ": " + omics_name(o) +
                 " grouping does not match the dataset");
    }
  }
}

// Loads the checkpoint model or builds a fresh one seeded from the run seed.
std::unique_ptr<model::Model> base_model(config::RunConfig& cfg,
                                         const data::Cohort& cohort) {
  resolve_patch_dim(cfg, cohort);
  if (cfg.checkpoint.empty()) {
    return std::make_unique<model::Model>(cfg.model, cohort.groupings,
                                          cfg.seed);
  }
  model::LoadedCheckpoint loaded = model::load_checkpoint(cfg.checkpoint);
  check_groupings_match(*loaded.model, cohort, cfg.checkpoint);
  if (loaded.model->config().patch_dim != cohort.patch_dim) {
    throw_data("checkpoint " + cfg.checkpoint + ": patch dimension " +
               std::to_string(loaded.model->config().patch_dim) +
               " does not match the dataset's " +
               std::to_string(cohort.patch_dim));
  }
  cfg.model = loaded.model->config();
  return std::move(loaded.model);
}

void check_input_modalities(const data::Cohort& cohort,
                            const std::vector<Omics>& inputs,
                            bool need_subtype) {
  for (const data::PatientRecord& rec : cohort.patients) {
    if (need_subtype ? !rec.subtype.has_value() : !rec.survival.has_value()) {
      continue;
    }
    for (Omics o : inputs) {
      if (!rec.has_omics(o)) {
        throw_data("patient " + rec.id + ": " + omics_name(o) +
                   " is configured as a model input but the profile is "
                   "absent");
      }
    }
  }
}

std::string modality_losses(const std::array<double, kNumOmics>& pm) {
  std::string s;
  for (Omics o : kAllOmics) {
    s += " " + omics_name(o) + "=" + fmt(pm[static_cast<int>(o)]);
  }
  return s;
}

}  // namespace

// ---- synth-data -----------------------------------------------------------

void cmd_synth(config::RunConfig cfg, const RunOptions& opt) {
  check_threads(cfg);
  cfg.synth.seed = Rng(cfg.seed).derive("data").state();
  cfg.synth.validate();
  if (opt.dry_run) {
    plan_line(opt, "plan: synth-data patients=" +
                       std::to_string(cfg.synth.num_patients) + " out=" +
                       (cfg.out.empty() ? "<unset>" : cfg.out));
    return;
  }
  require_out(cfg);
  const fs::path out(cfg.out);
  if (fs::exists(out) && !fs::is_empty(out) && !opt.force) {
    throw_data("output directory " + out.string() +
               " is not empty (pass --force to overwrite)");
  }
  fs::create_directories(out);
  write_effective_config(cfg);
  RunLog log(out, "synth-data", opt.echo);

  const data::Cohort cohort = synth::generate_cohort(cfg.synth);
  data::save_cohort(out, cohort);
  log.line("event=synth patients=" + std::to_string(cohort.patients.size()) +
           " patch_dim=" + std::to_string(cohort.patch_dim) + " manifest=" +
           (out / "manifest.ini").string());
}

// ---- pretrain ----------------------------------------------------------------

void cmd_pretrain(config::RunConfig cfg, const RunOptions& opt) {
  check_threads(cfg);
  const data::Cohort cohort = load_dataset(cfg);
  resolve_patch_dim(cfg, cohort);

  model::PretrainConfig pcfg = cfg.pretrain;
  pcfg.seed = cfg.seed;
  pcfg.validate();
  if (cfg.checkpoint_every < 0) {
    throw_config("pretrain.checkpoint_every: must be >= 0");
  }

  std::unique_ptr<model::Model> m;
  int start_epoch = 0;
  std::optional<model::LoadedCheckpoint> loaded;
  std::string seed_note;
  if (!cfg.checkpoint.empty()) {
    loaded = model::load_checkpoint(cfg.checkpoint);
    check_groupings_match(*loaded->model, cohort, cfg.checkpoint);
    if (loaded->root_seed != cfg.seed) {
      seed_note = "event=warning msg=\"seed " + std::to_string(cfg.seed) +
                  " overridden by checkpoint seed " +
                  std::to_string(loaded->root_seed) + " for resume\"";
      cfg.seed = loaded->root_seed;
      pcfg.seed = loaded->root_seed;
    }
    cfg.model = loaded->model->config();
    start_epoch = loaded->epoch;
    if (start_epoch > pcfg.epochs) {
      throw_config("checkpoint is at epoch " + std::to_string(start_epoch) +
                   ", beyond pretrain.epochs = " +
                   std::to_string(pcfg.epochs));
    }
    m = std::move(loaded->model);
  } else {
    m = std::make_unique<model::Model>(cfg.model, cohort.groupings, cfg.seed);
  }

  if (opt.dry_run) {
    const int steps = (static_cast<int>(cohort.patients.size()) +
                       pcfg.batch_size - 1) /
                      pcfg.batch_size;
    plan_line(opt, "plan: pretrain patients=" +
                       std::to_string(cohort.patients.size()) + " epochs=" +
                       std::to_string(start_epoch) + ".." +
                       std::to_string(pcfg.epochs) + " steps_per_epoch=" +
                       std::to_string(steps) + " params=" +
                       std::to_string(m->params().scalar_count()));
    return;
  }
  require_out(cfg);
  const fs::path out(cfg.out);
  fs::create_directories(out);
  write_effective_config(cfg);
  RunLog log(out, "pretrain", opt.echo);
  if (!seed_note.empty()) log.line(seed_note);

  model::Pretrainer trainer(*m, cohort, pcfg);
  if (loaded) {
    if (!loaded->has_optimizer) {
      throw_data("checkpoint " + cfg.checkpoint +
                 " carries no optimizer state; cannot resume training");
    }
    trainer.resume_at_epoch(start_epoch, loaded->opt_step);
    loaded->restore_optimizer(trainer.optimizer());
    log.line("event=resume epoch=" + std::to_string(start_epoch) +
             " opt_step=" + std::to_string(loaded->opt_step));
  }

  double epoch_loss = 0.0;
  std::array<double, kNumOmics> epoch_pm_sum{};
  std::array<int, kNumOmics> epoch_pm_cnt{};
  int epoch_steps = 0;
  while (!trainer.done()) {
    const model::Pretrainer::StepRecord rec = trainer.step();
    log.line("event=step epoch=" + std::to_string(rec.epoch) + " step=" +
             std::to_string(rec.step) + " lr=" + fmt(rec.lr) + " loss=" +
             fmt(rec.loss) + modality_losses(rec.per_modality));
    for (const std::string& mask : rec.mask_logs) {
      log.line("event=mask epoch=" + std::to_string(rec.epoch) + " step=" +
               std::to_string(rec.step) + " " + mask);
    }
    epoch_loss += rec.loss;
    for (int oi = 0; oi < kNumOmics; ++oi) {
      if (!std::isnan(rec.per_modality[static_cast<std::size_t>(oi)])) {
        epoch_pm_sum[static_cast<std::size_t>(oi)] +=
            rec.per_modality[static_cast<std::size_t>(oi)];
        ++epoch_pm_cnt[static_cast<std::size_t>(oi)];
      }
    }
    ++epoch_steps;
    if (rec.step + 1 == trainer.steps_per_epoch()) {
      std::array<double, kNumOmics> pm{};
      for (int oi = 0; oi < kNumOmics; ++oi) {
        pm[static_cast<std::size_t>(oi)] =
            epoch_pm_cnt[static_cast<std::size_t>(oi)] > 0
                ? epoch_pm_sum[static_cast<std::size_t>(oi)] /
                      epoch_pm_cnt[static_cast<std::size_t>(oi)]
                : std::numeric_limits<double>::quiet_NaN();
      }
      log.line("event=epoch epoch=" + std::to_string(rec.epoch) +
               " mean_loss=" + fmt(epoch_loss / epoch_steps) +
               modality_losses(pm));
      epoch_loss = 0.0;
      epoch_pm_sum = {};
      epoch_pm_cnt = {};
      epoch_steps = 0;

      const int completed = rec.epoch + 1;
      if (cfg.checkpoint_every > 0 && completed % cfg.checkpoint_every == 0 &&
          completed < pcfg.epochs) {
        const fs::path ck =
            out / ("checkpoint_epoch" + std::to_string(completed) + ".ckpt");
        model::save_checkpoint(ck, *m, &trainer.optimizer(), completed,
                               pcfg.seed);
        log.line("event=checkpoint epoch=" + std::to_string(completed) +
                 " path=" + ck.string());
      }
    }
  }

  const fs::path final_path = out / "model.ckpt";
  model::save_checkpoint(final_path, *m, &trainer.optimizer(), pcfg.epochs,
                         pcfg.seed);
  const model::LoadedCheckpoint reloaded = model::load_checkpoint(final_path);
  for (const auto& p : m->params().entries()) {
    const nn::Node* q = reloaded.model->params().find(p->name);
    if (q == nullptr || q->value.rows() != p->node.value.rows() ||
        q->value.cols() != p->node.value.cols() ||
        std::memcmp(q->value.data(), p->node.value.data(),
                    sizeof(double) *
                        static_cast<std::size_t>(p->node.value.size())) != 0) {
      throw_internal("final checkpoint failed reload verification: " +
                     p->name);
    }
  }
  log.line("event=checkpoint epoch=" + std::to_string(pcfg.epochs) + " path=" +
           final_path.string() + " verified=1");
}

// ---- fine-tuning ----------------------------------------------------------------

void cmd_finetune_subtype(config::RunConfig cfg, const RunOptions& opt) {
  check_threads(cfg);
  data::Cohort cohort = load_dataset(cfg);
  std::unique_ptr<model::Model> m = base_model(cfg, cohort);

  downstream::FewShotConfig fscfg = cfg.few_shot;
  fscfg.seed = cfg.seed;
  fscfg.validate();
  check_input_modalities(cohort, fscfg.input_modalities, true);

  if (opt.dry_run) {
    plan_line(opt, "plan: finetune-subtype k=" + std::to_string(fscfg.k) +
                       " runs=" + std::to_string(fscfg.runs) + " init=" +
                       (cfg.checkpoint.empty() ? "scratch" : cfg.checkpoint));
    return;
  }
  require_out(cfg);
  fs::create_directories(cfg.out);
  write_effective_config(cfg);
  RunLog log(cfg.out, "finetune-subtype", opt.echo);
  log.line(cfg.checkpoint.empty()
               ? std::string("event=init source=scratch")
               : "event=init source=checkpoint path=" + cfg.checkpoint);

  const downstream::FewShotResult result =
      downstream::few_shot_protocol(*m, cohort, fscfg);
  for (const downstream::FewShotRun& run : result.runs) {
    log.line("event=run run=" + std::to_string(run.run) + " auc=" +
             fmt(run.auc) + " train_n=" + std::to_string(run.train_n) +
             " eval_n=" + std::to_string(run.eval_n));
  }
  log.line("event=summary auc_mean=" + fmt(result.mean) + " auc_std=" +
           fmt(result.stddev));
  downstream::write_results_csv(fs::path(cfg.out) / "results.csv",
                                downstream::tidy_rows(result, cfg.seed));
}

void cmd_finetune_survival(config::RunConfig cfg, const RunOptions& opt) {
  check_threads(cfg);
  data::Cohort cohort = load_dataset(cfg);
  std::unique_ptr<model::Model> m = base_model(cfg, cohort);

  downstream::SurvivalCvConfig svcfg = cfg.survival;
  svcfg.seed = cfg.seed;
  svcfg.validate();
  check_input_modalities(cohort, svcfg.input_modalities, false);

  if (opt.dry_run) {
    plan_line(opt, "plan: finetune-survival folds=" +
                       std::to_string(svcfg.folds) + " epochs=" +
                       std::to_string(svcfg.epochs) + " init=" +
                       (cfg.checkpoint.empty() ? "scratch" : cfg.checkpoint));
    return;
  }
  require_out(cfg);
  fs::create_directories(cfg.out);
  write_effective_config(cfg);
  RunLog log(cfg.out, "finetune-survival", opt.echo);
  log.line(cfg.checkpoint.empty()
               ? std::string("event=init source=scratch")
               : "event=init source=checkpoint path=" + cfg.checkpoint);

  const downstream::SurvivalCvResult result =
      downstream::survival_cv(*m, cohort, svcfg);
  for (const downstream::SurvivalFold& f : result.folds) {
    log.line("event=fold fold=" + std::to_string(f.fold) + " c_index=" +
             fmt(f.c_index) + " comparable=" + std::to_string(f.comparable) +
             " train_n=" + std::to_string(f.train_n) + " test_n=" +
             std::to_string(f.test_n));
  }
  for (const std::string& w : result.warnings) {
    log.line("event=warning msg=\"" + w + "\"");
  }
  log.line("event=summary c_index_mean=" + fmt(result.mean) + " c_index_std=" +
           fmt(result.stddev) + " defined_folds=" +
           std::to_string(result.defined_folds));
  downstream::write_results_csv(fs::path(cfg.out) / "results.csv",
                                downstream::tidy_rows(result, cfg.seed));
}

// ---- generation and evaluation ---------------------------------------------------

void cmd_generate(config::RunConfig cfg, const RunOptions& opt) {
  check_threads(cfg);
  require_checkpoint(cfg);
  const std::vector<recon::Combo> combos = recon::parse_combo_list(cfg.combos);
  data::Cohort cohort = load_dataset(cfg);
  std::unique_ptr<model::Model> m = base_model(cfg, cohort);

  for (const recon::Combo& combo : combos) {
    for (const data::PatientRecord& rec : cohort.patients) {
      for (Omics o : combo.inputs) {
        if (!rec.has_omics(o)) {
          throw_data("patient " + rec.id + ": " + omics_name(o) +
                     " required by combo " + combo.label() + " but absent");
        }
      }
    }
  }

  if (opt.dry_run) {
    std::string labels;
    for (const recon::Combo& c : combos) {
      if (!labels.empty()) labels += ";";
      labels += c.label();
    }
    plan_line(opt, "plan: generate combos=" + labels + " patients=" +
                       std::to_string(cohort.patients.size()));
    return;
  }
  require_out(cfg);
  const fs::path out(cfg.out);
  fs::create_directories(out);
  write_effective_config(cfg);
  RunLog log(out, "generate", opt.echo);

  {
    std::ofstream ids(out / "patients.txt", std::ios::trunc);
    if (!ids) throw_data("cannot write " + (out / "patients.txt").string());
    for (const data::PatientRecord& rec : cohort.patients) {
      ids << rec.id << '\n';
    }
  }

  for (const recon::Combo& combo : combos) {
    const int nf = cohort.features(combo.target);
    Mat pred(static_cast<Eigen::Index>(cohort.patients.size()), nf);
    for (std::size_t i = 0; i < cohort.patients.size(); ++i) {
      const auto result =
          m->generate(cohort.patients[i], combo.inputs, {combo.target});
      pred.row(static_cast<Eigen::Index>(i)) =
          result[static_cast<int>(combo.target)]->transpose();
    }
    const fs::path file =
        out / ("gen_" + recon::combo_file_label(combo) + ".bin");
    data::write_matrix_payload(file, pred);
    log.line("event=generate combo=" + combo.label() + " patients=" +
             std::to_string(pred.rows()) + " features=" + std::to_string(nf) +
             " path=" + file.string());
  }
}

void cmd_evaluate(config::RunConfig cfg, const RunOptions& opt) {
  check_threads(cfg);
  require_checkpoint(cfg);
  const std::vector<recon::Combo> combos = recon::parse_combo_list(cfg.combos);
  data::Cohort cohort = load_dataset(cfg);
  std::unique_ptr<model::Model> m = base_model(cfg, cohort);

  if (opt.dry_run) {
    plan_line(opt, "plan: evaluate combos=" + std::to_string(combos.size()) +
                       " patients=" + std::to_string(cohort.patients.size()));
    return;
  }
  require_out(cfg);
  const fs::path out(cfg.out);
  fs::create_directories(out);
  write_effective_config(cfg);
  RunLog log(out, "evaluate", opt.echo);

  const std::vector<recon::ReconReport> reports =
      recon::evaluate_combinations(*m, cohort, combos);
  recon::write_reports(out, reports);
  for (const recon::ReconReport& rep : reports) {
    log.line("event=combo combo=" + rep.combo.label() + " median=" +
             fmt(rep.median) + " excluded=" +
             std::to_string(rep.pearson.excluded.size()));
  }

  // Direction-of-change accuracy between the two subtype groups, when both
  // are populated enough for the significance test.
  std::vector<Eigen::Index> class0, class1;
  for (std::size_t i = 0; i < cohort.patients.size(); ++i) {
    const auto& subtype = cohort.patients[i].subtype;
    if (!subtype) continue;
    if (*subtype == 0) class0.push_back(static_cast<Eigen::Index>(i));
    if (*subtype == 1) class1.push_back(static_cast<Eigen::Index>(i));
  }
  if (class0.size() >= 2 && class1.size() >= 2) {
    std::ofstream dir_csv(out / "direction.csv", std::ios::trunc);
    if (!dir_csv) throw_data("cannot write " + (out / "direction.csv").string());
    dir_csv << "combo,accuracy,significant,defined\n";
    for (const recon::ReconReport& rep : reports) {
      Mat pred0(static_cast<Eigen::Index>(class0.size()), rep.pred.cols());
      Mat pred1(static_cast<Eigen::Index>(class1.size()), rep.pred.cols());
      Mat true0(pred0.rows(), rep.pred.cols());
      Mat true1(pred1.rows(), rep.pred.cols());
      for (std::size_t r = 0; r < class0.size(); ++r) {
        pred0.row(static_cast<Eigen::Index>(r)) = rep.pred.row(class0[r]);
        true0.row(static_cast<Eigen::Index>(r)) = rep.truth.row(class0[r]);
      }
      for (std::size_t r = 0; r < class1.size(); ++r) {
        pred1.row(static_cast<Eigen::Index>(r)) = rep.pred.row(class1[r]);
        true1.row(static_cast<Eigen::Index>(r)) = rep.truth.row(class1[r]);
      }
      const recon::DirectionResult dir =
          recon::direction_accuracy(pred0, pred1, true0, true1, 0.01);
      dir_csv << rep.combo.label() << ','
              << (dir.defined ? format_double(dir.accuracy) : "nan") << ','
              << dir.significant << ',' << (dir.defined ? 1 : 0) << '\n';
      log.line("event=direction combo=" + rep.combo.label() + " accuracy=" +
               (dir.defined ? fmt(dir.accuracy) : "nan") + " significant=" +
               std::to_string(dir.significant));
    }
  } else {
    log.line("event=direction skipped=1 reason=insufficient_subtype_labels");
  }
}

}  // namespace momics::runner
