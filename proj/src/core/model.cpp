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

#include "core/model.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace momics::model {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes little-endian storage");

std::string histo_mode_name(HistoMode m) {
  return m == HistoMode::Prototype ? "prototype" : "abmil";
}

HistoMode histo_mode_from_name(const std::string& s) {
  if (s == "prototype") return HistoMode::Prototype;
  if (s == "abmil") return HistoMode::Abmil;
  throw_config("model.histo_mode: expected 'prototype' or 'abmil', got '" + s +
               "'");
}

// ---- config ---------------------------------------------------------------

void ModelConfig::validate() const {
  if (d < 1) throw_config("model.d: must be positive");
  if (heads < 1) throw_config("model.heads: must be positive");
  if (d % heads != 0) throw_config("model.heads: must divide model.d");
  if (mlp_dim < 1) throw_config("model.mlp_dim: must be positive");
  if (encoder_layers < 1) throw_config("model.encoder_layers: must be positive");
  if (decoder_layers < 1) throw_config("model.decoder_layers: must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw_config("model.dropout: must lie in [0, 1)");
  }
  if (num_prototypes < 1) {
    throw_config("model.num_prototypes: must be positive");
  }
  if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0)) {
    throw_config("model.mask_ratio: must lie in [0, 1]");
  }
  if (!(mask_alpha > 0.0)) throw_config("model.mask_alpha: must be positive");
  if (patch_sample < 1) throw_config("model.patch_sample: must be positive");
  if (patch_dim < 1) throw_config("model.patch_dim: must be positive");
}

const std::vector<std::string>& model_config_keys() {
  static const std::vector<std::string> keys = {
      "d",          "heads",          "mlp_dim",    "encoder_layers",
      "decoder_layers", "dropout",    "num_prototypes", "histo_mode",
      "mask_ratio", "mask_alpha",     "patch_sample",   "patch_dim"};
  return keys;
}

void ModelConfig::to_section(IniSection& sec) const {
  sec.set("d", std::to_string(d));
  sec.set("heads", std::to_string(heads));
  sec.set("mlp_dim", std::to_string(mlp_dim));
  sec.set("encoder_layers", std::to_string(encoder_layers));
  sec.set("decoder_layers", std::to_string(decoder_layers));
  sec.set("dropout", format_double(dropout));
  sec.set("num_prototypes", std::to_string(num_prototypes));
  sec.set("histo_mode", histo_mode_name(histo_mode));
  sec.set("mask_ratio", format_double(mask_ratio));
  sec.set("mask_alpha", format_double(mask_alpha));
  sec.set("patch_sample", std::to_string(patch_sample));
  sec.set("patch_dim", std::to_string(patch_dim));
}

void ModelConfig::apply_section(const IniSection& sec) {
  auto geti = [&](const char* key, int& out) {
    if (const std::string* v = sec.find(key)) {
      out = static_cast<int>(parse_long(*v, std::string("model.") + key));
    }
  };
  auto getd = [&](const char* key, double& out) {
    if (const std::string* v = sec.find(key)) {
      out = parse_double(*v, std::string("model.") + key);
    }
  };
  geti("d", d);
  geti("heads", heads);
  geti("mlp_dim", mlp_dim);
  geti("encoder_layers", encoder_layers);
  geti("decoder_layers", decoder_layers);
  getd("dropout", dropout);
  geti("num_prototypes", num_prototypes);
  if (const std::string* v = sec.find("histo_mode")) {
    histo_mode = histo_mode_from_name(*v);
  }
  getd("mask_ratio", mask_ratio);
  getd("mask_alpha", mask_alpha);
  geti("patch_sample", patch_sample);
  geti("patch_dim", patch_dim);
}

// ---- patch sampling ---------------------------------------------------------

Mat sample_patches(const data::PatchEmbeddingSet& patches, int count, Rng rng) {
  const int n = static_cast<int>(patches.embeddings.rows());
  if (n < 1) throw_data("empty patch set");
  if (count < 1) throw_internal("patch sample size must be positive");
  Mat out(count, patches.embeddings.cols());
  if (n >= count) {
    const std::vector<int> idx = rng.sample_without_replacement(n, count);
    for (int i = 0; i < count; ++i) out.row(i) = patches.embeddings.row(idx[i]);
  } else {
    for (int i = 0; i < count; ++i) {
      out.row(i) =
          patches.embeddings.row(static_cast<Eigen::Index>(rng.below(n)));
    }
  }
  return out;
}

// ---- model ------------------------------------------------------------------

Model::Model(const ModelConfig& cfg,
             std::array<data::GroupingScheme, kNumOmics> groupings,
             std::uint64_t init_seed)
    : cfg_(cfg),
      groupings_(std::move(groupings)),
      ps_(Rng(init_seed).derive("init")) {
  cfg_.validate();
  for (Omics o : kAllOmics) {
    const auto& g = groupings_[static_cast<int>(o)];
    g.validate("model " + omics_name(o) + " grouping");
    if (g.modality != o) {
      throw_internal("grouping modality mismatch for " + omics_name(o));
    }
  }

  const int d = cfg_.d;
  if (cfg_.histo_mode == HistoMode::Prototype) {
    histo_tok_ = tok::PrototypeTokenizer(ps_, "histo", cfg_.num_prototypes,
                                         cfg_.patch_dim, d, cfg_.heads);
    cls_ = ps_.create("cls", 1, d, nn::Init::Normal002);
  } else {
    abmil_ = tok::AbmilPool(ps_, "abmil", cfg_.patch_dim, d);
  }
  type_emb_ = ps_.create("type_emb", kNumOmics, d, nn::Init::Normal002);

  for (Omics o : kAllOmics) {
    const int oi = static_cast<int>(o);
    const auto& scheme = groupings_[oi];
    omics_tok_[oi] = tok::OmicsGroupTokenizer(ps_, "tok." + omics_name(o),
                                              scheme, d, cfg_.dropout);
    enc_gidx_[oi] = ps_.create("enc.gidx." + omics_name(o),
                               scheme.num_groups(), d, nn::Init::Normal002);
  }
  for (int i = 0; i < cfg_.encoder_layers; ++i) {
    enc_blocks_.emplace_back(ps_, "enc.block" + std::to_string(i), d,
                             cfg_.heads, cfg_.mlp_dim, cfg_.dropout);
  }
  enc_ln_ = nn::LayerNorm(ps_, "enc.ln", d);

  for (Omics o : kAllOmics) {
    const int oi = static_cast<int>(o);
    const auto& scheme = groupings_[oi];
    const std::string base = "dec." + omics_name(o);
    Decoder& D = dec_[oi];
    D.input_proj = nn::Linear(ps_, base + ".proj", d, d);
    D.mask_token = ps_.create(base + ".mask_token", 1, d, nn::Init::Normal002);
    D.gidx = ps_.create(base + ".gidx", scheme.num_groups(), d,
                        nn::Init::Normal002);
    for (int i = 0; i < cfg_.decoder_layers; ++i) {
      D.blocks.emplace_back(ps_, base + ".block" + std::to_string(i), d,
                            cfg_.heads, cfg_.mlp_dim, cfg_.dropout);
    }
    D.ln = nn::LayerNorm(ps_, base + ".ln", d);
    for (int k = 0; k < scheme.num_groups(); ++k) {
      const std::string zk = base + ".zeta" + std::to_string(k);
      D.zeta_snn.emplace_back(ps_, zk + ".snn", d, d, cfg_.dropout);
      D.zeta_out.emplace_back(
          ps_, zk + ".out", d,
          static_cast<int>(scheme.groups[k].indices.size()));
    }
  }
}

std::array<int, kNumOmics> Model::token_counts() const {
  std::array<int, kNumOmics> counts{};
  for (Omics o : kAllOmics) {
    counts[static_cast<int>(o)] = groupings_[static_cast<int>(o)].num_groups();
  }
  return counts;
}

void Model::set_dropout(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw_config("dropout rate must lie in [0, 1)");
  }
  cfg_.dropout = rate;
  for (auto& b : enc_blocks_) b.rate = rate;
  for (int oi = 0; oi < kNumOmics; ++oi) {
    for (auto& b : omics_tok_[oi].blocks) b.rate = rate;
    for (auto& b : dec_[oi].blocks) b.rate = rate;
    for (auto& b : dec_[oi].zeta_snn) b.rate = rate;
  }
}

Model::Encoded Model::encode(nn::Tape& t, const Mat& patches,
                             const std::array<const Vec*, kNumOmics>& profiles,
                             const masking::MaskPlan& plan, nn::Ctx& ctx) {
  const auto counts = token_counts();
  for (Omics o : kAllOmics) {
    if (plan.token_count(o) != counts[static_cast<int>(o)]) {
      throw_config("mask plan carries " + std::to_string(plan.token_count(o)) +
                   " " + omics_name(o) + " tokens, model has " +
                   std::to_string(counts[static_cast<int>(o)]));
    }
  }
  if (patches.rows() < 1) throw_data("empty patch set");
  if (patches.cols() != cfg_.patch_dim) {
    throw_data("patch embeddings have dimension " +
               std::to_string(patches.cols()) + ", model expects " +
               std::to_string(cfg_.patch_dim));
  }

  Encoded enc;
  nn::Node* S = t.constant(patches);
  std::vector<nn::Node*> parts;
  if (cfg_.histo_mode == HistoMode::Prototype) {
    parts.push_back(cls_);
    parts.push_back(histo_tok_(t, S));
    enc.prefix = 1 + cfg_.num_prototypes;
  } else {
    parts.push_back(abmil_(t, S));
    enc.prefix = 1;
  }

  int row = enc.prefix;
  for (Omics o : kAllOmics) {
    const int oi = static_cast<int>(o);
    enc.offset[oi] = -1;
    enc.visible_idx[oi] = plan.visible_indices(o);
    const int nv = static_cast<int>(enc.visible_idx[oi].size());
    if (nv == 0) continue;
    const Vec* prof = profiles[oi];
    if (prof == nullptr) {
      throw_data(omics_name(o) +
                 " has visible tokens in the mask plan but no profile");
    }
    nn::Node* prow = t.constant(Mat(prof->transpose()));
    nn::Node* T = omics_tok_[oi](t, prow, ctx);
    T = nn::add(t, T, enc_gidx_[oi]);
    T = nn::add_rowvec(t, T, nn::slice_rows(t, type_emb_, oi, 1));
    parts.push_back(nn::select_rows(t, T, enc.visible_idx[oi]));
    enc.offset[oi] = row;
    row += nv;
  }

  nn::Node* x = nn::concat_rows(t, parts);
  for (const auto& block : enc_blocks_) x = block(t, x, ctx);
  enc.z_vis = enc_ln_(t, x);
  return enc;
}

std::vector<nn::Node*> Model::decode_modality(nn::Tape& t, Omics o,
                                              const Encoded& enc,
                                              const masking::MaskPlan& plan,
                                              nn::Ctx& ctx) {
  (void)plan;
  const int oi = static_cast<int>(o);
  const auto& scheme = groupings_[oi];
  const int L = scheme.num_groups();
  const Decoder& D = dec_[oi];
  const auto& vis_idx = enc.visible_idx[oi];
  const int nv = static_cast<int>(vis_idx.size());

  nn::Node* stacked = nullptr;
  std::vector<int> index(static_cast<std::size_t>(L), 0);
  if (nv > 0) {
    nn::Node* z_o = nn::slice_rows(t, enc.z_vis, enc.offset[oi], nv);
    nn::Node* proj = D.input_proj(t, z_o);
    stacked = nn::concat_rows(t, {proj, D.mask_token});
    std::fill(index.begin(), index.end(), nv);
    for (int i = 0; i < nv; ++i) index[static_cast<std::size_t>(vis_idx[i])] = i;
  } else {
    stacked = D.mask_token;
  }

  nn::Node* x = nn::select_rows(t, stacked, index);
  x = nn::add(t, x, D.gidx);
  x = nn::add_rowvec(t, x, nn::slice_rows(t, type_emb_, oi, 1));
  for (const auto& block : D.blocks) x = block(t, x, enc.z_vis, ctx);
  x = D.ln(t, x);

  std::vector<nn::Node*> out(static_cast<std::size_t>(L));
  for (int k = 0; k < L; ++k) {
    nn::Node* row = nn::slice_rows(t, x, k, 1);
    out[static_cast<std::size_t>(k)] =
        D.zeta_out[static_cast<std::size_t>(k)](
            t, D.zeta_snn[static_cast<std::size_t>(k)](t, row, ctx));
  }
  return out;
}

nn::Node* Model::cls_output(nn::Tape& t, const Encoded& enc) {
  return nn::slice_rows(t, enc.z_vis, 0, 1);
}

std::array<std::optional<Vec>, kNumOmics> Model::generate(
    const data::PatientRecord& rec, const std::vector<Omics>& visible,
    const std::vector<Omics>& targets) {
  const masking::MaskPlan plan =
      masking::explicit_mask_plan(visible, targets, token_counts());

  std::array<const Vec*, kNumOmics> profiles{};
  for (Omics o : visible) {
    if (!rec.has_omics(o)) {
      throw_data("patient " + rec.id + ": " + omics_name(o) +
                 " is a generation input but the profile is absent");
    }
    const data::OmicsProfile& prof = rec.profile(o);
    if (!prof.transformed) {
      throw_data("patient " + rec.id + ": " + omics_name(o) +
                 " profile holds raw values; transform the cohort first");
    }
    profiles[static_cast<int>(o)] = &prof.values;
  }

  nn::Tape t;
  nn::Ctx ctx{false, nullptr};
  const Encoded enc = encode(t, rec.patches.embeddings, profiles, plan, ctx);

  std::array<std::optional<Vec>, kNumOmics> result;
  std::set<Omics> target_set(targets.begin(), targets.end());
  for (Omics o : target_set) {
    const int oi = static_cast<int>(o);
    const auto& scheme = groupings_[oi];
    const std::vector<nn::Node*> rows = decode_modality(t, o, enc, plan, ctx);
    Vec sum = Vec::Zero(scheme.feature_count);
    Vec cover = Vec::Zero(scheme.feature_count);
    for (int k = 0; k < scheme.num_groups(); ++k) {
      const auto& idx = scheme.groups[static_cast<std::size_t>(k)].indices;
      const Mat& v = rows[static_cast<std::size_t>(k)]->value;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        sum[idx[j]] += v(0, static_cast<Eigen::Index>(j));
        cover[idx[j]] += 1.0;
      }
    }
    Vec out(scheme.feature_count);
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      out[i] = cover[i] > 0.0 ? sum[i] / cover[i]
                              : std::numeric_limits<double>::quiet_NaN();
    }
    result[oi] = std::move(out);
  }
  return result;
}

std::unique_ptr<Model> Model::clone() const {
  auto copy = std::make_unique<Model>(cfg_, groupings_, 0);
  copy->ps_.copy_values_from(ps_);
  return copy;
}

std::string Model::meta_text() const {
  IniFile ini;
  IniSection& ms = ini.get_or_add("model");
  cfg_.to_section(ms);
  IniSection& ds = ini.get_or_add("data");
  for (Omics o : kAllOmics) {
    ds.set(omics_name(o) + "_features",
           std::to_string(groupings_[static_cast<int>(o)].feature_count));
  }
  return ini.serialize();
}

// ---- masked reconstruction loss ---------------------------------------------

nn::Node* masked_mae_loss(
    nn::Tape& t, const std::array<std::vector<nn::Node*>, kNumOmics>& recon,
    const std::array<const Vec*, kNumOmics>& targets,
    const std::array<const data::GroupingScheme*, kNumOmics>& groupings,
    const masking::MaskPlan& plan,
    std::array<double, kNumOmics>* per_modality) {
  std::vector<nn::Node*> modality_means;
  for (Omics o : kAllOmics) {
    const int oi = static_cast<int>(o);
    if (per_modality) {
      (*per_modality)[oi] = std::numeric_limits<double>::quiet_NaN();
    }
    const std::vector<int> masked = plan.masked_indices(o);
    if (masked.empty()) continue;
    if (groupings[oi] == nullptr ||
        recon[oi].size() !=
            static_cast<std::size_t>(groupings[oi]->num_groups())) {
      throw_data(omics_name(o) +
                 " has masked groups but no full reconstruction");
    }
    if (targets[oi] == nullptr) {
      throw_data(omics_name(o) + " has masked groups but no target profile");
    }
    const Vec& target = *targets[oi];
    nn::Node* total = nullptr;
    long feats = 0;
    for (int k : masked) {
      const auto& idx =
          groupings[oi]->groups[static_cast<std::size_t>(k)].indices;
      Mat row(1, static_cast<Eigen::Index>(idx.size()));
      for (std::size_t j = 0; j < idx.size(); ++j) {
        row(0, static_cast<Eigen::Index>(j)) = target[idx[j]];
      }
      nn::Node* diff =
          nn::sub(t, recon[oi][static_cast<std::size_t>(k)], t.constant(row));
      nn::Node* s = nn::sum_all(t, nn::abs(t, diff));
      total = total ? nn::add(t, total, s) : s;
      feats += static_cast<long>(idx.size());
    }
    nn::Node* mean_o = nn::scale(t, total, 1.0 / static_cast<double>(feats));
    if (per_modality) (*per_modality)[oi] = mean_o->value(0, 0);
    modality_means.push_back(mean_o);
  }
  if (modality_means.empty()) {
    throw_data("mask plan leaves every group visible; nothing to reconstruct");
  }
  nn::Node* total = modality_means[0];
  for (std::size_t i = 1; i < modality_means.size(); ++i) {
    total = nn::add(t, total, modality_means[i]);
  }
  return nn::scale(t, total, 1.0 / static_cast<double>(modality_means.size()));
}

// ---- pretraining loop ---------------------------------------------------------

void PretrainConfig::validate() const {
  if (epochs < 1) throw_config("pretrain.epochs: must be positive");
  if (batch_size < 1) throw_config("pretrain.batch_size: must be positive");
  if (warmup_epochs < 0 || warmup_epochs > epochs) {
    throw_config("pretrain.warmup_epochs: must lie in [0, epochs]");
  }
  if (!(lr_start >= 0.0)) throw_config("pretrain.lr_start: must be >= 0");
  if (!(lr_peak > 0.0)) throw_config("pretrain.lr_peak: must be positive");
  if (!(lr_final >= 0.0)) throw_config("pretrain.lr_final: must be >= 0");
  if (!(weight_decay >= 0.0)) {
    throw_config("pretrain.weight_decay: must be >= 0");
  }
}

nn::LrSchedule PretrainConfig::schedule() const {
  return nn::LrSchedule{warmup_epochs, epochs, lr_start, lr_peak, lr_final};
}

Pretrainer::Pretrainer(Model& m, const data::Cohort& cohort, PretrainConfig cfg)
    : model_(m),
      cohort_(cohort),
      cfg_(cfg),
      opt_(m.params(), nn::AdamWConfig{0.9, 0.999, 1e-8, cfg.weight_decay}),
      sched_(cfg.schedule()),
      root_(cfg.seed) {
  cfg_.validate();
  if (cohort_.patients.empty()) {
    throw_data("pretraining requires a non-empty cohort");
  }
  if (cohort_.patch_dim != model_.config().patch_dim) {
    throw_data("cohort patch dimension " + std::to_string(cohort_.patch_dim) +
               ", model expects " + std::to_string(model_.config().patch_dim));
  }
  for (Omics o : kAllOmics) {
    if (cohort_.features(o) != model_.grouping(o).feature_count) {
      throw_data("cohort has " + std::to_string(cohort_.features(o)) + " " +
                 omics_name(o) + " features, model expects " +
                 std::to_string(model_.grouping(o).feature_count));
    }
  }
  for (const data::PatientRecord& rec : cohort_.patients) {
    for (Omics o : kAllOmics) {
      if (!rec.has_omics(o)) {
        throw_data("patient " + rec.id + ": missing " + omics_name(o) +
                   " profile; pretraining requires every modality");
      }
      if (!rec.profile(o).transformed) {
        throw_data("patient " + rec.id + ": " + omics_name(o) +
                   " profile holds raw values; transform the cohort first");
      }
    }
  }
  const int n = static_cast<int>(cohort_.patients.size());
  steps_per_epoch_ = (n + cfg_.batch_size - 1) / cfg_.batch_size;
  order_.resize(static_cast<std::size_t>(n));
  reshuffle();
}

void Pretrainer::reshuffle() {
  std::iota(order_.begin(), order_.end(), 0);
  Rng r = root_.derive("order").derive(static_cast<std::uint64_t>(epoch_));
  r.shuffle(order_);
}

bool Pretrainer::done() const { return epoch_ >= cfg_.epochs; }

void Pretrainer::resume_at_epoch(int next_epoch, std::int64_t opt_step) {
  if (next_epoch < 0 || next_epoch > cfg_.epochs) {
    throw_config("resume epoch " + std::to_string(next_epoch) +
                 " outside [0, " + std::to_string(cfg_.epochs) + "]");
  }
  epoch_ = next_epoch;
  step_ = 0;
  opt_.set_step_count(opt_step);
  if (!done()) reshuffle();
}

Pretrainer::StepRecord Pretrainer::step() {
  if (done()) throw_internal("pretraining loop stepped past the last epoch");
  const int n = static_cast<int>(cohort_.patients.size());
  const int lo = step_ * cfg_.batch_size;
  const int hi = std::min(lo + cfg_.batch_size, n);
  const double lr = sched_.at(
      epoch_ + static_cast<double>(step_) / static_cast<double>(steps_per_epoch_));

  StepRecord rec_out;
  rec_out.epoch = epoch_;
  rec_out.step = step_;
  rec_out.lr = lr;

  nn::Tape t;
  Rng drop_rng = root_.derive("dropout")
                     .derive(static_cast<std::uint64_t>(epoch_))
                     .derive(static_cast<std::uint64_t>(step_));
  nn::Ctx ctx{true, &drop_rng};

  std::array<const data::GroupingScheme*, kNumOmics> schemes{};
  for (Omics o : kAllOmics) {
    schemes[static_cast<int>(o)] = &model_.grouping(o);
  }

  std::array<double, kNumOmics> mod_sum{};
  std::array<int, kNumOmics> mod_cnt{};
  nn::Node* batch_loss = nullptr;
  for (int i = lo; i < hi; ++i) {
    const int pi = order_[static_cast<std::size_t>(i)];
    const data::PatientRecord& rec =
        cohort_.patients[static_cast<std::size_t>(pi)];
    const Mat S = sample_patches(rec.patches, model_.config().patch_sample,
                                 root_.derive("patches")
                                     .derive(static_cast<std::uint64_t>(epoch_))
                                     .derive(static_cast<std::uint64_t>(pi)));
    Rng mask_rng = root_.derive("mask")
                       .derive(static_cast<std::uint64_t>(epoch_))
                       .derive(static_cast<std::uint64_t>(pi));
    const masking::MaskPlan plan =
        masking::sample_mask_plan(model_.token_counts(),
                                  model_.config().mask_ratio,
                                  model_.config().mask_alpha, mask_rng);
    rec_out.mask_logs.push_back("patient=" + rec.id + " " + plan.to_log());

    std::array<const Vec*, kNumOmics> profiles{};
    for (Omics o : kAllOmics) {
      profiles[static_cast<int>(o)] = &rec.profile(o).values;
    }
    Model::Encoded enc = model_.encode(t, S, profiles, plan, ctx);
    std::array<std::vector<nn::Node*>, kNumOmics> recon;
    for (Omics o : kAllOmics) {
      recon[static_cast<int>(o)] = model_.decode_modality(t, o, enc, plan, ctx);
    }
    std::array<double, kNumOmics> pm{};
    nn::Node* loss = masked_mae_loss(t, recon, profiles, schemes, plan, &pm);
    for (int oi = 0; oi < kNumOmics; ++oi) {
      if (!std::isnan(pm[oi])) {
        mod_sum[static_cast<std::size_t>(oi)] += pm[oi];
        mod_cnt[static_cast<std::size_t>(oi)] += 1;
      }
    }
    batch_loss = batch_loss ? nn::add(t, batch_loss, loss) : loss;
  }
  batch_loss = nn::scale(t, batch_loss, 1.0 / static_cast<double>(hi - lo));

  const double loss_value = batch_loss->value(0, 0);
  if (!std::isfinite(loss_value)) {
    throw_numeric("non-finite pretraining loss at epoch " +
                  std::to_string(epoch_) + " step " + std::to_string(step_));
  }
  rec_out.loss = loss_value;
  for (int oi = 0; oi < kNumOmics; ++oi) {
    rec_out.per_modality[static_cast<std::size_t>(oi)] =
        mod_cnt[static_cast<std::size_t>(oi)] > 0
            ? mod_sum[static_cast<std::size_t>(oi)] /
                  mod_cnt[static_cast<std::size_t>(oi)]
            : std::numeric_limits<double>::quiet_NaN();
  }

  model_.params().zero_grads();
  t.backward(batch_loss);
  model_.params().ensure_grads();
  opt_.step(lr);
  t.clear();

  ++step_;
  if (step_ == steps_per_epoch_) {
    step_ = 0;
    ++epoch_;
    if (!done()) reshuffle();
  }
  return rec_out;
}

// ---- checkpoints --------------------------------------------------------------

namespace {

constexpr char kCkptMagic[8] = {'M', 'O', 'M', 'I', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_text(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string mat_bytes(const Mat& m) {
  std::string buf(static_cast<std::size_t>(m.size()) * sizeof(double), '\0');
  char* p = buf.data();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      std::memcpy(p, &v, sizeof v);
      p += sizeof v;
    }
  }
  return buf;
}

void put_entry(std::ostream& out, const std::string& name, const Mat& m) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  const std::string bytes = mat_bytes(m);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  put_u64(out, fnv1a64(bytes.data(), bytes.size()));
}

struct CkptReader {
  std::ifstream f;
  std::string path;

  void read_raw(void* dst, std::size_t n) {
    f.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(f.gcount()) != n) {
      throw_data("checkpoint truncated: " + path);
    }
  }
  std::uint32_t get_u32() {
    std::uint32_t v = 0;
    read_raw(&v, sizeof v);
    return v;
  }
  std::uint64_t get_u64() {
    std::uint64_t v = 0;
    read_raw(&v, sizeof v);
    return v;
  }
  std::string get_bytes(std::size_t n) {
    std::string s(n, '\0');
    if (n > 0) read_raw(s.data(), n);
    return s;
  }
  std::string get_text() { return get_bytes(get_u64()); }
};

}  // namespace

void save_checkpoint(const fs::path& path, const Model& m, nn::AdamW* opt,
                     int epoch, std::uint64_t root_seed) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data("cannot write checkpoint: " + path.string());

  out.write(kCkptMagic, sizeof kCkptMagic);
  put_u32(out, kCkptVersion);

  IniFile meta = IniFile::parse(m.meta_text(), "checkpoint meta");
  IniSection& tr = meta.get_or_add("train");
  tr.set("epoch", std::to_string(epoch));
  tr.set("root_seed", std::to_string(root_seed));
  tr.set("opt_step", std::to_string(opt ? opt->step_count() : 0));
  tr.set("has_optimizer", opt ? "true" : "false");
  put_text(out, meta.serialize());

  for (Omics o : kAllOmics) {
    put_text(out, data::grouping_to_text(m.grouping(o)));
  }

  const auto& entries = m.params().entries();
  const std::uint32_t count =
      static_cast<std::uint32_t>(entries.size() * (opt ? 3 : 1));
  put_u32(out, count);
  for (const auto& p : entries) put_entry(out, p->name, p->node.value);
  if (opt) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      put_entry(out, "opt.m." + entries[i]->name, opt->moment1(i));
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
      put_entry(out, "opt.v." + entries[i]->name, opt->moment2(i));
    }
  }
  out.flush();
  if (!out) throw_data("short write to checkpoint: " + path.string());
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
  CkptReader in;
  in.path = path.string();
  in.f.open(path, std::ios::binary);
  if (!in.f) throw_data("missing checkpoint: " + path.string());

  char magic[8];
  in.read_raw(magic, sizeof magic);
  if (std::memcmp(magic, kCkptMagic, sizeof magic) != 0) {
    throw_data("not a checkpoint file: " + path.string());
  }
  const std::uint32_t version = in.get_u32();
  if (version != kCkptVersion) {
    throw_data("unsupported checkpoint version " + std::to_string(version) +
               ": " + path.string());
  }

  const IniFile meta = IniFile::parse(in.get_text(), path.string() + " meta");
  const IniSection* ms = meta.find("model");
  const IniSection* ds = meta.find("data");
  const IniSection* tr = meta.find("train");
  if (ms == nullptr || ds == nullptr || tr == nullptr) {
    throw_data("checkpoint meta lacks a required section: " + path.string());
  }
  ModelConfig cfg;
  cfg.apply_section(*ms);

  std::array<data::GroupingScheme, kNumOmics> schemes;
  for (Omics o : kAllOmics) {
    const int nf = static_cast<int>(
        parse_long(ds->get(omics_name(o) + "_features"),
                   path.string() + ": " + omics_name(o) + "_features"));
    schemes[static_cast<int>(o)] = data::grouping_from_text(
        in.get_text(), o, nf, path.string() + ": " + omics_name(o) + " grouping");
  }

  LoadedCheckpoint loaded;
  loaded.epoch = static_cast<int>(
      parse_long(tr->get("epoch"), path.string() + ": epoch"));
  loaded.root_seed = parse_u64(tr->get("root_seed"), path.string() + ": root_seed");
  loaded.opt_step =
      parse_long(tr->get("opt_step"), path.string() + ": opt_step");
  loaded.has_optimizer =
      parse_bool(tr->get("has_optimizer"), path.string() + ": has_optimizer");
  loaded.model = std::make_unique<Model>(cfg, std::move(schemes), 0);

  std::unordered_set<std::string> filled;
  const std::uint32_t count = in.get_u32();
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::string name = in.get_bytes(in.get_u32());
    const auto rows = static_cast<Eigen::Index>(in.get_u64());
    const auto cols = static_cast<Eigen::Index>(in.get_u64());
    const std::string bytes =
        in.get_bytes(static_cast<std::size_t>(rows * cols) * sizeof(double));
    const std::uint64_t checksum = in.get_u64();
    if (fnv1a64(bytes.data(), bytes.size()) != checksum) {
      throw_data("checkpoint corrupt: checksum mismatch for '" + name + "': " +
                 path.string());
    }
    Mat m(rows, cols);
    const char* p = bytes.data();
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        double v = 0;
        std::memcpy(&v, p, sizeof v);
        p += sizeof v;
        m(r, c) = v;
      }
    }
    if (name.rfind("opt.", 0) == 0) {
      loaded.opt_entries.emplace_back(name, std::move(m));
      continue;
    }
    nn::Node* param = loaded.model->params().find(name);
    if (param == nullptr) {
      throw_data("checkpoint parameter not in model: '" + name + "': " +
                 path.string());
    }
    if (param->value.rows() != rows || param->value.cols() != cols) {
      throw_data("checkpoint shape mismatch for '" + name + "': " +
                 path.string());
    }
    if (!all_finite(m)) {
      throw_data("checkpoint holds a non-finite value in '" + name + "': " +
                 path.string());
    }
    param->value = std::move(m);
    filled.insert(name);
  }
  for (const auto& p : loaded.model->params().entries()) {
    if (filled.find(p->name) == filled.end()) {
      throw_data("checkpoint missing parameter '" + p->name + "': " +
                 path.string());
    }
  }
  return loaded;
}

void LoadedCheckpoint::restore_optimizer(nn::AdamW& opt) const {
  if (!has_optimizer) {
    throw_data("checkpoint carries no optimizer state");
  }
  std::unordered_map<std::string, const Mat*> by_name;
  for (const auto& [name, m] : opt_entries) by_name[name] = &m;
  const auto& entries = opt.params().entries();
  if (opt.size() != entries.size()) {
    throw_data("optimizer tracks " + std::to_string(opt.size()) +
               " parameters, model has " + std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (const char* which : {"m", "v"}) {
      const std::string key =
          std::string("opt.") + which + "." + entries[i]->name;
      auto it = by_name.find(key);
      if (it == by_name.end()) {
        throw_data("checkpoint missing optimizer entry '" + key + "'");
      }
      const Mat& m = *it->second;
      if (m.rows() != entries[i]->node.value.rows() ||
          m.cols() != entries[i]->node.value.cols()) {
        throw_data("optimizer entry shape mismatch for '" + key + "'");
      }
      Mat& dst = which[0] == 'm' ? opt.moment1(i) : opt.moment2(i);
      dst = m;
    }
  }
  opt.set_step_count(opt_step);
}

}  // namespace momics::model
