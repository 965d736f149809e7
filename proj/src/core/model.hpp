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

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/inifile.hpp"
#include "core/layers.hpp"
#include "core/masking.hpp"
#include "core/optim.hpp"
#include "core/tokenizers.hpp"

namespace momics::model {

enum class HistoMode { Prototype, Abmil };

std::string histo_mode_name(HistoMode m);
HistoMode histo_mode_from_name(const std::string& s);

struct ModelConfig {
  int d = 256;
  int heads = 8;
  int mlp_dim = 256;
  int encoder_layers = 1;
  int decoder_layers = 1;
  double dropout = 0.15;
  int num_prototypes = 32;  // slide tokens in prototype mode
  HistoMode histo_mode = HistoMode::Prototype;
  double mask_ratio = 0.75;
  double mask_alpha = 1.0;
  int patch_sample = 1024;
  int patch_dim = 0;  // from the dataset

  void validate() const;  // throws Config naming the model.* key
  void to_section(IniSection& sec) const;
  // Applies only the keys present in the section over the current values.
  void apply_section(const IniSection& sec);
};

// Recognized [model] section keys, for unknown-key rejection.
const std::vector<std::string>& model_config_keys();

// Uniform patch sample of the requested size: without replacement when the
// slide has at least `count` patches, with replacement otherwise.
Mat sample_patches(const data::PatchEmbeddingSet& patches, int count, Rng rng);

class Model {
 public:
  Model(const ModelConfig& cfg,
        std::array<data::GroupingScheme, kNumOmics> groupings,
        std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  const data::GroupingScheme& grouping(Omics o) const {
    return groupings_[static_cast<int>(o)];
  }
  std::array<int, kNumOmics> token_counts() const;
  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }

  // Applies a new dropout rate to every block (fine-tuning overrides the
  // pre-training rate).
  void set_dropout(double rate);

  struct Encoded {
    nn::Node* z_vis = nullptr;  // (prefix + visible tokens) x d
    int prefix = 0;             // 1 + num_prototypes, or 1 in abmil mode
    // Row offset of each modality's visible block in z_vis; -1 when the
    // modality contributes no visible tokens.
    std::array<int, kNumOmics> offset{};
    std::array<std::vector<int>, kNumOmics> visible_idx;
  };

  // Builds [<cls>/slide token, histo tokens, visible omics tokens] with
  // modality-type and group-index embeddings on omics tokens, runs the
  // encoder stack, and layer-norms the output. Profiles are required only
  // for modalities with at least one visible token in the plan.
  Encoded encode(nn::Tape& t, const Mat& patches,
                 const std::array<const Vec*, kNumOmics>& profiles,
                 const masking::MaskPlan& plan, nn::Ctx& ctx);

  // Reconstructs every group of one modality from the encoded context;
  // returns one (1 x group_size) node per group.
  std::vector<nn::Node*> decode_modality(nn::Tape& t, Omics o,
                                         const Encoded& enc,
                                         const masking::MaskPlan& plan,
                                         nn::Ctx& ctx);

  nn::Node* cls_output(nn::Tape& t, const Encoded& enc);  // (1 x d)

  // Any-to-any generation for one patient: encodes histopathology plus the
  // visible omics (all other omics fully masked) and decodes each target
  // modality back to feature space. Overlapping groups are averaged per
  // feature. Uses every patch; no dropout.
  std::array<std::optional<Vec>, kNumOmics> generate(
      const data::PatientRecord& rec, const std::vector<Omics>& visible,
      const std::vector<Omics>& targets);

  std::unique_ptr<Model> clone() const;
  std::string meta_text() const;  // config + groupings, embedded in checkpoints

 private:
  ModelConfig cfg_;
  std::array<data::GroupingScheme, kNumOmics> groupings_;
  nn::ParamStore ps_;

  tok::PrototypeTokenizer histo_tok_;
  tok::AbmilPool abmil_;
  std::array<tok::OmicsGroupTokenizer, kNumOmics> omics_tok_;
  nn::Node* cls_ = nullptr;
  nn::Node* type_emb_ = nullptr;  // (3 x d)
  std::array<nn::Node*, kNumOmics> enc_gidx_{};
  std::vector<nn::EncoderBlock> enc_blocks_;
  nn::LayerNorm enc_ln_;

  struct Decoder {
    nn::Linear input_proj;
    nn::Node* mask_token = nullptr;
    nn::Node* gidx = nullptr;
    std::vector<nn::DecoderBlock> blocks;
    nn::LayerNorm ln;
    std::vector<nn::SnnBlock> zeta_snn;
    std::vector<nn::Linear> zeta_out;
  };
  std::array<Decoder, kNumOmics> dec_;
};

// Mean absolute error over the features of masked groups, averaged per
// modality, then averaged (unweighted) over the modalities that have at
// least one masked group. `recon` and `targets` entries may be empty for
// absent modalities; errors when nothing is masked anywhere. Per-modality
// means are reported through `per_modality` (NaN where undefined).
nn::Node* masked_mae_loss(
    nn::Tape& t, const std::array<std::vector<nn::Node*>, kNumOmics>& recon,
    const std::array<const Vec*, kNumOmics>& targets,
    const std::array<const data::GroupingScheme*, kNumOmics>& groupings,
    const masking::MaskPlan& plan,
    std::array<double, kNumOmics>* per_modality = nullptr);

struct PretrainConfig {
  int epochs = 200;
  int batch_size = 128;
  int warmup_epochs = 10;
  double lr_start = 5e-5;
  double lr_peak = 5e-4;
  double lr_final = 1.5e-4;
  double weight_decay = 1e-3;
  std::uint64_t seed = 1;

  void validate() const;  // throws Config naming the pretrain.* key
  nn::LrSchedule schedule() const;
};

// Masked-reconstruction training loop. One step: per patient in the batch,
// sample patches, draw a fresh mask plan, tokenize, encode, decode all
// modalities; average the masked MAE over the batch; AdamW update at the
// scheduled rate. All randomness is derived from (seed, purpose, epoch,
// step or patient), so runs and resumes are bit-identical.
class Pretrainer {
 public:
  Pretrainer(Model& m, const data::Cohort& cohort, PretrainConfig cfg);

  struct StepRecord {
    int epoch = 0;  // 0-based
    int step = 0;   // 0-based within the epoch
    double lr = 0.0;
    double loss = 0.0;
    std::array<double, kNumOmics> per_modality{};  // NaN where not masked
    std::vector<std::string> mask_logs;
  };

  bool done() const;
  StepRecord step();

  int epoch() const { return epoch_; }
  int steps_per_epoch() const { return steps_per_epoch_; }
  nn::AdamW& optimizer() { return opt_; }
  // Positions the loop at the start of `next_epoch` (for checkpoint resume).
  void resume_at_epoch(int next_epoch, std::int64_t opt_step);

 private:
  Model& model_;
  const data::Cohort& cohort_;
  PretrainConfig cfg_;
  nn::AdamW opt_;
  nn::LrSchedule sched_;
  Rng root_;
  int epoch_ = 0;
  int step_ = 0;
  int steps_per_epoch_ = 0;
  std::vector<int> order_;

  void reshuffle();
};

// Versioned checkpoint: model config and groupings as embedded text, then
// one (name, shape, float64 payload, checksum) entry per parameter and,
// when an optimizer is given, per Adam moment. Round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const Model& m,
                     nn::AdamW* opt, int epoch, std::uint64_t root_seed);

struct LoadedCheckpoint {
  std::unique_ptr<Model> model;
  int epoch = 0;
  std::uint64_t root_seed = 0;
  std::int64_t opt_step = 0;
  bool has_optimizer = false;
  // Moment matrices keyed like "opt.m.<param>" / "opt.v.<param>".
  std::vector<std::pair<std::string, Mat>> opt_entries;

  // Copies saved moments and step count into a freshly built optimizer.
  void restore_optimizer(nn::AdamW& opt) const;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace momics::model
