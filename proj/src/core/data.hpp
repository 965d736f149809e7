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
#include <optional>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace momics::data {

struct PatchEmbeddingSet {
  Mat embeddings;  // (num_patches x patch_dim), never empty
  std::vector<std::string> source_slide_ids;
};

struct OmicsProfile {
  Omics modality = Omics::Rna;
  Vec values;
  std::vector<bool> missing;  // raw cnv only; empty means none missing
  bool transformed = false;
};

struct Group {
  std::string name;
  std::vector<int> indices;  // ascending feature indices
};

struct GroupingScheme {
  Omics modality = Omics::Rna;
  int feature_count = 0;
  std::vector<Group> groups;

  int num_groups() const { return static_cast<int>(groups.size()); }
  // Checks index ranges, non-empty groups, and the partition requirement
  // for dnam/cnv (rna groups may overlap but must cover no out-of-range
  // feature). `where` prefixes error messages.
  void validate(const std::string& where) const;
};

struct SurvivalLabel {
  double time = 0.0;  // > 0
  bool event = false;
};

struct PatientRecord {
  std::string id;
  PatchEmbeddingSet patches;
  std::array<std::optional<OmicsProfile>, kNumOmics> omics;
  std::optional<int> subtype;
  std::optional<SurvivalLabel> survival;

  bool has_omics(Omics o) const {
    return omics[static_cast<int>(o)].has_value();
  }
  const OmicsProfile& profile(Omics o) const {
    return *omics[static_cast<int>(o)];
  }
};

struct Cohort {
  std::string name;
  int patch_dim = 0;
  std::array<int, kNumOmics> feature_counts{};
  std::array<GroupingScheme, kNumOmics> groupings;
  bool exclude_sex_chromosomes = false;
  std::string variance_split = "train";
  std::vector<PatientRecord> patients;

  int features(Omics o) const { return feature_counts[static_cast<int>(o)]; }
  const GroupingScheme& grouping(Omics o) const {
    return groupings[static_cast<int>(o)];
  }
};

// ---- preprocessing transforms --------------------------------------------

// log2(x + 1); rejects negative input.
Vec transform_rna(const Vec& raw);
// Missing entries are imputed to the diploid value 2, then log10(x/2 + 1);
// rejects negative non-missing input.
Vec transform_cnv(const Vec& raw, const std::vector<bool>& missing = {});
// Returns the input unchanged when every value lies in [0,1]; otherwise
// reports the first offending index.
const Vec& validate_dnam(const Vec& values);
// Applies the per-modality transform to every still-raw profile in place.
void transform_cohort(Cohort& cohort);

// ---- feature selection and grouping ---------------------------------------

// Indices (ascending) of the `keep` features with the highest sample
// standard deviation across rows; ties resolved toward the lower index.
std::vector<int> select_by_variance(const Mat& cohort_by_features, int keep);
// Indices (ascending) of features whose sample standard deviation exceeds t.
std::vector<int> select_by_variance_threshold(const Mat& cohort_by_features,
                                              double threshold);

struct FeaturePosition {
  std::string chromosome;
  long position = 0;
};

// Groups features by genomic position: clusters are apportioned across
// chromosomes proportionally to feature count (largest remainder, minimum
// one per non-empty chromosome), then each chromosome is split into
// contiguous position-sorted runs whose sizes differ by at most 1.
GroupingScheme cluster_by_position(const std::vector<FeaturePosition>& features,
                                   int num_clusters, Omics modality);

// ---- on-disk payloads ------------------------------------------------------
// Numeric payloads are little-endian float64 arrays behind a 16-byte header:
// 8-byte magic "MOMICS64", uint32 version (1), uint32 value count. Matrices
// are stored row-major; the column count comes from the manifest.

void write_payload(const std::filesystem::path& path,
                   const std::vector<double>& values);
std::vector<double> read_payload(const std::filesystem::path& path);
void write_matrix_payload(const std::filesystem::path& path, const Mat& m);
Mat read_matrix_payload(const std::filesystem::path& path, Eigen::Index cols);

// ---- grouping scheme files -------------------------------------------------
// One line per group: "name<TAB>idx,idx,...".

std::string grouping_to_text(const GroupingScheme& scheme);
GroupingScheme grouping_from_text(const std::string& text, Omics modality,
                                  int feature_count, const std::string& where);
void save_grouping(const std::filesystem::path& path,
                   const GroupingScheme& scheme);
GroupingScheme load_grouping(const std::filesystem::path& path, Omics modality,
                             int feature_count);

// ---- cohort manifest -------------------------------------------------------
// The manifest is sectioned key/value text: one [dataset] section with
// dimensions, grouping file paths, and the value space (raw | transformed),
// then one [patient] section per patient with payload paths and labels.
// Referenced paths are relative to the manifest's directory.

Cohort load_cohort(const std::filesystem::path& manifest_path);
// Writes manifest.ini, grouping files, and per-patient payloads under `dir`.
void save_cohort(const std::filesystem::path& dir, const Cohort& cohort);

}  // namespace momics::data
