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

#include "core/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <numeric>
#include <set>
#include <unordered_set>

#include "core/inifile.hpp"

static_assert(std::endian::native == std::endian::little,
              "payload format assumes a little-endian host");

namespace momics::data {

namespace fs = std::filesystem;

void GroupingScheme::validate(const std::string& where) const {
  if (groups.empty()) throw_data(where + ": grouping has no groups");
  std::vector<int> covered(static_cast<std::size_t>(feature_count), 0);
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const Group& g = groups[k];
    if (g.indices.empty()) {
      throw_data(where + ": group '" + g.name + "' selects no features");
    }
    int prev = -1;
    for (int idx : g.indices) {
      if (idx < 0 || idx >= feature_count) {
        throw_data(where + ": group '" + g.name + "' index " +
                   std::to_string(idx) + " outside [0, " +
                   std::to_string(feature_count) + ")");
      }
      if (idx <= prev) {
        throw_data(where + ": group '" + g.name +
                   "' indices not strictly ascending");
      }
      prev = idx;
      ++covered[static_cast<std::size_t>(idx)];
    }
  }
  if (modality != Omics::Rna) {
    for (int i = 0; i < feature_count; ++i) {
      if (covered[static_cast<std::size_t>(i)] == 0) {
        throw_data(where + ": " + omics_name(modality) + " feature " +
                   std::to_string(i) + " not covered by any group");
      }
      if (covered[static_cast<std::size_t>(i)] > 1) {
        throw_data(where + ": " + omics_name(modality) + " feature " +
                   std::to_string(i) +
                   " appears in multiple groups (groups must partition)");
      }
    }
  }
}

Vec transform_rna(const Vec& raw) {
  Vec out(raw.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    if (raw(i) < 0.0) {
      throw_data("rna transform: negative value " + format_double(raw(i)) +
                 " at index " + std::to_string(i));
    }
    out(i) = std::log2(raw(i) + 1.0);
  }
  return out;
}

Vec transform_cnv(const Vec& raw, const std::vector<bool>& missing) {
  if (!missing.empty() && static_cast<Eigen::Index>(missing.size()) != raw.size()) {
    throw_data("cnv transform: missing mask length " +
               std::to_string(missing.size()) + " != value length " +
               std::to_string(raw.size()));
  }
  Vec out(raw.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    double x = raw(i);
    if (!missing.empty() && missing[static_cast<std::size_t>(i)]) {
      x = 2.0;
    } else if (x < 0.0) {
      throw_data("cnv transform: negative value " + format_double(x) +
                 " at index " + std::to_string(i));
    }
    out(i) = std::log10(x / 2.0 + 1.0);
  }
  return out;
}

const Vec& validate_dnam(const Vec& values) {
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!(values(i) >= 0.0 && values(i) <= 1.0)) {
      throw_data("dnam validation: value " + format_double(values(i)) +
                 " at index " + std::to_string(i) + " outside [0, 1]");
    }
  }
  return values;
}

void transform_cohort(Cohort& cohort) {
  for (PatientRecord& rec : cohort.patients) {
    for (Omics o : kAllOmics) {
      auto& slot = rec.omics[static_cast<int>(o)];
      if (!slot || slot->transformed) continue;
      try {
        switch (o) {
          case Omics::Rna:
            slot->values = transform_rna(slot->values);
            break;
          case Omics::Dnam:
            validate_dnam(slot->values);
            break;
          case Omics::Cnv:
            slot->values = transform_cnv(slot->values, slot->missing);
            break;
        }
      } catch (const Error& e) {
        throw Error(e.kind(), "patient " + rec.id + ": " + e.what());
      }
      slot->missing.clear();
      slot->transformed = true;
    }
  }
}

namespace {

std::vector<double> column_sds(const Mat& m) {
  if (m.rows() < 2) {
    throw_data("variance selection needs at least 2 rows, got " +
               std::to_string(m.rows()));
  }
  std::vector<double> sds(static_cast<std::size_t>(m.cols()));
  const double inv = 1.0 / static_cast<double>(m.rows() - 1);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double mu = m.col(j).mean();
    sds[static_cast<std::size_t>(j)] =
        std::sqrt((m.col(j).array() - mu).square().sum() * inv);
  }
  return sds;
}

}  // namespace

std::vector<int> select_by_variance(const Mat& cohort_by_features, int keep) {
  if (keep <= 0) throw_config("select_by_variance: keep must be positive");
  if (keep > cohort_by_features.cols()) {
    throw_config("select_by_variance: keep " + std::to_string(keep) +
                 " exceeds feature count " +
                 std::to_string(cohort_by_features.cols()));
  }
  const std::vector<double> sds = column_sds(cohort_by_features);
  std::vector<int> order(sds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (sds[static_cast<std::size_t>(a)] != sds[static_cast<std::size_t>(b)])
      return sds[static_cast<std::size_t>(a)] > sds[static_cast<std::size_t>(b)];
    return a < b;
  });
  order.resize(static_cast<std::size_t>(keep));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<int> select_by_variance_threshold(const Mat& cohort_by_features,
                                              double threshold) {
  const std::vector<double> sds = column_sds(cohort_by_features);
  std::vector<int> out;
  for (std::size_t j = 0; j < sds.size(); ++j) {
    if (sds[j] > threshold) out.push_back(static_cast<int>(j));
  }
  return out;
}

namespace {

// chr-prefix-insensitive ordering: numeric chromosomes first in numeric
// order, then the rest lexicographically.
std::pair<int, std::string> chrom_key(const std::string& name) {
  std::string body = lower(name);
  if (body.rfind("chr", 0) == 0) body = body.substr(3);
  if (!body.empty() &&
      std::all_of(body.begin(), body.end(),
                  [](unsigned char c) { return std::isdigit(c); })) {
    int n = static_cast<int>(std::stol(body));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08d", n);
    return {0, buf};
  }
  return {1, body};
}

}  // namespace

GroupingScheme cluster_by_position(const std::vector<FeaturePosition>& features,
                                   int num_clusters, Omics modality) {
  const int n = static_cast<int>(features.size());
  if (n == 0) throw_data("cluster_by_position: no features");
  if (num_clusters <= 0) {
    throw_config("cluster_by_position: num_clusters must be positive");
  }
  if (num_clusters > n) {
    throw_config("cluster_by_position: num_clusters " +
                 std::to_string(num_clusters) + " exceeds feature count " +
                 std::to_string(n));
  }

  struct Chrom {
    std::string name;
    std::vector<int> feat;  // input indices, position-sorted
  };
  std::vector<Chrom> chroms;
  {
    std::vector<int> idx(features.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      auto ka = chrom_key(features[static_cast<std::size_t>(a)].chromosome);
      auto kb = chrom_key(features[static_cast<std::size_t>(b)].chromosome);
      if (ka != kb) return ka < kb;
      if (features[static_cast<std::size_t>(a)].position !=
          features[static_cast<std::size_t>(b)].position) {
        return features[static_cast<std::size_t>(a)].position <
               features[static_cast<std::size_t>(b)].position;
      }
      return a < b;
    });
    for (int i : idx) {
      const std::string& c = features[static_cast<std::size_t>(i)].chromosome;
      if (chroms.empty() || chrom_key(chroms.back().name) != chrom_key(c)) {
        chroms.push_back({c, {}});
      }
      chroms.back().feat.push_back(i);
    }
  }
  const int num_chroms = static_cast<int>(chroms.size());
  if (num_clusters < num_chroms) {
    throw_config("cluster_by_position: " + std::to_string(num_clusters) +
                 " clusters cannot cover " + std::to_string(num_chroms) +
                 " chromosomes with contiguous per-chromosome clusters");
  }

  // One cluster per chromosome, then largest-remainder apportionment of the
  // rest proportional to remaining capacity. Quotas never exceed capacity,
  // so cluster counts stay within per-chromosome feature counts.
  std::vector<int> alloc(chroms.size(), 1);
  const int spare = num_clusters - num_chroms;
  if (spare > 0) {
    const double denom = static_cast<double>(n - num_chroms);
    std::vector<double> frac(chroms.size(), 0.0);
    int assigned = 0;
    for (std::size_t c = 0; c < chroms.size(); ++c) {
      const double quota =
          denom > 0.0
              ? spare * (static_cast<double>(chroms[c].feat.size()) - 1.0) / denom
              : 0.0;
      const int fl = static_cast<int>(std::floor(quota));
      alloc[c] += fl;
      frac[c] = quota - fl;
      assigned += fl;
    }
    std::vector<int> order(chroms.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (frac[static_cast<std::size_t>(a)] != frac[static_cast<std::size_t>(b)])
        return frac[static_cast<std::size_t>(a)] > frac[static_cast<std::size_t>(b)];
      return a < b;
    });
    for (int i = 0; i < spare - assigned; ++i) {
      ++alloc[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    }
  }

  GroupingScheme scheme;
  scheme.modality = modality;
  scheme.feature_count = n;
  for (std::size_t c = 0; c < chroms.size(); ++c) {
    const std::vector<int>& feat = chroms[c].feat;
    const int k = alloc[c];
    const int m = static_cast<int>(feat.size());
    const int base = m / k;
    const int extra = m % k;
    int at = 0;
    for (int run = 0; run < k; ++run) {
      const int len = base + (run < extra ? 1 : 0);
      Group g;
      g.name = chroms[c].name + "_" + std::to_string(run + 1);
      g.indices.assign(feat.begin() + at, feat.begin() + at + len);
      std::sort(g.indices.begin(), g.indices.end());
      scheme.groups.push_back(std::move(g));
      at += len;
    }
  }
  return scheme;
}

// ---- payload io ------------------------------------------------------------

namespace {

constexpr char kPayloadMagic[8] = {'M', 'O', 'M', 'I', 'C', 'S', '6', '4'};
constexpr std::uint32_t kPayloadVersion = 1;

}  // namespace

void write_payload(const fs::path& path, const std::vector<double>& values) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw_data("cannot write payload file: " + path.string());
  f.write(kPayloadMagic, sizeof(kPayloadMagic));
  const std::uint32_t version = kPayloadVersion;
  const std::uint32_t count = static_cast<std::uint32_t>(values.size());
  f.write(reinterpret_cast<const char*>(&version), sizeof(version));
  f.write(reinterpret_cast<const char*>(&count), sizeof(count));
  f.write(reinterpret_cast<const char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!f) throw_data("short write to payload file: " + path.string());
}

std::vector<double> read_payload(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw_data("missing payload file: " + path.string());
  char magic[8];
  std::uint32_t version = 0, count = 0;
  f.read(magic, sizeof(magic));
  f.read(reinterpret_cast<char*>(&version), sizeof(version));
  f.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!f || std::memcmp(magic, kPayloadMagic, sizeof(magic)) != 0) {
    throw_data("not a payload file (bad magic): " + path.string());
  }
  if (version != kPayloadVersion) {
    throw_data("unsupported payload version " + std::to_string(version) +
               " in " + path.string());
  }
  std::vector<double> values(count);
  f.read(reinterpret_cast<char*>(values.data()),
         static_cast<std::streamsize>(count * sizeof(double)));
  if (f.gcount() != static_cast<std::streamsize>(count * sizeof(double))) {
    throw_data("truncated payload file: " + path.string());
  }
  return values;
}

void write_matrix_payload(const fs::path& path, const Mat& m) {
  std::vector<double> flat(static_cast<std::size_t>(m.size()));
  std::size_t at = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat[at++] = m(i, j);
  }
  write_payload(path, flat);
}

Mat read_matrix_payload(const fs::path& path, Eigen::Index cols) {
  const std::vector<double> flat = read_payload(path);
  if (cols <= 0) throw_internal("read_matrix_payload: cols must be positive");
  if (flat.size() % static_cast<std::size_t>(cols) != 0) {
    throw_data("payload " + path.string() + " has " +
               std::to_string(flat.size()) + " values, not a multiple of " +
               std::to_string(cols) + " columns");
  }
  const Eigen::Index rows =
      static_cast<Eigen::Index>(flat.size()) / cols;
  Mat m(rows, cols);
  std::size_t at = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = flat[at++];
  }
  return m;
}

// ---- grouping files ----------------------------------------------------

std::string grouping_to_text(const GroupingScheme& scheme) {
  std::string out;
  for (const Group& g : scheme.groups) {
    out += g.name;
    out += '\t';
    for (std::size_t i = 0; i < g.indices.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(g.indices[i]);
    }
    out += '\n';
  }
  return out;
}

GroupingScheme grouping_from_text(const std::string& text, Omics modality,
                                  int feature_count,
                                  const std::string& where) {
  GroupingScheme scheme;
  scheme.modality = modality;
  scheme.feature_count = feature_count;
  std::istringstream f(text);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw_data(where + ":" + std::to_string(lineno) +
                 ": expected 'name<TAB>idx,idx,...'");
    }
    Group g;
    g.name = trim(line.substr(0, tab));
    if (g.name.empty()) {
      throw_data(where + ":" + std::to_string(lineno) + ": empty group name");
    }
    for (const std::string& tok : split(line.substr(tab + 1), ',')) {
      g.indices.push_back(static_cast<int>(
          parse_long(tok, where + ":" + std::to_string(lineno))));
    }
    std::sort(g.indices.begin(), g.indices.end());
    scheme.groups.push_back(std::move(g));
  }
  scheme.validate(where);
  return scheme;
}

void save_grouping(const fs::path& path, const GroupingScheme& scheme) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw_data("cannot write grouping file: " + path.string());
  f << grouping_to_text(scheme);
  if (!f) throw_data("short write to grouping file: " + path.string());
}

GroupingScheme load_grouping(const fs::path& path, Omics modality,
                             int feature_count) {
  std::ifstream f(path);
  if (!f) throw_data("missing grouping file: " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  return grouping_from_text(buf.str(), modality, feature_count, path.string());
}

// ---- cohort manifest -----------------------------------------------------

namespace {

constexpr const char* kDatasetKeys[] = {
    "name",        "d_h",         "rna_features",
    "dnam_features", "cnv_features", "rna_groups",
    "dnam_groups", "cnv_groups",  "values_space",
    "exclude_sex_chromosomes",    "variance_split"};
constexpr const char* kPatientKeys[] = {
    "id",   "patches", "rna",       "dnam",       "cnv",
    "cnv_missing", "slides",  "subtype", "surv_time", "surv_event"};

void reject_unknown_keys(const IniSection& sec, const char* const* known,
                         std::size_t count, const std::string& where) {
  for (const auto& [key, value] : sec.entries) {
    bool ok = false;
    for (std::size_t i = 0; i < count; ++i) {
      if (key == known[i]) {
        ok = true;
        break;
      }
    }
    if (!ok) throw_data(where + ": unknown manifest key '" + key + "'");
  }
}

Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = v[i];
  }
  return out;
}

std::vector<double> to_std(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

Cohort load_cohort(const fs::path& manifest_path) {
  const IniFile ini = IniFile::load(manifest_path.string());
  const fs::path dir = manifest_path.parent_path();

  const IniSection* ds = ini.find("dataset");
  if (ds == nullptr) {
    throw_data(manifest_path.string() + ": missing [dataset] section");
  }
  reject_unknown_keys(*ds, kDatasetKeys, std::size(kDatasetKeys),
                      manifest_path.string() + " [dataset]");

  Cohort cohort;
  cohort.name = ds->get_or("name", "");
  cohort.patch_dim =
      static_cast<int>(parse_long(ds->get("d_h"), "[dataset] d_h"));
  if (cohort.patch_dim <= 0) throw_data("[dataset] d_h must be positive");
  const std::string space = lower(ds->get_or("values_space", "raw"));
  if (space != "raw" && space != "transformed") {
    throw_data("[dataset] values_space must be 'raw' or 'transformed', got '" +
               space + "'");
  }
  cohort.exclude_sex_chromosomes =
      parse_bool(ds->get_or("exclude_sex_chromosomes", "false"),
                 "[dataset] exclude_sex_chromosomes");
  cohort.variance_split = ds->get_or("variance_split", "train");
  for (Omics o : kAllOmics) {
    const std::string fkey = omics_name(o) + "_features";
    const int nf = static_cast<int>(parse_long(ds->get(fkey), "[dataset] " + fkey));
    if (nf <= 0) throw_data("[dataset] " + fkey + " must be positive");
    cohort.feature_counts[static_cast<int>(o)] = nf;
    const std::string gkey = omics_name(o) + "_groups";
    cohort.groupings[static_cast<int>(o)] =
        load_grouping(dir / ds->get(gkey), o, nf);
  }

  std::unordered_set<std::string> seen_ids;
  for (const IniSection& sec : ini.sections) {
    if (sec.name != "patient") continue;
    reject_unknown_keys(sec, kPatientKeys, std::size(kPatientKeys),
                        manifest_path.string() + " [patient]");
    PatientRecord rec;
    rec.id = sec.get("id");
    const std::string where = "patient " + rec.id;
    if (!seen_ids.insert(rec.id).second) {
      throw_data(where + ": duplicate patient id");
    }

    rec.patches.embeddings =
        read_matrix_payload(dir / sec.get("patches"), cohort.patch_dim);
    if (rec.patches.embeddings.rows() < 1) {
      throw_data(where + ": patches: empty patch set");
    }
    if (!all_finite(rec.patches.embeddings)) {
      throw_data(where + ": patches: non-finite embedding value");
    }
    if (const std::string* slides = sec.find("slides")) {
      for (std::string& s : split(*slides, ',')) {
        rec.patches.source_slide_ids.push_back(trim(s));
      }
    } else {
      rec.patches.source_slide_ids.push_back(rec.id);
    }

    for (Omics o : kAllOmics) {
      const std::string* rel = sec.find(omics_name(o));
      if (rel == nullptr) continue;
      OmicsProfile prof;
      prof.modality = o;
      prof.values = to_vec(read_payload(dir / *rel));
      const int expected = cohort.features(o);
      if (prof.values.size() != expected) {
        throw_data(where + ": " + omics_name(o) + " length " +
                   std::to_string(prof.values.size()) + ", expected " +
                   std::to_string(expected));
      }
      if (!prof.values.allFinite()) {
        throw_data(where + ": " + omics_name(o) + ": non-finite value");
      }
      std::vector<bool> missing;
      if (const std::string* mrel = sec.find("cnv_missing")) {
        if (o == Omics::Cnv) {
          if (space == "transformed") {
            throw_data(where +
                       ": cnv_missing mask not allowed with transformed values");
          }
          const std::vector<double> mv = read_payload(dir / *mrel);
          if (mv.size() != static_cast<std::size_t>(expected)) {
            throw_data(where + ": cnv_missing length " +
                       std::to_string(mv.size()) + ", expected " +
                       std::to_string(expected));
          }
          missing.resize(mv.size());
          for (std::size_t i = 0; i < mv.size(); ++i) {
            if (mv[i] != 0.0 && mv[i] != 1.0) {
              throw_data(where + ": cnv_missing values must be 0 or 1");
            }
            missing[i] = mv[i] == 1.0;
          }
        }
      }
      try {
        if (space == "raw") {
          switch (o) {
            case Omics::Rna:
              prof.values = transform_rna(prof.values);
              break;
            case Omics::Dnam:
              validate_dnam(prof.values);
              break;
            case Omics::Cnv:
              prof.values = transform_cnv(prof.values, missing);
              break;
          }
        } else {
          if (o == Omics::Dnam) {
            validate_dnam(prof.values);
          } else if (prof.values.minCoeff() < 0.0) {
            throw_data("negative transformed value");
          }
        }
      } catch (const Error& e) {
        throw Error(e.kind(), where + ": " + e.what());
      }
      prof.transformed = true;
      rec.omics[static_cast<int>(o)] = std::move(prof);
    }
    if (sec.find("cnv_missing") != nullptr && !rec.has_omics(Omics::Cnv)) {
      throw_data(where + ": cnv_missing given without cnv values");
    }

    if (const std::string* st = sec.find("subtype")) {
      rec.subtype = static_cast<int>(parse_long(*st, where + ": subtype"));
    }
    const std::string* stime = sec.find("surv_time");
    const std::string* sevent = sec.find("surv_event");
    if ((stime == nullptr) != (sevent == nullptr)) {
      throw_data(where + ": surv_time and surv_event must appear together");
    }
    if (stime != nullptr) {
      SurvivalLabel lab;
      lab.time = parse_double(*stime, where + ": surv_time");
      lab.event = parse_bool(*sevent, where + ": surv_event");
      if (!(lab.time > 0.0)) {
        throw_data(where + ": surv_time must be > 0, got " +
                   format_double(lab.time));
      }
      rec.survival = lab;
    }
    cohort.patients.push_back(std::move(rec));
  }
  if (cohort.patients.empty()) {
    throw_data(manifest_path.string() + ": manifest lists no patients");
  }
  return cohort;
}

void save_cohort(const fs::path& dir, const Cohort& cohort) {
  fs::create_directories(dir);
  bool transformed = false;
  bool saw_profile = false;
  for (const PatientRecord& rec : cohort.patients) {
    for (Omics o : kAllOmics) {
      if (!rec.has_omics(o)) continue;
      if (!saw_profile) {
        transformed = rec.profile(o).transformed;
        saw_profile = true;
      } else if (rec.profile(o).transformed != transformed) {
        throw_data("save_cohort: mixed raw and transformed profiles");
      }
    }
  }

  IniFile ini;
  IniSection& ds = ini.get_or_add("dataset");
  if (!cohort.name.empty()) ds.set("name", cohort.name);
  ds.set("d_h", std::to_string(cohort.patch_dim));
  for (Omics o : kAllOmics) {
    ds.set(omics_name(o) + "_features", std::to_string(cohort.features(o)));
  }
  for (Omics o : kAllOmics) {
    const std::string file = "groups_" + omics_name(o) + ".tsv";
    ds.set(omics_name(o) + "_groups", file);
    save_grouping(dir / file, cohort.grouping(o));
  }
  ds.set("values_space", transformed ? "transformed" : "raw");
  ds.set("exclude_sex_chromosomes",
         cohort.exclude_sex_chromosomes ? "true" : "false");
  ds.set("variance_split", cohort.variance_split);

  for (const PatientRecord& rec : cohort.patients) {
    IniSection sec;
    sec.name = "patient";
    sec.set("id", rec.id);
    const std::string pfile = rec.id + ".patches.bin";
    write_matrix_payload(dir / pfile, rec.patches.embeddings);
    sec.set("patches", pfile);
    if (!rec.patches.source_slide_ids.empty() &&
        !(rec.patches.source_slide_ids.size() == 1 &&
          rec.patches.source_slide_ids[0] == rec.id)) {
      std::string slides;
      for (std::size_t i = 0; i < rec.patches.source_slide_ids.size(); ++i) {
        if (i) slides += ',';
        slides += rec.patches.source_slide_ids[i];
      }
      sec.set("slides", slides);
    }
    for (Omics o : kAllOmics) {
      if (!rec.has_omics(o)) continue;
      const OmicsProfile& prof = rec.profile(o);
      const std::string file = rec.id + "." + omics_name(o) + ".bin";
      write_payload(dir / file, to_std(prof.values));
      sec.set(omics_name(o), file);
      if (o == Omics::Cnv && !prof.missing.empty()) {
        std::vector<double> mask(prof.missing.size());
        for (std::size_t i = 0; i < mask.size(); ++i) {
          mask[i] = prof.missing[i] ? 1.0 : 0.0;
        }
        const std::string mfile = rec.id + ".cnvmask.bin";
        write_payload(dir / mfile, mask);
        sec.set("cnv_missing", mfile);
      }
    }
    if (rec.subtype) sec.set("subtype", std::to_string(*rec.subtype));
    if (rec.survival) {
      sec.set("surv_time", format_double(rec.survival->time));
      sec.set("surv_event", rec.survival->event ? "1" : "0");
    }
    ini.sections.push_back(std::move(sec));
  }
  ini.save((dir / "manifest.ini").string());
}

}  // namespace momics::data
