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

#include "core/masking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace momics::masking {

int MaskPlan::visible_count(Omics o) const {
  const auto& v = visible[static_cast<int>(o)];
  return static_cast<int>(std::count(v.begin(), v.end(), true));
}

int MaskPlan::total_tokens() const {
  int n = 0;
  for (Omics o : kAllOmics) n += token_count(o);
  return n;
}

int MaskPlan::total_visible() const {
  int n = 0;
  for (Omics o : kAllOmics) n += visible_count(o);
  return n;
}

std::vector<int> MaskPlan::visible_indices(Omics o) const {
  std::vector<int> out;
  const auto& v = visible[static_cast<int>(o)];
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> MaskPlan::masked_indices(Omics o) const {
  std::vector<int> out;
  const auto& v = visible[static_cast<int>(o)];
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

namespace {

std::string to_hex(const std::vector<bool>& bits) {
  std::string out;
  for (std::size_t base = 0; base < bits.size(); base += 8) {
    unsigned byte = 0;
    for (std::size_t b = 0; b < 8 && base + b < bits.size(); ++b) {
      if (bits[base + b]) byte |= 1u << b;
    }
    char buf[3];
    std::snprintf(buf, sizeof(buf), "%02x", byte);
    out += buf;
  }
  return out;
}

std::vector<bool> from_hex(const std::string& hex, int count,
                           const std::string& what) {
  if (hex.size() != (static_cast<std::size_t>(count) + 7) / 8 * 2) {
    throw_data(what + ": bitmask length mismatch");
  }
  std::vector<bool> bits(static_cast<std::size_t>(count), false);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    const unsigned byte = static_cast<unsigned>(
        std::stoul(hex.substr(i, 2), nullptr, 16));
    for (std::size_t b = 0; b < 8; ++b) {
      const std::size_t idx = i / 2 * 8 + b;
      if (idx < bits.size()) bits[idx] = (byte >> b) & 1u;
    }
  }
  return bits;
}

}  // namespace

std::string MaskPlan::to_log() const {
  std::string line = "mask r=" + format_double(r) + " w=";
  for (int i = 0; i < kNumOmics; ++i) {
    if (i) line += ',';
    line += format_double(weights[static_cast<std::size_t>(i)]);
  }
  char seed_hex[17];
  std::snprintf(seed_hex, sizeof(seed_hex), "%016llx",
                static_cast<unsigned long long>(seed_state));
  line += " seed=";
  line += seed_hex;
  for (Omics o : kAllOmics) {
    line += ' ' + omics_name(o) + '=' + to_hex(visible[static_cast<int>(o)]);
  }
  return line;
}

MaskPlan MaskPlan::from_log(const std::string& line,
                            const std::array<int, kNumOmics>& token_counts) {
  MaskPlan plan;
  bool saw[kNumOmics] = {false, false, false};
  for (const std::string& tok : split(trim(line), ' ')) {
    if (tok == "mask" || tok.empty()) continue;
    const std::size_t eq = tok.find('=');
    if (eq == std::string::npos) throw_data("mask log: malformed token '" + tok + "'");
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    if (key == "r") {
      plan.r = parse_double(val, "mask log r");
    } else if (key == "seed") {
      if (val.size() != 16) throw_data("mask log: malformed seed");
      plan.seed_state = std::stoull(val, nullptr, 16);
    } else if (key == "w") {
      const auto parts = split(val, ',');
      if (parts.size() != kNumOmics) throw_data("mask log: expected 3 weights");
      for (int i = 0; i < kNumOmics; ++i) {
        plan.weights[static_cast<std::size_t>(i)] =
            parse_double(parts[static_cast<std::size_t>(i)], "mask log w");
      }
    } else {
      const Omics o = omics_from_name(key);
      plan.visible[static_cast<int>(o)] =
          from_hex(val, token_counts[static_cast<int>(o)], "mask log " + key);
      saw[static_cast<int>(o)] = true;
    }
  }
  for (Omics o : kAllOmics) {
    if (!saw[static_cast<int>(o)]) {
      throw_data("mask log: missing bitmask for " + omics_name(o));
    }
  }
  return plan;
}

MaskPlan sample_mask_plan(const std::array<int, kNumOmics>& token_counts,
                          double r, double alpha, Rng& rng) {
  if (!(r >= 0.0 && r <= 1.0)) {
    throw_config("mask ratio r must be in [0, 1], got " + format_double(r));
  }
  if (!(alpha > 0.0)) {
    throw_config("dirichlet alpha must be > 0, got " + format_double(alpha));
  }
  for (Omics o : kAllOmics) {
    if (token_counts[static_cast<int>(o)] < 0) {
      throw_config("negative token count for " + omics_name(o));
    }
  }

  MaskPlan plan;
  plan.r = r;
  plan.seed_state = rng.state();
  const int total = token_counts[0] + token_counts[1] + token_counts[2];
  const int l_vis = static_cast<int>(std::floor((1.0 - r) * total));

  const std::vector<double> w = rng.dirichlet_symmetric(alpha, kNumOmics);
  for (int i = 0; i < kNumOmics; ++i) plan.weights[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)];

  // Largest-remainder rounding of the real-valued budgets.
  std::array<int, kNumOmics> budget{};
  {
    std::array<double, kNumOmics> frac{};
    int assigned = 0;
    for (int i = 0; i < kNumOmics; ++i) {
      const double q = w[static_cast<std::size_t>(i)] * l_vis;
      budget[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(q));
      frac[static_cast<std::size_t>(i)] = q - budget[static_cast<std::size_t>(i)];
      assigned += budget[static_cast<std::size_t>(i)];
    }
    std::array<int, kNumOmics> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (frac[static_cast<std::size_t>(a)] != frac[static_cast<std::size_t>(b)])
        return frac[static_cast<std::size_t>(a)] > frac[static_cast<std::size_t>(b)];
      return a < b;
    });
    for (int i = 0; i < l_vis - assigned; ++i) {
      ++budget[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    }
  }

  // Clamp to token counts; put the overflow where capacity remains,
  // proportionally (largest remainder again). A single round suffices: each
  // redistribution quota is bounded by its modality's remaining capacity.
  {
    int overflow = 0;
    std::array<bool, kNumOmics> clamped{};
    for (int i = 0; i < kNumOmics; ++i) {
      if (budget[static_cast<std::size_t>(i)] > token_counts[static_cast<std::size_t>(i)]) {
        overflow += budget[static_cast<std::size_t>(i)] - token_counts[static_cast<std::size_t>(i)];
        budget[static_cast<std::size_t>(i)] = token_counts[static_cast<std::size_t>(i)];
        clamped[static_cast<std::size_t>(i)] = true;
      }
    }
    if (overflow > 0) {
      double cap_total = 0.0;
      for (int i = 0; i < kNumOmics; ++i) {
        if (!clamped[static_cast<std::size_t>(i)])
          cap_total += token_counts[static_cast<std::size_t>(i)] - budget[static_cast<std::size_t>(i)];
      }
      std::array<double, kNumOmics> frac{};
      std::array<int, kNumOmics> extra{};
      int assigned = 0;
      for (int i = 0; i < kNumOmics; ++i) {
        if (clamped[static_cast<std::size_t>(i)] || cap_total == 0.0) continue;
        const double cap = token_counts[static_cast<std::size_t>(i)] - budget[static_cast<std::size_t>(i)];
        const double q = overflow * cap / cap_total;
        extra[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(q));
        frac[static_cast<std::size_t>(i)] = q - extra[static_cast<std::size_t>(i)];
        assigned += extra[static_cast<std::size_t>(i)];
      }
      std::array<int, kNumOmics> order{0, 1, 2};
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (frac[static_cast<std::size_t>(a)] != frac[static_cast<std::size_t>(b)])
          return frac[static_cast<std::size_t>(a)] > frac[static_cast<std::size_t>(b)];
        return a < b;
      });
      for (int i = 0; i < overflow - assigned; ++i) {
        ++extra[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
      }
      for (int i = 0; i < kNumOmics; ++i) {
        budget[static_cast<std::size_t>(i)] += extra[static_cast<std::size_t>(i)];
      }
    }
  }

  for (Omics o : kAllOmics) {
    const int i = static_cast<int>(o);
    plan.visible[static_cast<std::size_t>(i)].assign(
        static_cast<std::size_t>(token_counts[static_cast<std::size_t>(i)]), false);
    for (int idx : rng.sample_without_replacement(
             token_counts[static_cast<std::size_t>(i)], budget[static_cast<std::size_t>(i)])) {
      plan.visible[static_cast<std::size_t>(i)][static_cast<std::size_t>(idx)] = true;
    }
  }
  return plan;
}

MaskPlan explicit_mask_plan(const std::vector<Omics>& visible_modalities,
                            const std::vector<Omics>& target_modalities,
                            const std::array<int, kNumOmics>& token_counts) {
  std::array<bool, kNumOmics> vis{};
  for (Omics o : visible_modalities) vis[static_cast<int>(o)] = true;
  for (Omics o : target_modalities) {
    if (vis[static_cast<int>(o)]) {
      throw_config("mask plan: modality " + omics_name(o) +
                   " listed as both visible and target");
    }
  }

  MaskPlan plan;
  int n_vis = 0;
  int total = 0;
  for (Omics o : kAllOmics) {
    const int i = static_cast<int>(o);
    const int count = token_counts[static_cast<std::size_t>(i)];
    plan.visible[static_cast<std::size_t>(i)].assign(
        static_cast<std::size_t>(count), vis[static_cast<std::size_t>(i)]);
    total += count;
    if (vis[static_cast<std::size_t>(i)]) n_vis += count;
  }
  plan.r = total == 0 ? 1.0 : 1.0 - static_cast<double>(n_vis) / total;
  for (int i = 0; i < kNumOmics; ++i) {
    plan.weights[static_cast<std::size_t>(i)] =
        n_vis == 0 ? 1.0 / kNumOmics
                   : static_cast<double>(plan.visible_count(kAllOmics[i])) / n_vis;
  }
  return plan;
}

}  // namespace momics::masking
