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

#include "core/rng.hpp"

#include <cmath>
#include <numeric>

#include "core/common.hpp"

namespace momics {

namespace {

inline std::uint64_t splitmix_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  // One scramble round so derived streams do not correlate with the parent.
  return splitmix_next(s);
}

}  // namespace

Rng Rng::derive(std::string_view label) const {
  return Rng(mix(state_, fnv1a64(label)));
}

Rng Rng::derive(std::uint64_t index) const {
  return Rng(mix(state_, 0x517cc1b727220a95ull ^ index));
}

std::uint64_t Rng::next_u64() { return splitmix_next(state_); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (have_cached_normal_) {
    have_cached_normal_ = false;
    return cached_normal_;
  }
  // Box-Muller on (0,1] uniforms.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * M_PI * u2;
  cached_normal_ = r * std::sin(a);
  have_cached_normal_ = true;
  return r * std::cos(a);
}

double Rng::gamma(double alpha) {
  if (!(alpha > 0.0)) throw_internal("gamma: alpha must be positive");
  if (alpha < 1.0) {
    // Boost to shape alpha+1, then scale by U^(1/alpha).
    double u = 1.0 - uniform();
    return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = 1.0 - uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

std::vector<double> Rng::dirichlet_symmetric(double alpha, int k) {
  std::vector<double> w(k);
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    w[i] = gamma(alpha);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw_internal("below: n must be positive");
  const std::uint64_t limit = ~0ull - ~0ull % n;
  for (;;) {
    std::uint64_t x = next_u64();
    if (x < limit) return x % n;
  }
}

std::vector<int> Rng::sample_without_replacement(int n, int k) {
  if (k > n) throw_internal("sample_without_replacement: k > n");
  // Partial Fisher-Yates over an index array.
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<int> out(k);
  for (int i = 0; i < k; ++i) {
    int j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
    out[i] = idx[i];
  }
  return out;
}

void Rng::shuffle(std::vector<int>& v) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
    int j = static_cast<int>(below(static_cast<std::uint64_t>(i + 1)));
    std::swap(v[i], v[j]);
  }
}

}  // namespace momics
