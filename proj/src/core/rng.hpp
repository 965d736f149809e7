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

#include <cstdint>
#include <string_view>
#include <vector>

namespace momics {

// Deterministic splittable PRNG (splitmix64 core). All randomness in the
// project flows from one root seed through named sub-streams derived with
// derive(); derivation is pure, so any (seed, label..., index...) path can be
// re-created independently of draw order. Distributions are hand-rolled so
// results are bit-identical across compilers and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Child stream keyed by a label or index; does not advance this stream.
  Rng derive(std::string_view label) const;
  Rng derive(std::uint64_t index) const;

  std::uint64_t next_u64();
  std::uint64_t state() const { return state_; }

  double uniform();                    // [0, 1)
  double uniform(double lo, double hi);
  double normal();                     // standard normal (Box-Muller)
  double gamma(double alpha);          // shape alpha, scale 1 (Marsaglia-Tsang)
  std::vector<double> dirichlet_symmetric(double alpha, int k);

  std::uint64_t below(std::uint64_t n);  // uniform in [0, n), unbiased
  // k distinct indices uniform from [0, n), in draw order.
  std::vector<int> sample_without_replacement(int n, int k);
  void shuffle(std::vector<int>& v);

 private:
  std::uint64_t state_;
  bool have_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace momics
