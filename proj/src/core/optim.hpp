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
#include <functional>
#include <string>
#include <vector>

#include "core/layers.hpp"

namespace momics::nn {

// Piecewise learning-rate schedule over epochs: linear ramp lr_start ->
// lr_peak across warmup_epochs, then cosine decay to lr_final at
// total_epochs. Evaluated at fractional epochs so per-step rates vary
// smoothly inside an epoch.
struct LrSchedule {
  int warmup_epochs = 0;
  int total_epochs = 1;
  double lr_start = 0.0;
  double lr_peak = 0.0;
  double lr_final = 0.0;

  double at(double epoch) const;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Adam with bias correction and decoupled weight decay (decay applied to
// the weights directly, scaled by the current learning rate). Moments are
// kept per parameter in store order and are part of the checkpoint.
class AdamW {
 public:
  AdamW(ParamStore& ps, AdamWConfig cfg);

  // One update over all parameters; every parameter must have a gradient.
  void step(double lr);

  std::int64_t step_count() const { return step_; }
  void set_step_count(std::int64_t s) { step_ = s; }
  std::size_t size() const { return m_.size(); }
  Mat& moment1(std::size_t i) { return m_[i]; }
  Mat& moment2(std::size_t i) { return v_[i]; }
  const ParamStore& params() const { return *ps_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  ParamStore* ps_;
  AdamWConfig cfg_;
  std::int64_t step_ = 0;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst;  // "param[i,j]" of the worst coordinate
  long checked = 0;
  long skipped = 0;
};

// Compares reverse-mode gradients against central finite differences.
// `loss_fn` must rebuild the graph from current parameter values and return
// the scalar loss; `grad_fn` must run forward+backward, leaving gradients in
// the store. Coordinates with |value| < 10*epsilon are skipped (finite
// differences straddle activation kinks there). Relative error is
// |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckReport grad_check(ParamStore& ps,
                           const std::function<double()>& loss_fn,
                           const std::function<void()>& grad_fn,
                           double epsilon = 1e-5,
                           long max_coords_per_param = 0,
                           std::uint64_t coord_seed = 7);

}  // namespace momics::nn
