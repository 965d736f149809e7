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

#include "core/optim.hpp"

#include <cmath>

namespace momics::nn {

double LrSchedule::at(double epoch) const {
  if (epoch < 0.0) epoch = 0.0;
  if (epoch > total_epochs) epoch = static_cast<double>(total_epochs);
  if (warmup_epochs > 0 && epoch < warmup_epochs) {
    return lr_start + (lr_peak - lr_start) * (epoch / warmup_epochs);
  }
  const double span = static_cast<double>(total_epochs - warmup_epochs);
  if (span <= 0.0) return lr_peak;
  const double u = (epoch - warmup_epochs) / span;
  return lr_final + 0.5 * (lr_peak - lr_final) * (1.0 + std::cos(M_PI * u));
}

AdamW::AdamW(ParamStore& ps, AdamWConfig cfg) : ps_(&ps), cfg_(cfg) {
  m_.reserve(ps.count());
  v_.reserve(ps.count());
  for (const auto& p : ps.entries()) {
    m_.push_back(Mat::Zero(p->node.rows(), p->node.cols()));
    v_.push_back(Mat::Zero(p->node.rows(), p->node.cols()));
  }
}

void AdamW::step(double lr) {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  const auto& entries = ps_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Node& n = entries[i]->node;
    if (!n.has_grad()) {
      throw_internal("adamw: missing gradient for " + entries[i]->name);
    }
    const Mat& g = n.grad();
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    Mat mhat = m_[i] / bc1;
    Mat vhat = v_[i] / bc2;
    n.value.array() -=
        lr * (mhat.array() / (vhat.array().sqrt() + cfg_.eps) +
              cfg_.weight_decay * n.value.array());
  }
}

GradCheckReport grad_check(ParamStore& ps,
                           const std::function<double()>& loss_fn,
                           const std::function<void()>& grad_fn,
                           double epsilon, long max_coords_per_param,
                           std::uint64_t coord_seed) {
  ps.zero_grads();
  grad_fn();
  std::vector<Mat> analytic;
  analytic.reserve(ps.count());
  for (const auto& p : ps.entries()) {
    analytic.push_back(p->node.has_grad()
                           ? p->node.grad()
                           : Mat::Zero(p->node.rows(), p->node.cols()));
  }

  GradCheckReport rep;
  Rng pick(coord_seed);
  const auto& entries = ps.entries();
  for (std::size_t pi = 0; pi < entries.size(); ++pi) {
    Node& n = entries[pi]->node;
    const long total = static_cast<long>(n.value.size());
    std::vector<int> coords;
    if (max_coords_per_param > 0 && total > max_coords_per_param) {
      Rng r = pick.derive(entries[pi]->name);
      coords = r.sample_without_replacement(static_cast<int>(total),
                                            static_cast<int>(max_coords_per_param));
    } else {
      coords.resize(static_cast<std::size_t>(total));
      for (long c = 0; c < total; ++c) coords[static_cast<std::size_t>(c)] = static_cast<int>(c);
    }
    for (int flat : coords) {
      double* w = n.value.data() + flat;
      if (std::abs(*w) < 10.0 * epsilon) {
        ++rep.skipped;
        continue;
      }
      const double keep = *w;
      *w = keep + epsilon;
      const double fp = loss_fn();
      *w = keep - epsilon;
      const double fm = loss_fn();
      *w = keep;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw_numeric("grad_check: non-finite loss near " + entries[pi]->name);
      }
      const double numeric = (fp - fm) / (2.0 * epsilon);
      const double a = analytic[pi](flat % n.value.rows(),
                                    flat / n.value.rows());
      const double denom =
          std::max({1.0, std::abs(a), std::abs(numeric)});
      const double rel = std::abs(a - numeric) / denom;
      ++rep.checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        const Eigen::Index r = flat % n.value.rows();
        const Eigen::Index c = flat / n.value.rows();
        rep.worst = entries[pi]->name + "[" + std::to_string(r) + "," +
                    std::to_string(c) + "]";
      }
    }
  }
  return rep;
}

}  // namespace momics::nn
