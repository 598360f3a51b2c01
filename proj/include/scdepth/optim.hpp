/*
 * Copyright 2026 The scdepth Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "scdepth/types.hpp"

namespace scd {

// Step-budget learning-rate schedule: the rate is halved at each third of the
// total budget (x1, x0.5, x0.25).
struct LrSchedule {
  double base = 1e-4;
  int total_steps = 1;

  double at(int step) const {
    if (total_steps <= 0) return base;
    int phase = std::min(2, (3 * step) / total_steps);
    return base * std::pow(0.5, phase);
  }
};

// Plain Adam over a flat parameter vector.
class Adam {
 public:
  explicit Adam(size_t n, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>* params, const std::vector<double>& grads,
            double lr) {
    if (params->size() != m_.size() || grads.size() != m_.size())
      throw InputError("adam: size mismatch");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < m_.size(); ++i) {
      double g = grads[i];
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
      double mhat = m_[i] / bc1;
      double vhat = v_[i] / bc2;
      (*params)[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }

  size_t size() const { return m_.size(); }

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace scd
