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

#include <vector>

#include "scdepth/types.hpp"

namespace scd {

struct LossWeights {
  double photometric = 1.0;
  double smoothness = 0.001;
  double sparsity = 1.0;
  double distill = 0.1;
  double ssim_mix = 0.85;   // SSIM share inside the photometric term
  double lambda_g = 1.0;    // inner scale of the sparsity term
};

// Median with the even-count convention: the average of the two central
// values. Throws on an empty input.
double median_of(std::vector<double> values);

// Photometric discrepancy between a reference image and a reconstruction:
//   mean over valid pixels of  ssim_mix * (1 - SSIM)/2 + (1 - ssim_mix) * L1,
// both averaged over channels. SSIM uses a 3x3 uniform window; invalid taps
// (masked or out of bounds) are dropped and the window weights renormalized,
// so masked pixels receive exactly zero gradient. If grad_recon is non-null,
// d(loss)/d(recon) is ACCUMULATED into it (same H*W*3 layout).
double photometric_loss(const ImageBuffer& ref, const ImageBuffer& recon,
                        const BinaryMask& valid, double ssim_mix,
                        std::vector<double>* grad_recon = nullptr);

// Edge-aware smoothness of the mean-normalized inverse depth:
//   mean over valid neighbor pairs of |ds| * exp(-|dI|),
// where |dI| is the channel-mean absolute image difference. The gradient
// flows through the normalizing mean. grad_depth is d(loss)/d(depth),
// accumulated (H*W).
double smoothness_loss(const DepthMap& depth, const ImageBuffer& ref,
                       std::vector<double>* grad_depth = nullptr);

// Sparsity of the per-pixel motion field:
//   lambda_g * mean over pixels and components of  2 m |x| / (m + |x|),
// with m the per-component spatial mean of |x|, treated as a constant
// (detached); 0/0 counts as 0. grad_motion is accumulated (H*W*3).
double motion_sparsity_loss(const MotionField& motion, double lambda_g,
                            std::vector<double>* grad_motion = nullptr);

struct DistillResult {
  double loss = 0.0;
  double alpha = 1.0;   // median(pred/label) over alpha's support
  size_t valid_count = 0;  // pixels entering the loss mean
};

// Scale-invariant distillation: mean of |pred - alpha * label| with
// alpha = median(pred/label), detached. When region is given the loss mean
// runs over region-and-valid pixels only; alpha's support is all shared
// valid pixels unless alpha_on_region is set. A label pixel that is flagged
// valid but non-positive inside alpha's support is an input error.
// grad_pred is accumulated (H*W).
DistillResult depth_distill_loss(const DepthMap& pred, const DepthMap& label,
                                 std::vector<double>* grad_pred = nullptr,
                                 const BinaryMask* region = nullptr,
                                 bool alpha_on_region = false);

}  // namespace scd
