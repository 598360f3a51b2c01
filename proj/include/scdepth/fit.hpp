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

#include <optional>
#include <vector>

#include "scdepth/losses.hpp"
#include "scdepth/types.hpp"

namespace scd {

// A differentiable image-alignment problem: per-pixel log-depth, a 6-dof
// pose, and an optional per-pixel residual motion field are fit so that the
// source frame, warped into the reference frame, matches it photometrically.
struct WarpProblem {
  const CameraIntrinsics* camera = nullptr;
  const ImageBuffer* ref = nullptr;             // reconstruction target
  const ImageBuffer* src = nullptr;             // frame that gets sampled
  const BinaryMask* support = nullptr;          // pixels entering the photometric term
  const std::vector<uint8_t>* depth_valid = nullptr;  // parameterized pixels
  LossWeights weights;
  bool use_motion = false;
  const DepthMap* distill_label = nullptr;      // optional distillation target
  const BinaryMask* distill_region = nullptr;   // L_depth mean restricted here
  bool alpha_on_region = false;                 // median-ratio support switch
  // When set, a sample is valid only if all four bilinear taps fall on mask
  // pixels of the source frame (used for object fits on transported masks).
  const BinaryMask* src_mask = nullptr;
  // Edge image for the smoothness term; defaults to `ref`. Object fits pass a
  // constant image so the term runs unattenuated over the mask interior.
  const ImageBuffer* smooth_ref = nullptr;
};

struct WarpParams {
  std::vector<double> log_depth;  // H*W, only depth_valid entries are used
  PoseSE3 pose;
  MotionField motion;             // ignored unless the problem uses motion
};

struct WarpGrads {
  std::vector<double> log_depth;
  double pose[6] = {0, 0, 0, 0, 0, 0};  // rotation xyz, translation xyz
  MotionField motion;
};

struct LossBreakdown {
  double total = 0.0;
  double photometric = 0.0;
  double smoothness = 0.0;
  double sparsity = 0.0;
  double distill = 0.0;
  double distill_alpha = 1.0;
  size_t photo_valid = 0;  // pixels with a valid reconstruction this step
};

// Evaluate the weighted objective; when grads is non-null the gradients are
// written (overwritten, not accumulated) into it. Scratch buffers live in the
// evaluator so repeated calls do not reallocate.
class WarpEvaluator {
 public:
  explicit WarpEvaluator(const WarpProblem& problem);

  LossBreakdown evaluate(const WarpParams& params, WarpGrads* grads);

  // Reconstruction and its validity from the most recent evaluate() call.
  const ImageBuffer& last_recon() const { return recon_; }
  const BinaryMask& last_valid() const { return photo_valid_; }
  const Correspondence& last_corr() const { return corr_; }

 private:
  const WarpProblem& p_;
  int w_ = 0, h_ = 0;
  // Per-pixel caches for the backward pass.
  std::vector<double> depth_;      // exp(log_depth)
  std::vector<Vec3> pcam_;         // K^-1 x~ d
  std::vector<Vec3> hvec_;         // K (R p + T) + delta
  Correspondence corr_;
  ImageBuffer recon_;
  BinaryMask photo_valid_;
  DepthMap depth_map_;
  std::vector<double> grad_recon_, grad_depth_values_;
};

}  // namespace scd
