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
#include <string>
#include <vector>

#include "scdepth/config.hpp"
#include "scdepth/scene.hpp"
#include "scdepth/stage.hpp"
#include "scdepth/types.hpp"

namespace scd {

// One object's rigid-SfM problem and (after fitting) its solution: a depth
// map supported on the reference mask and a single composite rigid pose.
// The depth scale is arbitrary — internally consistent, externally unknown.
struct ObjectHypothesis {
  int id = 0;
  MotionClass classification = MotionClass::unknown;
  InstanceMask mask_r;               // reference-frame support
  InstanceMask mask_s;               // transported to the source frame
  int crop_u0 = 0, crop_v0 = 0;      // crop window [u0,u1) x [v0,v1),
  int crop_u1 = 0, crop_v1 = 0;      // full-frame coordinates
  DepthMap depth;                    // full-frame; valid exactly on mask_r
  PoseSE3 pose;                      // composite object+camera motion, r -> s
  std::vector<StageRecord> trace;
  std::string warning;               // nonempty when the transported mask shrank
};

// Forward-warp an instance mask through the refined correspondence; holes up
// to one pixel are closed. Pixels without a valid correspondence drop out.
InstanceMask transport_mask(const InstanceMask& mask,
                            const Correspondence& tau_prime);

// Assemble a hypothesis: transport the mask, take the union bounding box of
// both masks plus crop padding, record a warning when the object partially
// leaves the frame. Returns nullopt (with *warning set when given) when the
// mask is under min_object_pixels or the transported mask comes back empty.
std::optional<ObjectHypothesis> make_object_hypothesis(
    const InstanceMask& mask_r, const Correspondence& tau_prime,
    const ObjectStageConfig& cfg, std::string* warning = nullptr);

// The cropped fit inputs for one hypothesis: images, masks, and intrinsics
// with the principal point shifted by the crop origin (every ray matches the
// full frame). `problem()` wires a WarpProblem to the owned buffers, so the
// crop must outlive any evaluator built on it.
struct ObjectCrop {
  CameraIntrinsics camera;
  ImageBuffer ref, src, flat;
  BinaryMask support, src_mask;
  std::vector<uint8_t> depth_valid;

  WarpProblem problem(const LossWeights& weights) const;
};

ObjectCrop build_object_crop(const RenderedPair& pair,
                             const ObjectHypothesis& hyp);

// Fit depth and pose on the crop by masked photometric + smoothness descent.
// hyp.depth (where valid) and hyp.pose seed the optimizer; an unset depth
// starts at unit depth with an identity pose. Throws DegenerateInputError for
// textureless objects (reference-image variance < 1e-4 inside the mask) and
// OptimizationFailure on divergence.
ObjectHypothesis run_object_stage(const RenderedPair& pair,
                                  ObjectHypothesis hyp, const RunConfig& cfg);

// Serialization: depth as PFM plus a JSON sidecar (pose, classification,
// crop, warning, trace reference). The reference mask is implied by the
// depth support; the transported mask is stored as its pixel count only.
void save_object(const ObjectHypothesis& hyp, const std::string& dir);
ObjectHypothesis load_object(const std::string& dir);

}  // namespace scd
