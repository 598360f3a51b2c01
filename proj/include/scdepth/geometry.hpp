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

#include "scdepth/types.hpp"

namespace scd {

// Gradient of a rotation w.r.t. its axis-angle parameters: given the upstream
// gradient dL/dR (3x3, row-major), returns dL/d(axis_angle).
Vec3 rotation_gradient(Vec3 axis_angle, const Mat3& r, const Mat3& dl_dr);

struct ProjectedPoint {
  Vec2 pixel;        // normalized target pixel coordinates
  double depth = 0;  // target-frame depth (z after the transform)
  Vec3 h;            // unnormalized product K (R p + T): target pixel * depth
  bool in_front = false;
};

// Project pixel x with depth d from the reference frame into the other frame:
// h = K (R K^-1 x~ d + T), pixel = (h.x/h.z, h.y/h.z), depth = h.z. Behind-
// camera results are flagged, never clamped.
ProjectedPoint project_rigid(const CameraIntrinsics& k, const PoseSE3& pose,
                             Vec2 x, double d);

// Dense rigid correspondence for every valid depth pixel. Targets behind the
// camera or outside [0,width) x [0,height) are marked invalid; in-front
// coordinates stay recorded even off-frame so refinement can reuse them.
Correspondence build_correspondence(const DepthMap& depth, const CameraIntrinsics& k,
                                    const PoseSE3& pose);

// Refined correspondence: the per-pixel motion is added in the unnormalized
// pixel*depth product space, x''d'' = x'd' + delta, then renormalized. It
// applies to every pixel with a recorded in-front target (valid or not), so a
// motion field can pull an off-frame rigid target back into view. Pixels
// whose delta is exactly zero are copied through bit-exactly. A non-positive
// refined depth marks the pixel invalid rather than failing.
Correspondence apply_pixel_motion(const Correspondence& tau, const MotionField& delta,
                                  const CameraIntrinsics& k);

// Residual motion that retains an observed correspondence when the reference
// depth is multiplied by a candidate scale c:
//   t = d' x'~  -  K (R K^-1 x~ (c d) + T).
Vec3 solve_motion_residual(Vec2 x, double d, Vec2 x_target, double d_target,
                           double c, const CameraIntrinsics& k, const PoseSE3& pose);

struct ForwardWarpResult {
  ImageBuffer image;
  DepthMap depth;          // z-buffer contents at covered pixels
  BinaryMask covered;      // pixels that received at least one splat
  BinaryMask holes;        // complement of covered
};

// Forward (splatting) warp: each valid source pixel is splatted to the
// nearest integer target pixel; conflicts resolve to the smallest depth.
ForwardWarpResult forward_warp(const Correspondence& corr, const ImageBuffer& image);

// Forward-warp a binary mask (same splat rule, mask pixels only).
BinaryMask forward_warp_mask(const Correspondence& corr, const BinaryMask& mask);

struct BilinearSample {
  double value = 0.0;
  bool valid = false;
};

// Bilinear sample with all-four-taps-in-bounds validity (no edge clamping).
// Coordinates exactly on the right/bottom edge are valid (the floor cell is
// clamped inward so the sample reduces to the edge value).
BilinearSample sample_bilinear(const ImageBuffer& img, int channel, double x, double y);
BilinearSample sample_bilinear_depth(const DepthMap& depth, double x, double y);

struct BackwardWarpResult {
  ImageBuffer image;
  BinaryMask valid;
};

// Backward (sampling) warp: out(x) = bilinear(source, corr(x)). Differentiable
// in the target coordinates; the analytic gradient lives in the optimizer's
// fused evaluator.
BackwardWarpResult backward_warp(const Correspondence& corr, const ImageBuffer& source);

// Occlusion estimate: a pixel is occluded when its predicted target depth is
// larger than the target depth actually visible there (bilinearly
// interpolated), beyond tol plus the local tap spread — the spread keeps
// slanted surfaces and depth edges from misfiring. Dilated by 1 px.
BinaryMask occlusion_mask(const Correspondence& corr, const DepthMap& target_depth,
                          double tol);

BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask erode(const BinaryMask& mask, int radius);
// Morphological closing (dilate then erode): fills gaps up to ~2*radius px.
BinaryMask morph_close(const BinaryMask& mask, int radius);

}  // namespace scd
