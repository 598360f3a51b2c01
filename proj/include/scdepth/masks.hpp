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

#include <string>
#include <vector>

#include "scdepth/scene.hpp"
#include "scdepth/types.hpp"

namespace scd {

// Ground segmentation result. `source` records how it was produced
// ("geometric" or "oracle"); `warning` is nonempty when a fallback fired.
struct GroundMask {
  BinaryMask mask;
  std::string source;
  std::string warning;
};

// Segment ground pixels from back-projected geometry: a pixel is ground iff
// its surface normal lies within theta_n_deg of vertical AND its world height
// sits within h_tol_frac * median(depth) of the robust ground height (the
// median height of normal-gated pixels in the lower image third). Pixels with
// too few valid neighbors for a normal estimate are never ground. When no
// candidate passes the normal gate the mask is empty and `warning` says so.
GroundMask ground_mask_from_depth(const DepthMap& depth,
                                  const CameraIntrinsics& k,
                                  double theta_n_deg = 15.0,
                                  double h_tol_frac = 0.05);

// Renderer ground mask wrapped in the same result type.
GroundMask ground_mask_oracle(const RenderedPair& pair);

// Discover moving objects from the residual motion field: threshold
// |delta| > theta_m * median(depth), split into 4-connected components,
// discard components smaller than min_object_pixels, then close 1-px holes.
// Returned masks are pairwise disjoint, each at least min_object_pixels
// large, ordered by first (row-major) pixel, ids 1..K in that order.
std::vector<InstanceMask> moving_masks_from_motion(const MotionField& delta,
                                                   const DepthMap& depth,
                                                   double theta_m = 0.01,
                                                   int min_object_pixels = 64);

// Renderer instance masks for frame r, filtered by the moving flag and by
// minimum size. Classification comes from the renderer, ids are object ids.
std::vector<InstanceMask> oracle_masks(const RenderedPair& pair, bool moving,
                                       int min_object_pixels = 64);

// Indexed label image: pixel = 1-based index of the owning mask in `masks`
// (first mask wins where they overlap), 0 = background.
std::vector<uint8_t> mask_index_image(const std::vector<InstanceMask>& masks,
                                      int width, int height);

// Export masks as an indexed PNG plus a JSON legend mapping each index to
// the mask id, classification, and pixel count.
void write_masks(const std::string& png_path, const std::string& json_path,
                 const std::vector<InstanceMask>& masks, int width, int height);
std::vector<InstanceMask> read_masks(const std::string& png_path,
                                     const std::string& json_path);

}  // namespace scd
