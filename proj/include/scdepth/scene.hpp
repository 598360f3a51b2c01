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

#include "scdepth/geometry.hpp"
#include "scdepth/types.hpp"

namespace scd {

// Band-limited value noise in [0,1]; smooth (quintic) interpolation between
// hashed lattice values, deterministic in (seed, x, y).
double value_noise(uint64_t seed, double x, double y);

struct TextureSpec {
  uint64_t seed = 0;
  Vec3 base_color{0.5, 0.5, 0.5};
  // Local-space length of the dominant noise wavelength. Octave frequencies
  // and amplitudes are fixed in the renderer.
  double wavelength = 1.0;
};

struct PrimSpec {
  enum class Kind { ground, wall, box, billboard };
  Kind kind = Kind::box;
  int id = 0;  // object id (>0) for boxes/billboards; 0 for ground/wall
  Vec3 position;        // local-frame origin in world coordinates
  Vec3 rotation;        // local->world rotation, axis-angle
  Vec3 half_size;       // boxes: all three; billboards: x/y extents
  TextureSpec texture;
  bool moving = false;
  PoseSE3 motion;       // world-frame displacement between the two frames
};

struct SceneSpec {
  std::string name;
  std::string preset;
  int index = 0;
  uint64_t seed = 0;
  CameraIntrinsics camera;
  PoseSE3 cam_r_to_s;   // world (= frame r) coordinates to frame s camera
  double ground_y = 1.0;
  double wall_z = 10.0;
  std::vector<PrimSpec> prims;

  int object_count() const {
    int n = 0;
    for (const auto& p : prims) n = std::max(n, p.id);
    return n;
  }
};

struct RenderedPair {
  SceneSpec spec;
  ImageBuffer image_r, image_s;
  DepthMap depth_r, depth_s;
  // Per-pixel object id (0 = ground/wall), per frame.
  std::vector<int> instance_r, instance_s;
  BinaryMask ground_r;
  // Exact unnormalized target projection h = K (R_c (R_m p + T_m) + T_c) of
  // every valid frame-r pixel, including true object motion.
  MotionField target_h;
  BinaryMask target_in_front;
  Correspondence true_corr;   // normalized version of target_h
  BinaryMask occluded_r;      // frame-r pixels hidden in frame s
  std::vector<int> object_ids;          // 1..N
  std::vector<uint8_t> object_moving;   // aligned with object_ids
  std::vector<PoseSE3> object_pose;     // composed camera+motion per object
};

RenderedPair render_pair(const SceneSpec& spec);

// Extract per-object binary masks for one frame from the instance id image.
std::vector<InstanceMask> instance_masks(const std::vector<int>& ids, int width,
                                         int height, int object_count);

// Deterministic scene generator. Presets: static_only, kitti_like,
// cityscapes_like, stress. count <= 0 selects the preset default.
SceneSpec make_scene(const std::string& preset, int index);
std::vector<SceneSpec> scene_suite(const std::string& preset, int count = 0);
int suite_default_count(const std::string& preset);

std::string scene_to_json(const SceneSpec& spec);
SceneSpec scene_from_json(const std::string& json_text);

struct AmbiguityReport {
  double scale = 1.0;
  MotionField motion;          // per-pixel residual motion t_x for this scale
  double max_residual = 0.0;   // worst product-space error after substitution
  double static_mean_motion = 0.0;   // mean |t_x| over static pixels
  double dynamic_mean_motion = 0.0;  // mean |t_x| over moving-object pixels
  double static_max_motion = 0.0;
  size_t static_count = 0, dynamic_count = 0;
};

// The motivating negative result: multiplying every reference depth by c can
// be explained away, pixel for pixel, by a residual motion field — the
// reprojection residual stays below 1e-9 for every positive c. At c=1 the
// residual motion vanishes identically on static pixels.
AmbiguityReport demonstrate_scale_ambiguity(const RenderedPair& pair, double c);

}  // namespace scd
