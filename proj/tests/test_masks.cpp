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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "scdepth/geometry.hpp"
#include "scdepth/io.hpp"
#include "scdepth/masks.hpp"
#include "scdepth/scene.hpp"
#include "scdepth/types.hpp"

using scd::BinaryMask;
using scd::CameraIntrinsics;
using scd::DepthMap;
using scd::GroundMask;
using scd::InstanceMask;
using scd::MotionField;
using scd::RenderedPair;
using scd::SceneSpec;
using scd::Vec3;

namespace {

std::string temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "scdepth_mask_test";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

SceneSpec base_scene(int width, int height) {
  SceneSpec s;
  s.name = "mask-test";
  s.preset = "custom";
  s.seed = 777;
  s.camera.fx = 115.0 * width / 160.0;
  s.camera.fy = 115.0 * width / 160.0;
  s.camera.cx = width / 2.0 - 0.5;
  s.camera.cy = height / 2.0 - 0.5;
  s.camera.width = width;
  s.camera.height = height;
  s.ground_y = 1.0;
  s.wall_z = 10.0;
  return s;
}

scd::PrimSpec ground_prim(double y) {
  scd::PrimSpec g;
  g.kind = scd::PrimSpec::Kind::ground;
  g.position = {0.0, y, 0.0};
  g.texture = {21, {0.45, 0.40, 0.33}, 0.7};
  return g;
}

scd::PrimSpec wall_prim(double z) {
  scd::PrimSpec w;
  w.kind = scd::PrimSpec::Kind::wall;
  w.position = {0.0, 0.0, z};
  w.texture = {22, {0.38, 0.42, 0.50}, 1.7};
  return w;
}

scd::PrimSpec box_prim(int id, Vec3 pos, Vec3 half, Vec3 motion_t) {
  scd::PrimSpec b;
  b.kind = scd::PrimSpec::Kind::box;
  b.id = id;
  b.position = pos;
  b.half_size = half;
  b.texture = {uint64_t(30 + id), {0.55, 0.35, 0.35}, 0.4};
  if (motion_t.x != 0.0 || motion_t.y != 0.0 || motion_t.z != 0.0) {
    b.moving = true;
    b.motion.translation = motion_t;
  }
  return b;
}

// The exact residual motion field implied by the renderer: the difference
// between the true unnormalized target projection and the rigid camera-only
// projection of the ground-truth depth. Zero on static pixels by definition.
MotionField true_delta(const RenderedPair& pair) {
  const CameraIntrinsics& k = pair.spec.camera;
  MotionField delta(k.width, k.height);
  scd::Mat3 rot = pair.spec.cam_r_to_s.rotation_matrix();
  Vec3 t = pair.spec.cam_r_to_s.translation;
  for (int v = 0; v < k.height; ++v)
    for (int u = 0; u < k.width; ++u) {
      size_t i = pair.depth_r.idx(u, v);
      if (!pair.depth_r.valid[i] || !pair.target_in_front.mask[i]) continue;
      double d = pair.depth_r.values[i];
      Vec3 p{(u - k.cx) / k.fx * d, (v - k.cy) / k.fy * d, d};
      Vec3 q = rot * p + t;
      Vec3 rigid{k.fx * q.x + k.cx * q.z, k.fy * q.y + k.cy * q.z, q.z};
      delta.set(u, v, pair.target_h.at(u, v) - rigid);
    }
  return delta;
}

double mask_iou(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b) {
  size_t inter = 0, uni = 0;
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    bool pa = a[i] != 0, pb = b[i] != 0;
    inter += (pa && pb);
    uni += (pa || pb);
  }
  REQUIRE(uni > 0);
  return double(inter) / double(uni);
}

}  // namespace

// ---------------------------------------------------------------------------
// Ground segmentation.

TEST_CASE("ground mask: a pure ground plane is covered almost entirely") {
  SceneSpec spec = base_scene(160, 96);
  spec.prims.push_back(ground_prim(spec.ground_y));
  RenderedPair pair = scd::render_pair(spec);

  GroundMask g = scd::ground_mask_from_depth(pair.depth_r, spec.camera);
  CHECK(g.source == "geometric");
  CHECK(g.warning.empty());

  size_t valid = 0, covered = 0;
  for (size_t i = 0; i < pair.depth_r.pixel_count(); ++i) {
    if (!pair.depth_r.valid[i]) {
      CHECK(!g.mask.mask[i]);  // never outside the valid-depth set
      continue;
    }
    ++valid;
    covered += g.mask.mask[i] != 0;
  }
  REQUIRE(valid > 1000);
  CHECK(double(covered) / double(valid) > 0.99);
}

TEST_CASE("ground mask: a vertical wall contributes nothing") {
  SceneSpec spec = base_scene(96, 64);
  spec.prims.push_back(wall_prim(spec.wall_z));
  RenderedPair pair = scd::render_pair(spec);

  GroundMask g = scd::ground_mask_from_depth(pair.depth_r, spec.camera);
  CHECK(g.mask.count() == 0);
  CHECK(!g.warning.empty());
}

TEST_CASE("ground mask: matches the renderer mask on a preset scene") {
  for (int index : {0, 1}) {
    CAPTURE(index);
    SceneSpec spec = scd::make_scene("cityscapes_like", index);
    RenderedPair pair = scd::render_pair(spec);
    GroundMask g = scd::ground_mask_from_depth(pair.depth_r, spec.camera);
    CHECK(mask_iou(g.mask.mask, pair.ground_r.mask) > 0.9);
    // Invariant: subset of valid-depth pixels.
    for (size_t i = 0; i < g.mask.mask.size(); ++i)
      if (g.mask.mask[i]) CHECK(pair.depth_r.valid[i]);
  }
}

TEST_CASE("ground mask: oracle wrapper passes the renderer mask through") {
  SceneSpec spec = scd::make_scene("kitti_like", 0);
  RenderedPair pair = scd::render_pair(spec);
  GroundMask g = scd::ground_mask_oracle(pair);
  CHECK(g.source == "oracle");
  CHECK(g.mask.mask == pair.ground_r.mask);
}

// ---------------------------------------------------------------------------
// Moving-object discovery.

TEST_CASE("moving masks: zero motion yields an empty list") {
  DepthMap depth(32, 24);
  for (size_t i = 0; i < depth.pixel_count(); ++i) {
    depth.values[i] = 5.0;
    depth.valid[i] = 1;
  }
  MotionField delta(32, 24);
  CHECK(scd::moving_masks_from_motion(delta, depth).empty());
}

TEST_CASE("moving masks: one moving box is recovered as one component") {
  SceneSpec spec = base_scene(160, 96);
  spec.prims.push_back(ground_prim(spec.ground_y));
  spec.prims.push_back(wall_prim(spec.wall_z));
  spec.prims.push_back(
      box_prim(1, {0.0, 0.7, 4.0}, {0.4, 0.3, 0.25}, {0.25, 0.0, 0.0}));
  spec.cam_r_to_s.translation = {0.02, 0.0, 0.05};
  RenderedPair pair = scd::render_pair(spec);

  MotionField delta = true_delta(pair);
  std::vector<InstanceMask> masks =
      scd::moving_masks_from_motion(delta, pair.depth_r);
  REQUIRE(masks.size() == 1);
  CHECK(masks[0].id == 1);
  CHECK(masks[0].classification == scd::MotionClass::moving_object);

  std::vector<uint8_t> gt(pair.depth_r.pixel_count(), 0);
  for (size_t i = 0; i < gt.size(); ++i) gt[i] = pair.instance_r[i] == 1;
  CHECK(mask_iou(masks[0].mask, gt) > 0.7);
}

TEST_CASE("moving masks: well-separated movers come out as two components") {
  SceneSpec spec = base_scene(160, 96);
  spec.prims.push_back(ground_prim(spec.ground_y));
  spec.prims.push_back(wall_prim(spec.wall_z));
  spec.prims.push_back(
      box_prim(1, {-1.1, 0.7, 4.0}, {0.3, 0.3, 0.25}, {0.2, 0.0, 0.0}));
  spec.prims.push_back(
      box_prim(2, {1.1, 0.65, 4.5}, {0.3, 0.35, 0.25}, {0.0, 0.0, 0.35}));
  RenderedPair pair = scd::render_pair(spec);

  MotionField delta = true_delta(pair);
  std::vector<InstanceMask> masks =
      scd::moving_masks_from_motion(delta, pair.depth_r);
  REQUIRE(masks.size() == 2);

  // Deterministic: a second run produces identical masks in the same order.
  std::vector<InstanceMask> again =
      scd::moving_masks_from_motion(delta, pair.depth_r);
  REQUIRE(again.size() == 2);
  for (int c = 0; c < 2; ++c) {
    CHECK(again[c].mask == masks[c].mask);
    CHECK(again[c].id == masks[c].id);
  }

  // Pairwise disjoint, each above the size floor.
  for (size_t i = 0; i < masks[0].mask.size(); ++i)
    CHECK(!(masks[0].mask[i] && masks[1].mask[i]));
  CHECK(masks[0].pixel_count() >= 64);
  CHECK(masks[1].pixel_count() >= 64);

  // Each component matches one ground-truth object.
  for (int id : {1, 2}) {
    std::vector<uint8_t> gt(pair.depth_r.pixel_count(), 0);
    for (size_t i = 0; i < gt.size(); ++i) gt[i] = pair.instance_r[i] == id;
    double best = 0.0;
    for (const auto& m : masks) best = std::max(best, mask_iou(m.mask, gt));
    CHECK(best > 0.7);
  }
}

TEST_CASE("moving masks: static presets produce no components") {
  for (int index = 0; index < scd::suite_default_count("static_only"); ++index) {
    CAPTURE(index);
    SceneSpec spec = scd::make_scene("static_only", index);
    RenderedPair pair = scd::render_pair(spec);
    MotionField delta = true_delta(pair);
    CHECK(scd::moving_masks_from_motion(delta, pair.depth_r).empty());
  }
}

TEST_CASE("moving masks: components below the size floor are dropped") {
  DepthMap depth(40, 30);
  for (size_t i = 0; i < depth.pixel_count(); ++i) {
    depth.values[i] = 5.0;
    depth.valid[i] = 1;
  }
  MotionField delta(40, 30);
  // A 4x4 = 16 px blob (under the floor) and a 10x10 = 100 px blob (over it).
  for (int v = 2; v < 6; ++v)
    for (int u = 2; u < 6; ++u) delta.set(u, v, {3.0, 0.0, 0.0});
  for (int v = 12; v < 22; ++v)
    for (int u = 20; u < 30; ++u) delta.set(u, v, {0.0, 0.0, 3.0});
  std::vector<InstanceMask> masks =
      scd::moving_masks_from_motion(delta, depth, 0.01, 64);
  REQUIRE(masks.size() == 1);
  CHECK(masks[0].pixel_count() >= 100);
  CHECK(masks[0].at(25, 15));
  CHECK(!masks[0].at(3, 3));
}

TEST_CASE("moving masks: closing bridges a one-pixel crack") {
  DepthMap depth(40, 30);
  for (size_t i = 0; i < depth.pixel_count(); ++i) {
    depth.values[i] = 5.0;
    depth.valid[i] = 1;
  }
  MotionField delta(40, 30);
  // A 12x12 blob with a one-pixel interior hole.
  for (int v = 8; v < 20; ++v)
    for (int u = 8; u < 20; ++u)
      if (!(u == 13 && v == 13)) delta.set(u, v, {2.0, 0.0, 0.0});
  std::vector<InstanceMask> masks =
      scd::moving_masks_from_motion(delta, depth, 0.01, 64);
  REQUIRE(masks.size() == 1);
  CHECK(masks[0].at(13, 13));  // hole filled
  CHECK(masks[0].pixel_count() == 144);
}

// ---------------------------------------------------------------------------
// Oracle instance masks.

TEST_CASE("oracle masks: renderer flags split static from moving") {
  SceneSpec spec = scd::make_scene("kitti_like", 0);
  RenderedPair pair = scd::render_pair(spec);

  std::vector<InstanceMask> moving = scd::oracle_masks(pair, true, 4);
  std::vector<InstanceMask> still = scd::oracle_masks(pair, false, 4);
  CHECK(!still.empty());

  size_t n_moving_spec = 0;
  for (uint8_t m : pair.object_moving) n_moving_spec += m != 0;
  CHECK(moving.size() <= n_moving_spec);
  CHECK(still.size() <= pair.object_ids.size() - n_moving_spec);

  for (const auto& m : moving)
    CHECK(m.classification == scd::MotionClass::moving_object);
  for (const auto& m : still)
    CHECK(m.classification == scd::MotionClass::static_object);

  // Every returned mask is exactly the renderer's pixel set for that id.
  auto check_exact = [&](const InstanceMask& m) {
    for (int v = 0; v < m.height; ++v)
      for (int u = 0; u < m.width; ++u)
        CHECK(m.at(u, v) == (pair.instance_r[m.idx(u, v)] == m.id));
  };
  for (const auto& m : moving) check_exact(m);
  for (const auto& m : still) check_exact(m);
}

// ---------------------------------------------------------------------------
// Export.

TEST_CASE("mask export: indexed PNG and legend roundtrip") {
  InstanceMask a(20, 15), b(20, 15);
  a.id = 3;
  a.classification = scd::MotionClass::moving_object;
  for (int v = 2; v < 8; ++v)
    for (int u = 2; u < 8; ++u) a.mask[a.idx(u, v)] = 1;
  b.id = 7;
  b.classification = scd::MotionClass::static_object;
  for (int v = 9; v < 14; ++v)
    for (int u = 10; u < 18; ++u) b.mask[b.idx(u, v)] = 1;

  std::string png = temp_path("masks.png"), js = temp_path("masks.json");
  scd::write_masks(png, js, {a, b}, 20, 15);
  std::vector<InstanceMask> back = scd::read_masks(png, js);
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == 3);
  CHECK(back[0].classification == scd::MotionClass::moving_object);
  CHECK(back[0].mask == a.mask);
  CHECK(back[1].id == 7);
  CHECK(back[1].classification == scd::MotionClass::static_object);
  CHECK(back[1].mask == b.mask);
}

TEST_CASE("mask export: overlap resolves to the first mask") {
  InstanceMask a(8, 4), b(8, 4);
  a.mask[a.idx(2, 1)] = 1;
  b.mask[b.idx(2, 1)] = 1;
  b.mask[b.idx(3, 1)] = 1;
  std::vector<uint8_t> img = scd::mask_index_image({a, b}, 8, 4);
  CHECK(img[a.idx(2, 1)] == 1);
  CHECK(img[a.idx(3, 1)] == 2);

  InstanceMask wrong(4, 4);
  CHECK_THROWS_AS(scd::mask_index_image({wrong}, 8, 4), scd::InputError);
}

// ---------------------------------------------------------------------------
// Morphology helpers.

TEST_CASE("morphology: closing is idempotent-ish and contains the input") {
  BinaryMask m(16, 16);
  // L-shaped blob touching the border, plus a pinhole.
  for (int v = 0; v < 10; ++v)
    for (int u = 0; u < 4; ++u) m.mask[m.idx(u, v)] = 1;
  for (int v = 8; v < 10; ++v)
    for (int u = 0; u < 12; ++u) m.mask[m.idx(u, v)] = 1;
  m.mask[m.idx(2, 4)] = 0;

  BinaryMask closed = scd::morph_close(m, 1);
  CHECK(closed.at(2, 4));  // hole filled
  for (size_t i = 0; i < m.mask.size(); ++i)
    if (m.mask[i]) CHECK(closed.mask[i]);  // contains the input (border too)

  BinaryMask eroded = scd::erode(m, 1);
  for (size_t i = 0; i < m.mask.size(); ++i)
    if (eroded.mask[i]) CHECK(m.mask[i]);
  CHECK(!eroded.at(0, 0));  // border pixels erode against the image edge
  CHECK(eroded.count() < m.count());
}
