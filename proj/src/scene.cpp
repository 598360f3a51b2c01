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

#include "scdepth/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

#include "scdepth/rng.hpp"

namespace scd {

namespace {

uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double lattice_value(uint64_t seed, int64_t ix, int64_t iy) {
  uint64_t h = mix64(seed ^ mix64(uint64_t(ix) ^ mix64(uint64_t(iy))));
  return double(h >> 11) * 0x1.0p-53;
}

double quintic(double t) { return t * t * t * (t * (6.0 * t - 15.0) + 10.0); }

}  // namespace

double value_noise(uint64_t seed, double x, double y) {
  double fx = std::floor(x), fy = std::floor(y);
  auto ix = int64_t(fx), iy = int64_t(fy);
  double tx = quintic(x - fx), ty = quintic(y - fy);
  double v00 = lattice_value(seed, ix, iy);
  double v10 = lattice_value(seed, ix + 1, iy);
  double v01 = lattice_value(seed, ix, iy + 1);
  double v11 = lattice_value(seed, ix + 1, iy + 1);
  double r0 = v00 + tx * (v10 - v00);
  double r1 = v01 + tx * (v11 - v01);
  return r0 + ty * (r1 - r0);
}

namespace {

// Fixed octave layout shared by all surfaces: a dominant low frequency that
// keeps photometric basins wide, plus finer detail for alignment precision.
constexpr int kOctaves = 3;
constexpr double kOctaveFreq[kOctaves] = {1.0, 2.3, 5.1};
constexpr double kOctaveAmp[kOctaves] = {0.30, 0.12, 0.06};

Vec3 sample_texture(const TextureSpec& tex, int face, double u, double v) {
  Vec3 out;
  double inv_wl = 1.0 / tex.wavelength;
  for (int c = 0; c < 3; ++c) {
    double val = tex.base_color[c];
    for (int o = 0; o < kOctaves; ++o) {
      uint64_t seed = mix64(tex.seed ^ (uint64_t(c) << 8) ^ (uint64_t(o) << 16) ^
                            (uint64_t(face) << 24));
      double f = inv_wl * kOctaveFreq[o];
      val += kOctaveAmp[o] * (value_noise(seed, u * f, v * f) - 0.5);
    }
    out[c] = std::clamp(val, 0.0, 1.0);
  }
  return out;
}

struct PrimXform {
  const PrimSpec* prim = nullptr;
  Mat3 inv_rot;   // camera -> local rotation
  Vec3 origin;    // camera origin expressed in local coordinates
};

// local -> camera map for one primitive in one frame.
PrimXform make_xform(const PrimSpec& prim, bool moved, const PoseSE3* cam) {
  Mat3 rb = axis_angle_to_matrix(prim.rotation);
  Vec3 tb = prim.position;
  Mat3 r_total = rb;
  Vec3 t_total = tb;
  if (moved && prim.moving) {
    Mat3 rm = prim.motion.rotation_matrix();
    r_total = rm * r_total;
    t_total = rm * t_total + prim.motion.translation;
  }
  if (cam) {
    Mat3 rc = cam->rotation_matrix();
    r_total = rc * r_total;
    t_total = rc * t_total + cam->translation;
  }
  PrimXform x;
  x.prim = &prim;
  x.inv_rot = r_total.transposed();
  Vec3 o = x.inv_rot * t_total;
  x.origin = {-o.x, -o.y, -o.z};
  return x;
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  const PrimSpec* prim = nullptr;
  int face = 0;
  double u = 0, v = 0;
};

constexpr double kRayNear = 0.05;

void intersect_axis_plane(const PrimXform& x, Vec3 dir, int axis, Hit* best) {
  Vec3 d = x.inv_rot * dir;
  double da = d[axis], oa = x.origin[axis];
  if (std::abs(da) < 1e-12) return;
  double t = -oa / da;
  if (t <= kRayNear || t >= best->t) return;
  Vec3 p = x.origin + t * d;
  int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
  *best = {t, x.prim, 0, p[a1], p[a2]};
}

void intersect_box(const PrimXform& x, Vec3 dir, Hit* best) {
  Vec3 d = x.inv_rot * dir;
  const Vec3& o = x.origin;
  const Vec3& h = x.prim->half_size;
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  int enter_axis = -1;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-12) {
      if (o[a] < -h[a] || o[a] > h[a]) return;
      continue;
    }
    double t0 = (-h[a] - o[a]) / d[a];
    double t1 = (h[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > tmin) {
      tmin = t0;
      enter_axis = a;
    }
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return;
  }
  if (enter_axis < 0 || tmin <= kRayNear || tmin >= best->t) return;
  Vec3 p = o + tmin * d;
  int a1 = (enter_axis + 1) % 3, a2 = (enter_axis + 2) % 3;
  int side = d[enter_axis] > 0 ? 0 : 1;
  *best = {tmin, x.prim, enter_axis * 2 + side, p[a1], p[a2]};
}

void intersect_billboard(const PrimXform& x, Vec3 dir, Hit* best) {
  Vec3 d = x.inv_rot * dir;
  const Vec3& o = x.origin;
  if (std::abs(d.z) < 1e-12) return;
  double t = -o.z / d.z;
  if (t <= kRayNear || t >= best->t) return;
  double u = o.x + t * d.x, v = o.y + t * d.y;
  if (std::abs(u) > x.prim->half_size.x || std::abs(v) > x.prim->half_size.y) return;
  *best = {t, x.prim, 0, u, v};
}

Hit cast_ray(const std::vector<PrimXform>& xforms, Vec3 dir) {
  Hit best;
  for (const auto& x : xforms) {
    switch (x.prim->kind) {
      case PrimSpec::Kind::ground:
        intersect_axis_plane(x, dir, 1, &best);
        break;
      case PrimSpec::Kind::wall:
        intersect_axis_plane(x, dir, 2, &best);
        break;
      case PrimSpec::Kind::box:
        intersect_box(x, dir, &best);
        break;
      case PrimSpec::Kind::billboard:
        intersect_billboard(x, dir, &best);
        break;
    }
  }
  return best;
}

void render_frame(const SceneSpec& spec, const std::vector<PrimXform>& xforms,
                  ImageBuffer* image, DepthMap* depth, std::vector<int>* instance,
                  BinaryMask* ground) {
  const CameraIntrinsics& k = spec.camera;
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      Vec3 dir = k.unproject(u, v);
      Hit hit = cast_ray(xforms, dir);
      size_t i = depth->idx(u, v);
      if (!hit.prim) continue;  // leaves the pixel invalid (empty sky)
      // dir.z == 1, so the ray parameter equals camera z-depth.
      depth->values[i] = hit.t;
      depth->valid[i] = 1;
      Vec3 color = sample_texture(hit.prim->texture, hit.face, hit.u, hit.v);
      for (int c = 0; c < 3; ++c) image->values[i * 3 + c] = color[c];
      if (instance) (*instance)[i] = hit.prim->id;
      if (ground && hit.prim->kind == PrimSpec::Kind::ground) ground->mask[i] = 1;
    }
  }
}

}  // namespace

RenderedPair render_pair(const SceneSpec& spec) {
  spec.camera.validate();
  const CameraIntrinsics& k = spec.camera;
  int w = k.width, h = k.height;
  RenderedPair out;
  out.spec = spec;
  out.image_r = ImageBuffer(w, h);
  out.image_s = ImageBuffer(w, h);
  out.depth_r = DepthMap(w, h);
  out.depth_s = DepthMap(w, h);
  out.instance_r.assign(size_t(w) * h, 0);
  out.instance_s.assign(size_t(w) * h, 0);
  out.ground_r = BinaryMask(w, h);
  out.target_h = MotionField(w, h);
  out.target_in_front = BinaryMask(w, h);
  out.true_corr = Correspondence(w, h);

  std::vector<PrimXform> xf_r, xf_s;
  xf_r.reserve(spec.prims.size());
  xf_s.reserve(spec.prims.size());
  for (const auto& p : spec.prims) {
    xf_r.push_back(make_xform(p, /*moved=*/false, nullptr));
    xf_s.push_back(make_xform(p, /*moved=*/true, &spec.cam_r_to_s));
  }
  render_frame(spec, xf_r, &out.image_r, &out.depth_r, &out.instance_r, &out.ground_r);
  render_frame(spec, xf_s, &out.image_s, &out.depth_s, &out.instance_s, nullptr);

  // Exact target projections of frame-r pixels, including true object motion.
  Mat3 rc = spec.cam_r_to_s.rotation_matrix();
  Vec3 tc = spec.cam_r_to_s.translation;
  std::vector<Mat3> rm(spec.prims.size(), Mat3::identity());
  std::vector<Vec3> tm(spec.prims.size(), Vec3{});
  std::vector<const PrimSpec*> by_id(size_t(spec.object_count()) + 1, nullptr);
  std::vector<size_t> prim_index_by_id(size_t(spec.object_count()) + 1, 0);
  for (size_t pi = 0; pi < spec.prims.size(); ++pi) {
    const auto& p = spec.prims[pi];
    if (p.moving) {
      rm[pi] = p.motion.rotation_matrix();
      tm[pi] = p.motion.translation;
    }
    if (p.id > 0) {
      by_id[p.id] = &p;
      prim_index_by_id[p.id] = pi;
    }
  }
  // Map each pixel's object id back to its primitive for the motion lookup.
  std::vector<size_t> pixel_prim(size_t(w) * h, SIZE_MAX);
  {
    // Ground/wall pixels (id 0) use identity motion; find their prim indices
    // only to keep the loop uniform.
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        size_t i = size_t(v) * w + u;
        if (!out.depth_r.valid[i]) continue;
        int id = out.instance_r[i];
        if (id > 0) pixel_prim[i] = prim_index_by_id[id];
      }
  }
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      size_t i = size_t(v) * w + u;
      if (!out.depth_r.valid[i]) continue;
      Vec3 p = k.unproject(u, v) * out.depth_r.values[i];
      Vec3 p_moved = p;
      if (pixel_prim[i] != SIZE_MAX && spec.prims[pixel_prim[i]].moving)
        p_moved = rm[pixel_prim[i]] * p + tm[pixel_prim[i]];
      Vec3 q = rc * p_moved + tc;
      Vec3 ht = k.project_h(q);
      out.target_h.set(u, v, ht);
      if (ht.z > 0.0) {
        out.target_in_front.mask[i] = 1;
        double tu = ht.x / ht.z, tv = ht.y / ht.z;
        out.true_corr.target_u[i] = tu;
        out.true_corr.target_v[i] = tv;
        out.true_corr.target_depth[i] = ht.z;
        out.true_corr.valid[i] =
            (tu >= 0.0 && tu < double(w) && tv >= 0.0 && tv < double(h)) ? 1 : 0;
      }
    }
  }

  // Occlusion: predicted target depth visibly behind the rendered frame-s
  // surface. Tolerance scales with the median scene depth.
  std::vector<double> depths;
  depths.reserve(size_t(w) * h);
  for (size_t i = 0; i < out.depth_r.pixel_count(); ++i)
    if (out.depth_r.valid[i]) depths.push_back(out.depth_r.values[i]);
  double med = 1.0;
  if (!depths.empty()) {
    std::nth_element(depths.begin(), depths.begin() + depths.size() / 2, depths.end());
    med = depths[depths.size() / 2];
  }
  out.occluded_r = occlusion_mask(out.true_corr, out.depth_s, 0.01 * med);

  int n = spec.object_count();
  for (int id = 1; id <= n; ++id) {
    if (!by_id[id]) continue;
    out.object_ids.push_back(id);
    out.object_moving.push_back(by_id[id]->moving ? 1 : 0);
    PoseSE3 motion = by_id[id]->moving ? by_id[id]->motion : PoseSE3{};
    out.object_pose.push_back(compose(spec.cam_r_to_s, motion));
  }
  return out;
}

std::vector<InstanceMask> instance_masks(const std::vector<int>& ids, int width,
                                         int height, int object_count) {
  std::vector<InstanceMask> masks;
  for (int id = 1; id <= object_count; ++id) {
    InstanceMask m(width, height);
    m.id = id;
    size_t n = 0;
    for (size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) {
        m.mask[i] = 1;
        ++n;
      }
    if (n > 0) masks.push_back(std::move(m));
  }
  return masks;
}

namespace {

struct PlacedBox {
  double u0, v0, u1, v1;
};

double bbox_overlap(const PlacedBox& a, const PlacedBox& b) {
  double iw = std::min(a.u1, b.u1) - std::max(a.u0, b.u0);
  double ih = std::min(a.v1, b.v1) - std::max(a.v0, b.v0);
  if (iw <= 0 || ih <= 0) return 0.0;
  double inter = iw * ih;
  double area = std::min((a.u1 - a.u0) * (a.v1 - a.v0), (b.u1 - b.u0) * (b.v1 - b.v0));
  return inter / area;
}

struct PresetParams {
  int default_count = 4;
  int n_static_lo = 4, n_static_hi = 5;
  // Moving objects per scene, cycled by scene index.
  std::vector<int> mover_pattern{0};
  double mover_area_lo = 0, mover_area_hi = 0;     // image-pixel area target
  double static_area_lo = 260, static_area_hi = 430;
};

PresetParams preset_params(const std::string& preset) {
  PresetParams p;
  if (preset == "static_only") {
    p.default_count = 4;
    p.n_static_lo = 4;
    p.n_static_hi = 6;
    p.mover_pattern = {0};
  } else if (preset == "kitti_like") {
    p.default_count = 8;
    p.n_static_lo = 3;
    p.n_static_hi = 4;
    p.mover_pattern = {1, 1, 1, 0, 1, 1, 1, 1};
    p.mover_area_lo = 90;
    p.mover_area_hi = 125;
  } else if (preset == "cityscapes_like") {
    p.default_count = 12;
    p.n_static_lo = 5;
    p.n_static_hi = 5;
    p.mover_pattern = {2, 2, 2, 3};
    p.mover_area_lo = 175;
    p.mover_area_hi = 245;
  } else if (preset == "stress") {
    p.default_count = 3;
    p.n_static_lo = 2;
    p.n_static_hi = 2;
    p.mover_pattern = {1};
    p.mover_area_lo = 2550;
    p.mover_area_hi = 2850;
  } else {
    throw ConfigError("unknown scene preset: " + preset);
  }
  return p;
}

constexpr uint64_t kSuiteSeed = 0x5cdeu;

}  // namespace

int suite_default_count(const std::string& preset) {
  return preset_params(preset).default_count;
}

SceneSpec make_scene(const std::string& preset, int index) {
  PresetParams pp = preset_params(preset);
  SceneSpec spec;
  spec.preset = preset;
  spec.index = index;
  spec.name = preset + "_" + std::to_string(index);
  spec.seed = hash_combine(fnv1a(preset), kSuiteSeed + uint64_t(index));
  Rng rng(spec.seed);

  spec.camera.width = 160;
  spec.camera.height = 96;
  spec.camera.fx = spec.camera.fy = 115.0;
  spec.camera.cx = 79.5;
  spec.camera.cy = 47.5;
  spec.ground_y = rng.uniform(0.95, 1.15);
  spec.wall_z = rng.uniform(9.0, 11.0);

  // Camera motion between the frames: mostly forward, slight drift and yaw.
  double deg = 3.14159265358979323846 / 180.0;
  Vec3 cam_t{rng.uniform(-0.04, 0.04), rng.uniform(-0.012, 0.012),
             rng.uniform(0.18, 0.30)};
  Vec3 cam_w{rng.uniform(-0.3, 0.3) * deg, rng.uniform(-1.2, 1.2) * deg,
             rng.uniform(-0.2, 0.2) * deg};
  Mat3 rc = axis_angle_to_matrix({-cam_w.x, -cam_w.y, -cam_w.z});
  Vec3 tneg = rc * cam_t;
  spec.cam_r_to_s.rotation = {-cam_w.x, -cam_w.y, -cam_w.z};
  spec.cam_r_to_s.translation = {-tneg.x, -tneg.y, -tneg.z};

  const double fx = spec.camera.fx, fy = spec.camera.fy;
  const double cx = spec.camera.cx, cy = spec.camera.cy;

  // Backdrop.
  PrimSpec ground;
  ground.kind = PrimSpec::Kind::ground;
  ground.position = {0.0, spec.ground_y, 0.0};
  ground.texture = {rng.next_u64(), {rng.uniform(0.35, 0.5), rng.uniform(0.35, 0.5),
                                     rng.uniform(0.3, 0.45)},
                    0.7};
  spec.prims.push_back(ground);
  PrimSpec wall;
  wall.kind = PrimSpec::Kind::wall;
  wall.position = {0.0, 0.0, spec.wall_z};
  wall.texture = {rng.next_u64(), {rng.uniform(0.4, 0.55), rng.uniform(0.4, 0.55),
                                   rng.uniform(0.45, 0.6)},
                  1.7};
  spec.prims.push_back(wall);

  int n_static = int(rng.uniform_int(pp.n_static_lo, pp.n_static_hi));
  int n_moving = pp.mover_pattern[size_t(index) % pp.mover_pattern.size()];

  std::vector<PlacedBox> placed;
  int next_id = 1;

  auto place_object = [&](bool moving, double area_lo, double area_hi) {
    for (int attempt = 0; attempt < 24; ++attempt) {
      double area = rng.uniform(area_lo, area_hi);
      double z = moving ? rng.uniform(3.4, 6.2) : rng.uniform(3.0, 6.8);
      double side_px = std::sqrt(area);
      double aspect = rng.uniform(0.8, 1.3);  // width / height on screen
      double wpx = side_px * std::sqrt(aspect);
      double hpx = side_px / std::sqrt(aspect);
      double wx = wpx * z / fx;   // world extents
      double wy = hpx * z / fy;
      double u_center = rng.uniform(22.0, 138.0);
      double x = (u_center - cx) * z / fx;
      double y_center = spec.ground_y - wy * 0.5;  // resting on the ground
      // Keep the on-screen box inside the frame with margin, and keep the
      // ground contact row visible so a ground patch exists below the object.
      double v_contact = cy + fy * spec.ground_y / z;
      double v_top = cy + fy * (y_center - wy * 0.5) / z;
      if (v_contact > spec.camera.height - 5.0 || v_top < 4.0) continue;
      PlacedBox bb{u_center - wpx * 0.55, v_top - 2.0, u_center + wpx * 0.55,
                   v_contact + 2.0};
      if (bb.u0 < 3.0 || bb.u1 > spec.camera.width - 3.0) continue;
      bool collides = false;
      for (const auto& pb : placed)
        if (bbox_overlap(pb, bb) > 0.25) {
          collides = true;
          break;
        }
      if (collides) continue;

      PrimSpec obj;
      bool billboard = rng.uniform() < 0.4;
      obj.kind = billboard ? PrimSpec::Kind::billboard : PrimSpec::Kind::box;
      obj.id = next_id++;
      obj.position = {x, y_center, z};
      if (billboard) {
        obj.half_size = {wx * 0.5, wy * 0.5, 0.0};
        obj.rotation = {rng.uniform(-0.12, 0.12), rng.uniform(-0.35, 0.35), 0.0};
      } else {
        obj.half_size = {wx * 0.5, wy * 0.5, rng.uniform(0.35, 0.65) * wx};
        obj.rotation = {0.0, rng.uniform(-0.5, 0.5), 0.0};
      }
      // Moving objects carry a longer texture wavelength so the photometric
      // basin stays wider than their apparent image-space shift.
      double wl_factor = moving ? rng.uniform(0.75, 0.95) : rng.uniform(0.5, 0.7);
      obj.texture = {rng.next_u64(),
                     {rng.uniform(0.35, 0.65), rng.uniform(0.35, 0.65),
                      rng.uniform(0.35, 0.65)},
                     std::max(wx, wy) * wl_factor};
      obj.moving = moving;
      if (moving) {
        // Lateral world motion sized to a few pixels of apparent shift (kept
        // below half the texture wavelength), biased away from the nearer
        // image edge, plus slight depth drift and yaw.
        double shift_px = std::clamp(side_px * 0.38, 3.2, 5.5);
        double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        double u_next = u_center + sign * shift_px;
        if (u_next < 18.0 || u_next > spec.camera.width - 18.0) sign = -sign;
        double txm = sign * shift_px * z / fx;
        double tzm = rng.uniform(-0.06, 0.10);
        double yaw = rng.uniform(-0.03, 0.03);
        Mat3 rm = axis_angle_to_matrix({0.0, yaw, 0.0});
        Vec3 c = obj.position;
        Vec3 rc_c = rm * c;
        obj.motion.rotation = {0.0, yaw, 0.0};
        obj.motion.translation = {c.x - rc_c.x + txm, c.y - rc_c.y,
                                  c.z - rc_c.z + tzm};
      }
      spec.prims.push_back(obj);
      placed.push_back(bb);
      return true;
    }
    return false;
  };

  for (int i = 0; i < n_moving; ++i)
    if (!place_object(true, pp.mover_area_lo, pp.mover_area_hi))
      throw DegenerateInputError("scene generation could not place a moving object: " +
                                 spec.name);
  for (int i = 0; i < n_static; ++i)
    place_object(false, pp.static_area_lo, pp.static_area_hi);

  return spec;
}

std::vector<SceneSpec> scene_suite(const std::string& preset, int count) {
  if (count <= 0) count = suite_default_count(preset);
  std::vector<SceneSpec> scenes;
  scenes.reserve(size_t(count));
  for (int i = 0; i < count; ++i) scenes.push_back(make_scene(preset, i));
  return scenes;
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json vec3_to_json(Vec3 v) { return ordered_json::array({v.x, v.y, v.z}); }
Vec3 vec3_from_json(const ordered_json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

const char* kind_name(PrimSpec::Kind k) {
  switch (k) {
    case PrimSpec::Kind::ground: return "ground";
    case PrimSpec::Kind::wall: return "wall";
    case PrimSpec::Kind::box: return "box";
    case PrimSpec::Kind::billboard: return "billboard";
  }
  return "box";
}

PrimSpec::Kind kind_from_name(const std::string& s) {
  if (s == "ground") return PrimSpec::Kind::ground;
  if (s == "wall") return PrimSpec::Kind::wall;
  if (s == "box") return PrimSpec::Kind::box;
  if (s == "billboard") return PrimSpec::Kind::billboard;
  throw ConfigError("unknown primitive kind: " + s);
}

}  // namespace

std::string scene_to_json(const SceneSpec& spec) {
  ordered_json j;
  j["spec_version"] = 1;
  j["name"] = spec.name;
  j["preset"] = spec.preset;
  j["index"] = spec.index;
  j["seed"] = spec.seed;
  j["camera"] = {{"fx", spec.camera.fx}, {"fy", spec.camera.fy},
                 {"cx", spec.camera.cx}, {"cy", spec.camera.cy},
                 {"width", spec.camera.width}, {"height", spec.camera.height}};
  j["cam_r_to_s"] = {{"rotation", vec3_to_json(spec.cam_r_to_s.rotation)},
                     {"translation", vec3_to_json(spec.cam_r_to_s.translation)}};
  j["ground_y"] = spec.ground_y;
  j["wall_z"] = spec.wall_z;
  j["prims"] = ordered_json::array();
  for (const auto& p : spec.prims) {
    ordered_json pj;
    pj["kind"] = kind_name(p.kind);
    pj["id"] = p.id;
    pj["position"] = vec3_to_json(p.position);
    pj["rotation"] = vec3_to_json(p.rotation);
    pj["half_size"] = vec3_to_json(p.half_size);
    pj["texture"] = {{"seed", p.texture.seed},
                     {"base_color", vec3_to_json(p.texture.base_color)},
                     {"wavelength", p.texture.wavelength}};
    pj["moving"] = p.moving;
    if (p.moving)
      pj["motion"] = {{"rotation", vec3_to_json(p.motion.rotation)},
                      {"translation", vec3_to_json(p.motion.translation)}};
    j["prims"].push_back(pj);
  }
  return j.dump(2) + "\n";
}

SceneSpec scene_from_json(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("scene json parse error: ") + e.what());
  }
  try {
    if (j.at("spec_version").get<int>() != 1)
      throw ConfigError("unsupported scene spec_version");
    SceneSpec spec;
    spec.name = j.at("name").get<std::string>();
    spec.preset = j.at("preset").get<std::string>();
    spec.index = j.at("index").get<int>();
    spec.seed = j.at("seed").get<uint64_t>();
    const auto& cj = j.at("camera");
    spec.camera.fx = cj.at("fx").get<double>();
    spec.camera.fy = cj.at("fy").get<double>();
    spec.camera.cx = cj.at("cx").get<double>();
    spec.camera.cy = cj.at("cy").get<double>();
    spec.camera.width = cj.at("width").get<int>();
    spec.camera.height = cj.at("height").get<int>();
    spec.cam_r_to_s.rotation = vec3_from_json(j.at("cam_r_to_s").at("rotation"));
    spec.cam_r_to_s.translation = vec3_from_json(j.at("cam_r_to_s").at("translation"));
    spec.ground_y = j.at("ground_y").get<double>();
    spec.wall_z = j.at("wall_z").get<double>();
    for (const auto& pj : j.at("prims")) {
      PrimSpec p;
      p.kind = kind_from_name(pj.at("kind").get<std::string>());
      p.id = pj.at("id").get<int>();
      p.position = vec3_from_json(pj.at("position"));
      p.rotation = vec3_from_json(pj.at("rotation"));
      p.half_size = vec3_from_json(pj.at("half_size"));
      p.texture.seed = pj.at("texture").at("seed").get<uint64_t>();
      p.texture.base_color = vec3_from_json(pj.at("texture").at("base_color"));
      p.texture.wavelength = pj.at("texture").at("wavelength").get<double>();
      p.moving = pj.at("moving").get<bool>();
      if (p.moving) {
        p.motion.rotation = vec3_from_json(pj.at("motion").at("rotation"));
        p.motion.translation = vec3_from_json(pj.at("motion").at("translation"));
      }
      spec.prims.push_back(p);
    }
    return spec;
  } catch (const ordered_json::exception& e) {
    throw ConfigError(std::string("scene json missing field: ") + e.what());
  }
}

AmbiguityReport demonstrate_scale_ambiguity(const RenderedPair& pair, double c) {
  if (!(c > 0.0)) throw InputError("demonstrate_scale_ambiguity: scale must be > 0");
  const SceneSpec& spec = pair.spec;
  const CameraIntrinsics& k = spec.camera;
  AmbiguityReport rep;
  rep.scale = c;
  rep.motion = MotionField(k.width, k.height);
  std::vector<uint8_t> moving_by_id(size_t(spec.object_count()) + 1, 0);
  for (size_t oi = 0; oi < pair.object_ids.size(); ++oi)
    moving_by_id[pair.object_ids[oi]] = pair.object_moving[oi];
  Mat3 r = spec.cam_r_to_s.rotation_matrix();
  Vec3 t = spec.cam_r_to_s.translation;
  double stat_sum = 0.0, dyn_sum = 0.0, stat_max = 0.0, max_res = 0.0;
  size_t ns = 0, nd = 0;
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      size_t i = size_t(v) * k.width + u;
      if (!pair.depth_r.valid[i] || !pair.target_in_front.mask[i]) continue;
      // Observed product d'x'~ comes from the exact render-time projection;
      // the rigid prediction below repeats its arithmetic path so the
      // difference is exactly zero wherever the rigid model explains the pixel.
      Vec3 obs = pair.target_h.at(u, v);
      Vec3 p = k.unproject(u, v) * (c * pair.depth_r.values[i]);
      Vec3 h = k.project_h(r * p + t);
      Vec3 tx = obs - h;
      rep.motion.set(u, v, tx);
      // Substitute back (Eq-3 style): the refined product must reproduce the
      // observation.
      Vec3 back = h + tx;
      double res = std::max({std::abs(back.x - obs.x), std::abs(back.y - obs.y),
                             std::abs(back.z - obs.z)});
      max_res = std::max(max_res, res);
      double mag = norm(tx);
      bool moving = moving_by_id[size_t(pair.instance_r[i])] != 0;
      if (moving) {
        dyn_sum += mag;
        ++nd;
      } else {
        stat_sum += mag;
        stat_max = std::max(stat_max, mag);
        ++ns;
      }
    }
  }
  rep.max_residual = max_res;
  rep.static_count = ns;
  rep.dynamic_count = nd;
  rep.static_mean_motion = ns ? stat_sum / double(ns) : 0.0;
  rep.dynamic_mean_motion = nd ? dyn_sum / double(nd) : 0.0;
  rep.static_max_motion = stat_max;
  return rep;
}

}  // namespace scd
