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

#include "scdepth/masks.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "json.hpp"

#include "scdepth/geometry.hpp"
#include "scdepth/io.hpp"
#include "scdepth/losses.hpp"

namespace scd {

namespace {

// Back-projected camera-space point of one pixel, or z=0 when depth invalid.
inline Vec3 backproject(const DepthMap& d, const CameraIntrinsics& k, int u,
                        int v) {
  size_t i = d.idx(u, v);
  if (!d.valid[i]) return {0.0, 0.0, 0.0};
  double z = d.values[i];
  return {(u - k.cx) / k.fx * z, (v - k.cy) / k.fy * z, z};
}

// Difference of back-projected points along one axis: central when both
// neighbors are valid, one-sided otherwise, zero when no valid pair exists.
bool point_diff(const DepthMap& d, const CameraIntrinsics& k, int u, int v,
                int du, int dv, Vec3* out) {
  int um = u - du, vm = v - dv, up = u + du, vp = v + dv;
  bool has_m = um >= 0 && vm >= 0 && um < d.width && vm < d.height &&
               d.is_valid(um, vm);
  bool has_p = up >= 0 && vp >= 0 && up < d.width && vp < d.height &&
               d.is_valid(up, vp);
  if (has_m && has_p) {
    *out = backproject(d, k, up, vp) - backproject(d, k, um, vm);
    return true;
  }
  if (has_p) {
    *out = backproject(d, k, up, vp) - backproject(d, k, u, v);
    return true;
  }
  if (has_m) {
    *out = backproject(d, k, u, v) - backproject(d, k, um, vm);
    return true;
  }
  return false;
}

}  // namespace

GroundMask ground_mask_from_depth(const DepthMap& depth,
                                  const CameraIntrinsics& k,
                                  double theta_n_deg, double h_tol_frac) {
  GroundMask out;
  out.source = "geometric";
  out.mask = BinaryMask(depth.width, depth.height);

  const double cos_gate = std::cos(theta_n_deg * 3.14159265358979323846 / 180.0);
  const size_t n = depth.pixel_count();

  // Vertical-normal gate plus the height of every gated pixel.
  std::vector<uint8_t> gated(n, 0);
  std::vector<double> height(n, 0.0);
  std::vector<double> depth_values;
  depth_values.reserve(n);
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      size_t i = depth.idx(u, v);
      if (!depth.valid[i]) continue;
      depth_values.push_back(depth.values[i]);
      Vec3 du, dv;
      if (!point_diff(depth, k, u, v, 1, 0, &du)) continue;
      if (!point_diff(depth, k, u, v, 0, 1, &dv)) continue;
      Vec3 normal = cross(du, dv);
      double len = std::sqrt(dot(normal, normal));
      if (len <= 0.0) continue;
      if (std::abs(normal.y) / len < cos_gate) continue;
      gated[i] = 1;
      height[i] = backproject(depth, k, u, v).y;
    }
  }

  // Robust ground height: median over gated pixels in the lower image third.
  std::vector<double> heights;
  for (int v = depth.height - depth.height / 3; v < depth.height; ++v)
    for (int u = 0; u < depth.width; ++u)
      if (gated[depth.idx(u, v)]) heights.push_back(height[depth.idx(u, v)]);
  if (heights.empty()) {
    out.warning = "ground mask: no pixel passed the vertical-normal gate in "
                  "the lower image third; returning an empty mask";
    return out;
  }
  double ground_height = median_of(std::move(heights));
  double h_tol = h_tol_frac * median_of(std::move(depth_values));

  for (size_t i = 0; i < n; ++i)
    if (gated[i] && std::abs(height[i] - ground_height) < h_tol)
      out.mask.mask[i] = 1;
  return out;
}

GroundMask ground_mask_oracle(const RenderedPair& pair) {
  GroundMask out;
  out.source = "oracle";
  out.mask = pair.ground_r;
  return out;
}

std::vector<InstanceMask> moving_masks_from_motion(const MotionField& delta,
                                                   const DepthMap& depth,
                                                   double theta_m,
                                                   int min_object_pixels) {
  if (delta.width != depth.width || delta.height != depth.height)
    throw InputError("moving_masks_from_motion: field size mismatch");
  const int w = depth.width, h = depth.height;
  const size_t n = size_t(w) * h;

  std::vector<double> depth_values;
  for (size_t i = 0; i < n; ++i)
    if (depth.valid[i]) depth_values.push_back(depth.values[i]);
  if (depth_values.empty()) return {};
  const double threshold = theta_m * median_of(std::move(depth_values));

  std::vector<uint8_t> hot(n, 0);
  for (size_t i = 0; i < n; ++i) {
    Vec3 d{delta.values[3 * i], delta.values[3 * i + 1],
           delta.values[3 * i + 2]};
    hot[i] = std::sqrt(dot(d, d)) > threshold ? 1 : 0;
  }

  // Row-major 4-connected flood fill; components come out ordered by their
  // first pixel, which makes the result deterministic.
  std::vector<InstanceMask> components;
  std::vector<int> stack;
  std::vector<uint8_t> seen(n, 0);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      size_t start = size_t(v) * w + u;
      if (!hot[start] || seen[start]) continue;
      InstanceMask m(w, h);
      stack.assign(1, int(start));
      seen[start] = 1;
      while (!stack.empty()) {
        int i = stack.back();
        stack.pop_back();
        m.mask[i] = 1;
        int iu = i % w, iv = i / w;
        const int nb[4][2] = {{iu - 1, iv}, {iu + 1, iv}, {iu, iv - 1},
                              {iu, iv + 1}};
        for (const auto& q : nb) {
          if (q[0] < 0 || q[0] >= w || q[1] < 0 || q[1] >= h) continue;
          int j = q[1] * w + q[0];
          if (hot[j] && !seen[j]) {
            seen[j] = 1;
            stack.push_back(j);
          }
        }
      }
      if (m.pixel_count() >= size_t(min_object_pixels))
        components.push_back(std::move(m));
    }
  }

  // Close 1-px holes, then restore pairwise disjointness (closing can spill
  // into a neighboring component's territory); earlier components win.
  BinaryMask taken(w, h);
  std::vector<InstanceMask> out;
  for (size_t c = 0; c < components.size(); ++c) {
    BinaryMask b(w, h);
    b.mask = components[c].mask;
    BinaryMask closed = morph_close(b, 1);
    InstanceMask m(w, h);
    m.id = int(out.size()) + 1;
    m.classification = MotionClass::moving_object;
    for (size_t i = 0; i < n; ++i)
      if (closed.mask[i] && !taken.mask[i]) {
        m.mask[i] = 1;
        taken.mask[i] = 1;
      }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<InstanceMask> oracle_masks(const RenderedPair& pair, bool moving,
                                       int min_object_pixels) {
  const CameraIntrinsics& k = pair.spec.camera;
  std::vector<InstanceMask> all = instance_masks(
      pair.instance_r, k.width, k.height, int(pair.object_ids.size()));
  std::vector<InstanceMask> out;
  for (size_t i = 0; i < pair.object_ids.size(); ++i) {
    bool is_moving = pair.object_moving[i] != 0;
    if (is_moving != moving) continue;
    InstanceMask& m = all[i];
    if (m.pixel_count() < size_t(min_object_pixels)) continue;
    m.id = pair.object_ids[i];
    m.classification =
        is_moving ? MotionClass::moving_object : MotionClass::static_object;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<uint8_t> mask_index_image(const std::vector<InstanceMask>& masks,
                                      int width, int height) {
  std::vector<uint8_t> img(size_t(width) * height, 0);
  if (masks.size() > 255)
    throw InputError("mask_index_image: more than 255 masks");
  for (size_t c = 0; c < masks.size(); ++c) {
    const InstanceMask& m = masks[c];
    if (m.width != width || m.height != height)
      throw InputError("mask_index_image: mask size mismatch");
    for (size_t i = 0; i < m.mask.size(); ++i)
      if (m.mask[i] && img[i] == 0) img[i] = uint8_t(c + 1);
  }
  return img;
}

namespace {

const char* class_name(MotionClass c) {
  switch (c) {
    case MotionClass::static_object: return "static";
    case MotionClass::moving_object: return "moving";
    default: return "unknown";
  }
}

MotionClass class_from_name(const std::string& s) {
  if (s == "static") return MotionClass::static_object;
  if (s == "moving") return MotionClass::moving_object;
  return MotionClass::unknown;
}

}  // namespace

void write_masks(const std::string& png_path, const std::string& json_path,
                 const std::vector<InstanceMask>& masks, int width,
                 int height) {
  write_png_indexed(png_path, width, height,
                    mask_index_image(masks, width, height));
  nlohmann::json legend = nlohmann::json::array();
  for (size_t c = 0; c < masks.size(); ++c) {
    legend.push_back({{"index", c + 1},
                      {"id", masks[c].id},
                      {"classification", class_name(masks[c].classification)},
                      {"pixels", masks[c].pixel_count()}});
  }
  nlohmann::json doc;
  doc["image"] = png_path.substr(png_path.find_last_of('/') + 1);
  doc["masks"] = legend;
  write_text_file(json_path, doc.dump(2) + "\n");
}

std::vector<InstanceMask> read_masks(const std::string& png_path,
                                     const std::string& json_path) {
  int w = 0, h = 0;
  std::vector<uint8_t> img = read_png_indexed(png_path, &w, &h);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(json_path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("mask legend: invalid JSON in " + json_path + ": " +
                  e.what());
  }
  std::vector<InstanceMask> out;
  for (const auto& entry : doc.at("masks")) {
    size_t index = entry.at("index").get<size_t>();
    InstanceMask m(w, h);
    m.id = entry.at("id").get<int>();
    m.classification =
        class_from_name(entry.at("classification").get<std::string>());
    for (size_t i = 0; i < img.size(); ++i)
      if (img[i] == index) m.mask[i] = 1;
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace scd
