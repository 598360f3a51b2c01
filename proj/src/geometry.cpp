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

#include "scdepth/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace scd {

namespace {

Mat3 skew(Vec3 v) {
  Mat3 s;
  s(0, 0) = 0;    s(0, 1) = -v.z; s(0, 2) = v.y;
  s(1, 0) = v.z;  s(1, 1) = 0;    s(1, 2) = -v.x;
  s(2, 0) = -v.y; s(2, 1) = v.x;  s(2, 2) = 0;
  return s;
}

Mat3 mat_add(const Mat3& a, const Mat3& b) {
  Mat3 r;
  for (int i = 0; i < 9; ++i) r.m[i] = a.m[i] + b.m[i];
  return r;
}

Mat3 mat_scale(double s, const Mat3& a) {
  Mat3 r;
  for (int i = 0; i < 9; ++i) r.m[i] = s * a.m[i];
  return r;
}

bool inside_image(const CameraIntrinsics& k, double u, double v) {
  return u >= 0.0 && u < double(k.width) && v >= 0.0 && v < double(k.height);
}

}  // namespace

Mat3 axis_angle_to_matrix(Vec3 w) {
  double theta2 = dot(w, w);
  double theta = std::sqrt(theta2);
  Mat3 wx = skew(w);
  Mat3 wx2 = wx * wx;
  double a, b;  // R = I + a*[w]x + b*[w]x^2
  if (theta < 1e-8) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return mat_add(Mat3::identity(), mat_add(mat_scale(a, wx), mat_scale(b, wx2)));
}

Vec3 matrix_to_axis_angle(const Mat3& r) {
  // The antisymmetric part holds 2*sin(theta)*axis and the trace holds
  // cos(theta); atan2 of the pair stays accurate at every angle, whereas
  // acos on the trace alone loses half its digits near 0 and pi and that
  // error is then amplified by the 1/sin(theta) normalization.
  Vec3 axis{r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)};
  double sin_theta = 0.5 * std::sqrt(dot(axis, axis));
  double tr = r(0, 0) + r(1, 1) + r(2, 2);
  double cos_theta = std::clamp((tr - 1.0) * 0.5, -1.0, 1.0);
  double theta = std::atan2(sin_theta, cos_theta);
  if (theta < 1e-8) {
    // R ~ I + [w]x, so the skew part is ~2w.
    return 0.5 * axis;
  }
  if (cos_theta > 0.0 || sin_theta > 1e-4) {
    // Dividing by the norm-derived sine makes the magnitude exactly theta.
    return (theta / (2.0 * sin_theta)) * axis;
  }
  // Near pi: recover the axis from the symmetric part R ~ 2ww^T - I.
  double one_minus = 1.0 - cos_theta;
  Mat3 sym = mat_scale(0.5, mat_add(r, r.transposed()));
  Vec3 w2{(sym(0, 0) - cos_theta) / one_minus, (sym(1, 1) - cos_theta) / one_minus,
          (sym(2, 2) - cos_theta) / one_minus};
  Vec3 w{std::sqrt(std::max(0.0, w2.x)), std::sqrt(std::max(0.0, w2.y)),
         std::sqrt(std::max(0.0, w2.z))};
  int k = 0;
  if (w.y > w[k]) k = 1;
  if (w.z > w[k]) k = 2;
  if (k == 0) {
    w.y = std::copysign(w.y, sym(0, 1));
    w.z = std::copysign(w.z, sym(0, 2));
  } else if (k == 1) {
    w.x = std::copysign(w.x, sym(0, 1));
    w.z = std::copysign(w.z, sym(1, 2));
  } else {
    w.x = std::copysign(w.x, sym(0, 2));
    w.y = std::copysign(w.y, sym(1, 2));
  }
  if (dot(w, axis) < 0.0) w = -1.0 * w;
  return theta * w;
}

PoseSE3 compose(const PoseSE3& b, const PoseSE3& a) {
  Mat3 rb = b.rotation_matrix();
  Mat3 ra = a.rotation_matrix();
  Mat3 rc = rb * ra;
  Vec3 t = rb * a.translation + b.translation;
  return {matrix_to_axis_angle(rc), t};
}

Vec3 rotation_gradient(Vec3 w, const Mat3& r, const Mat3& dl_dr) {
  double theta2 = dot(w, w);
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    Vec3 ei{i == 0 ? 1.0 : 0.0, i == 1 ? 1.0 : 0.0, i == 2 ? 1.0 : 0.0};
    Mat3 dr;
    if (theta2 < 1e-16) {
      dr = skew(ei) * r;
    } else {
      // dR/dw_i = ( w_i [w]x + [ w x ((I - R) e_i) ]x ) / |w|^2 * R
      Vec3 col{ei.x - r(0, i), ei.y - r(1, i), ei.z - r(2, i)};  // (I - R) e_i
      Mat3 num = mat_add(mat_scale(w[i], skew(w)), skew(cross(w, col)));
      dr = mat_scale(1.0 / theta2, num) * r;
    }
    double s = 0.0;
    for (int j = 0; j < 9; ++j) s += dl_dr.m[j] * dr.m[j];
    g[i] = s;
  }
  return g;
}

ProjectedPoint project_rigid(const CameraIntrinsics& k, const PoseSE3& pose,
                             Vec2 x, double d) {
  if (!std::isfinite(x.x) || !std::isfinite(x.y) || !std::isfinite(d))
    throw InputError("project_rigid: non-finite input");
  if (!(d > 0.0)) throw InputError("project_rigid: non-positive depth");
  Vec3 p = k.unproject(x.x, x.y) * d;
  Vec3 q = pose.rotation_matrix() * p + pose.translation;
  Vec3 h = k.project_h(q);
  ProjectedPoint out;
  out.h = h;
  out.in_front = h.z > 0.0;
  if (out.in_front) {
    out.pixel = {h.x / h.z, h.y / h.z};
    out.depth = h.z;
  }
  return out;
}

Correspondence build_correspondence(const DepthMap& depth, const CameraIntrinsics& k,
                                    const PoseSE3& pose) {
  bool any = false;
  for (uint8_t v : depth.valid) any = any || v;
  if (!any) throw InputError("build_correspondence: empty depth valid mask");
  Correspondence corr(depth.width, depth.height);
  Mat3 r = pose.rotation_matrix();
  Vec3 t = pose.translation;
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      size_t i = corr.idx(u, v);
      if (!depth.valid[i]) continue;
      Vec3 p = k.unproject(u, v) * depth.values[i];
      Vec3 h = k.project_h(r * p + t);
      if (!(h.z > 0.0)) continue;
      // Coordinates are recorded for every in-front target so that later
      // refinement can reuse them; the valid flag additionally requires the
      // target to land inside the frame.
      double tu = h.x / h.z, tv = h.y / h.z;
      corr.target_u[i] = tu;
      corr.target_v[i] = tv;
      corr.target_depth[i] = h.z;
      corr.valid[i] = inside_image(k, tu, tv) ? 1 : 0;
    }
  }
  return corr;
}

Correspondence apply_pixel_motion(const Correspondence& tau, const MotionField& delta,
                                  const CameraIntrinsics& k) {
  if (delta.width != tau.width || delta.height != tau.height)
    throw InputError("apply_pixel_motion: delta/correspondence size mismatch");
  for (double v : delta.values)
    if (!std::isfinite(v)) throw InputError("apply_pixel_motion: non-finite delta");
  Correspondence out(tau.width, tau.height);
  for (int v = 0; v < tau.height; ++v) {
    for (int u = 0; u < tau.width; ++u) {
      size_t i = tau.idx(u, v);
      // Pixels without a recorded in-front target carry no product to refine.
      if (!(tau.target_depth[i] > 0.0)) continue;
      Vec3 dl = delta.at(u, v);
      if (dl.x == 0.0 && dl.y == 0.0 && dl.z == 0.0) {
        out.target_u[i] = tau.target_u[i];
        out.target_v[i] = tau.target_v[i];
        out.target_depth[i] = tau.target_depth[i];
        out.valid[i] = tau.valid[i];
        continue;
      }
      double d = tau.target_depth[i];
      Vec3 h{tau.target_u[i] * d + dl.x, tau.target_v[i] * d + dl.y, d + dl.z};
      if (!(h.z > 0.0)) continue;  // behind the camera: invalid, not an error
      double tu = h.x / h.z, tv = h.y / h.z;
      out.target_u[i] = tu;
      out.target_v[i] = tv;
      out.target_depth[i] = h.z;
      out.valid[i] = inside_image(k, tu, tv) ? 1 : 0;
    }
  }
  return out;
}

Vec3 solve_motion_residual(Vec2 x, double d, Vec2 x_target, double d_target,
                           double c, const CameraIntrinsics& k, const PoseSE3& pose) {
  if (!(c > 0.0) || !(d > 0.0) || !(d_target > 0.0))
    throw InputError("solve_motion_residual: scale and depths must be positive");
  Vec3 p = k.unproject(x.x, x.y) * (c * d);
  Vec3 q = pose.rotation_matrix() * p + pose.translation;
  Vec3 h = k.project_h(q);
  Vec3 obs{x_target.x * d_target, x_target.y * d_target, d_target};
  return obs - h;
}

ForwardWarpResult forward_warp(const Correspondence& corr, const ImageBuffer& image) {
  if (image.width != corr.width || image.height != corr.height)
    throw InputError("forward_warp: image/correspondence size mismatch");
  int w = image.width, h = image.height;
  ForwardWarpResult out;
  out.image = ImageBuffer(w, h);
  out.depth = DepthMap(w, h);
  out.covered = BinaryMask(w, h);
  out.holes = BinaryMask(w, h);
  std::vector<double> zbuf(size_t(w) * h, std::numeric_limits<double>::infinity());
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      size_t i = corr.idx(u, v);
      if (!corr.valid[i]) continue;
      int tu = int(std::lround(corr.target_u[i]));
      int tv = int(std::lround(corr.target_v[i]));
      if (tu < 0 || tu >= w || tv < 0 || tv >= h) continue;
      size_t j = size_t(tv) * w + tu;
      double d = corr.target_depth[i];
      if (d < zbuf[j]) {
        zbuf[j] = d;
        for (int ch = 0; ch < 3; ++ch)
          out.image.values[j * 3 + ch] = image.values[i * 3 + ch];
        out.depth.values[j] = d;
        out.depth.valid[j] = 1;
        out.covered.mask[j] = 1;
      }
    }
  }
  for (size_t j = 0; j < out.covered.mask.size(); ++j)
    out.holes.mask[j] = out.covered.mask[j] ? 0 : 1;
  return out;
}

BinaryMask forward_warp_mask(const Correspondence& corr, const BinaryMask& mask) {
  if (mask.width != corr.width || mask.height != corr.height)
    throw InputError("forward_warp_mask: size mismatch");
  int w = mask.width, h = mask.height;
  BinaryMask out(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      size_t i = corr.idx(u, v);
      if (!mask.mask[i] || !corr.valid[i]) continue;
      int tu = int(std::lround(corr.target_u[i]));
      int tv = int(std::lround(corr.target_v[i]));
      if (tu < 0 || tu >= w || tv < 0 || tv >= h) continue;
      out.mask[size_t(tv) * w + tu] = 1;
    }
  }
  return out;
}

namespace {

struct TapCell {
  int x1, y1;
  double du, dv;
  bool in_bounds;
};

TapCell bilinear_cell(int w, int h, double x, double y) {
  TapCell c{};
  c.in_bounds = (x >= 0.0 && x <= double(w - 1) && y >= 0.0 && y <= double(h - 1));
  if (!c.in_bounds) return c;
  c.x1 = std::min(int(std::floor(x)), w - 2);
  c.y1 = std::min(int(std::floor(y)), h - 2);
  c.du = x - c.x1;
  c.dv = y - c.y1;
  return c;
}

}  // namespace

BilinearSample sample_bilinear(const ImageBuffer& img, int channel, double x,
                               double y) {
  BilinearSample s;
  TapCell c = bilinear_cell(img.width, img.height, x, y);
  if (!c.in_bounds) return s;
  size_t i11 = img.idx(c.x1, c.y1) + channel;
  size_t i21 = img.idx(c.x1 + 1, c.y1) + channel;
  size_t i12 = img.idx(c.x1, c.y1 + 1) + channel;
  size_t i22 = img.idx(c.x1 + 1, c.y1 + 1) + channel;
  double r1 = img.values[i11] + c.du * (img.values[i21] - img.values[i11]);
  double r2 = img.values[i12] + c.du * (img.values[i22] - img.values[i12]);
  s.value = r1 + c.dv * (r2 - r1);
  s.valid = true;
  return s;
}

BilinearSample sample_bilinear_depth(const DepthMap& depth, double x, double y) {
  BilinearSample s;
  TapCell c = bilinear_cell(depth.width, depth.height, x, y);
  if (!c.in_bounds) return s;
  size_t i11 = depth.idx(c.x1, c.y1);
  size_t i21 = i11 + 1;
  size_t i12 = depth.idx(c.x1, c.y1 + 1);
  size_t i22 = i12 + 1;
  if (!depth.valid[i11] || !depth.valid[i21] || !depth.valid[i12] ||
      !depth.valid[i22])
    return s;
  double r1 = depth.values[i11] + c.du * (depth.values[i21] - depth.values[i11]);
  double r2 = depth.values[i12] + c.du * (depth.values[i22] - depth.values[i12]);
  s.value = r1 + c.dv * (r2 - r1);
  s.valid = true;
  return s;
}

BackwardWarpResult backward_warp(const Correspondence& corr, const ImageBuffer& source) {
  BackwardWarpResult out;
  out.image = ImageBuffer(corr.width, corr.height);
  out.valid = BinaryMask(corr.width, corr.height);
  for (int v = 0; v < corr.height; ++v) {
    for (int u = 0; u < corr.width; ++u) {
      size_t i = corr.idx(u, v);
      if (!corr.valid[i]) continue;
      bool ok = true;
      double vals[3];
      for (int ch = 0; ch < 3; ++ch) {
        BilinearSample s =
            sample_bilinear(source, ch, corr.target_u[i], corr.target_v[i]);
        if (!s.valid) {
          ok = false;
          break;
        }
        vals[ch] = s.value;
      }
      if (!ok) continue;
      for (int ch = 0; ch < 3; ++ch) out.image.values[i * 3 + ch] = vals[ch];
      out.valid.mask[i] = 1;
    }
  }
  return out;
}

BinaryMask occlusion_mask(const Correspondence& corr, const DepthMap& target_depth,
                          double tol) {
  BinaryMask occ(corr.width, corr.height);
  int w = target_depth.width, h = target_depth.height;
  for (int v = 0; v < corr.height; ++v) {
    for (int u = 0; u < corr.width; ++u) {
      size_t i = corr.idx(u, v);
      if (!corr.valid[i]) continue;
      TapCell c = bilinear_cell(w, h, corr.target_u[i], corr.target_v[i]);
      if (!c.in_bounds) continue;
      double taps[4];
      bool all_valid = true;
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
          size_t j = target_depth.idx(c.x1 + dx, c.y1 + dy);
          all_valid = all_valid && target_depth.valid[j];
          taps[dy * 2 + dx] = target_depth.values[j];
        }
      if (!all_valid) continue;
      double r1 = taps[0] + c.du * (taps[1] - taps[0]);
      double r2 = taps[2] + c.du * (taps[3] - taps[2]);
      double interp = r1 + c.dv * (r2 - r1);
      // The tap spread widens the tolerance across depth discontinuities,
      // where interpolated depth is meaningless; the trailing dilation
      // recovers the one-pixel band this suppresses.
      double spread = std::max({taps[0], taps[1], taps[2], taps[3]}) -
                      std::min({taps[0], taps[1], taps[2], taps[3]});
      if (corr.target_depth[i] > interp + tol + spread) occ.mask[i] = 1;
    }
  }
  return dilate(occ, 1);
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
  if (radius <= 0) return mask;
  BinaryMask out(mask.width, mask.height);
  for (int v = 0; v < mask.height; ++v) {
    for (int u = 0; u < mask.width; ++u) {
      if (!mask.mask[mask.idx(u, v)]) continue;
      int u0 = std::max(0, u - radius), u1 = std::min(mask.width - 1, u + radius);
      int v0 = std::max(0, v - radius), v1 = std::min(mask.height - 1, v + radius);
      for (int vv = v0; vv <= v1; ++vv)
        for (int uu = u0; uu <= u1; ++uu) out.mask[out.idx(uu, vv)] = 1;
    }
  }
  return out;
}

BinaryMask erode(const BinaryMask& mask, int radius) {
  if (radius <= 0) return mask;
  BinaryMask out(mask.width, mask.height);
  for (int v = 0; v < mask.height; ++v) {
    for (int u = 0; u < mask.width; ++u) {
      bool keep = true;
      // Off-image neighbors count as background, so the border erodes too.
      for (int vv = v - radius; keep && vv <= v + radius; ++vv)
        for (int uu = u - radius; uu <= u + radius; ++uu) {
          if (uu < 0 || uu >= mask.width || vv < 0 || vv >= mask.height ||
              !mask.mask[mask.idx(uu, vv)]) {
            keep = false;
            break;
          }
        }
      if (keep) out.mask[out.idx(u, v)] = 1;
    }
  }
  return out;
}

BinaryMask morph_close(const BinaryMask& mask, int radius) {
  if (radius <= 0) return mask;
  // Erosion after dilation would shave mask pixels that touch the image
  // border (off-image pixels read as background), so run the pair on a
  // zero-padded canvas where the dilation has room to spread first.
  BinaryMask big(mask.width + 2 * radius, mask.height + 2 * radius);
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u)
      big.mask[big.idx(u + radius, v + radius)] = mask.mask[mask.idx(u, v)];
  BinaryMask closed = erode(dilate(big, radius), radius);
  BinaryMask out(mask.width, mask.height);
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u)
      out.mask[out.idx(u, v)] = closed.mask[closed.idx(u + radius, v + radius)];
  return out;
}

}  // namespace scd
