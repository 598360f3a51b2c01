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

#include "scdepth/fit.hpp"

#include <algorithm>
#include <cmath>

#include "scdepth/geometry.hpp"

namespace scd {

WarpEvaluator::WarpEvaluator(const WarpProblem& problem) : p_(problem) {
  if (!p_.camera || !p_.ref || !p_.src || !p_.support || !p_.depth_valid)
    throw InputError("warp evaluator: incomplete problem");
  w_ = p_.camera->width;
  h_ = p_.camera->height;
  if (p_.ref->width != w_ || p_.ref->height != h_ || p_.src->width != w_ ||
      p_.src->height != h_ || p_.support->width != w_ || p_.support->height != h_)
    throw InputError("warp evaluator: image size mismatch");
  size_t n = size_t(w_) * h_;
  if (p_.depth_valid->size() != n)
    throw InputError("warp evaluator: depth validity size mismatch");
  if (p_.src_mask && (p_.src_mask->width != w_ || p_.src_mask->height != h_))
    throw InputError("warp evaluator: source mask size mismatch");
  if (p_.distill_region &&
      (p_.distill_region->width != w_ || p_.distill_region->height != h_))
    throw InputError("warp evaluator: distill region size mismatch");
  if (p_.smooth_ref && (p_.smooth_ref->width != w_ || p_.smooth_ref->height != h_))
    throw InputError("warp evaluator: smoothness edge image size mismatch");
  depth_.assign(n, 0.0);
  pcam_.assign(n, Vec3{});
  hvec_.assign(n, Vec3{});
  corr_ = Correspondence(w_, h_);
  recon_ = ImageBuffer(w_, h_);
  photo_valid_ = BinaryMask(w_, h_);
  depth_map_ = DepthMap(w_, h_);
  grad_recon_.assign(n * 3, 0.0);
  grad_depth_values_.assign(n, 0.0);
}

LossBreakdown WarpEvaluator::evaluate(const WarpParams& params, WarpGrads* grads) {
  size_t n = size_t(w_) * h_;
  if (params.log_depth.size() != n)
    throw InputError("warp evaluator: log_depth size mismatch");
  if (p_.use_motion && (params.motion.width != w_ || params.motion.height != h_))
    throw InputError("warp evaluator: motion size mismatch");

  const CameraIntrinsics& k = *p_.camera;
  const std::vector<uint8_t>& dv = *p_.depth_valid;
  Mat3 r = params.pose.rotation_matrix();
  Vec3 t = params.pose.translation;

  // ---- Forward: depth, projection, reconstruction.
  depth_map_.valid = dv;
  for (size_t i = 0; i < n; ++i) {
    double d = dv[i] ? std::exp(params.log_depth[i]) : 0.0;
    depth_[i] = d;
    depth_map_.values[i] = d;
  }
  std::fill(corr_.valid.begin(), corr_.valid.end(), uint8_t(0));
  std::fill(photo_valid_.mask.begin(), photo_valid_.mask.end(), uint8_t(0));
  std::fill(recon_.values.begin(), recon_.values.end(), 0.0);
  for (int v = 0; v < h_; ++v) {
    for (int u = 0; u < w_; ++u) {
      size_t i = size_t(v) * w_ + u;
      if (!dv[i]) continue;
      Vec3 p = k.unproject(u, v) * depth_[i];
      Vec3 h = k.project_h(r * p + t);
      if (p_.use_motion) h = h + params.motion.at(u, v);
      pcam_[i] = p;
      hvec_[i] = h;
      if (!(h.z > 1e-9)) continue;
      double x = h.x / h.z, y = h.y / h.z;
      corr_.target_u[i] = x;
      corr_.target_v[i] = y;
      corr_.target_depth[i] = h.z;
      corr_.valid[i] = 1;
      if (!p_.support->mask[i]) continue;
      if (x < 0.0 || x > double(w_ - 1) || y < 0.0 || y > double(h_ - 1)) continue;
      if (p_.src_mask) {
        int x1 = std::min(int(std::floor(x)), w_ - 2);
        int y1 = std::min(int(std::floor(y)), h_ - 2);
        if (!p_.src_mask->at(x1, y1) || !p_.src_mask->at(x1 + 1, y1) ||
            !p_.src_mask->at(x1, y1 + 1) || !p_.src_mask->at(x1 + 1, y1 + 1))
          continue;
      }
      for (int c = 0; c < 3; ++c) {
        BilinearSample s = sample_bilinear(*p_.src, c, x, y);
        recon_.values[i * 3 + c] = s.value;
      }
      photo_valid_.mask[i] = 1;
    }
  }

  LossBreakdown out;
  out.photo_valid = photo_valid_.count();
  bool want_grad = grads != nullptr;
  if (want_grad) {
    grads->log_depth.assign(n, 0.0);
    std::fill(grads->pose, grads->pose + 6, 0.0);
    if (p_.use_motion) {
      if (grads->motion.width != w_ || grads->motion.height != h_)
        grads->motion = MotionField(w_, h_);
      std::fill(grads->motion.values.begin(), grads->motion.values.end(), 0.0);
    }
    std::fill(grad_recon_.begin(), grad_recon_.end(), 0.0);
    std::fill(grad_depth_values_.begin(), grad_depth_values_.end(), 0.0);
  }

  // ---- Losses. Gradient buffers are filled unweighted, then scaled into the
  // parameter gradients with their outer weights.
  out.photometric = photometric_loss(*p_.ref, recon_, photo_valid_,
                                     p_.weights.ssim_mix,
                                     want_grad ? &grad_recon_ : nullptr);
  std::vector<double> tmp;
  if (want_grad) tmp.assign(n, 0.0);
  out.smoothness = smoothness_loss(depth_map_, p_.smooth_ref ? *p_.smooth_ref : *p_.ref,
                                   want_grad ? &tmp : nullptr);
  if (want_grad)
    for (size_t i = 0; i < n; ++i)
      grad_depth_values_[i] += p_.weights.smoothness * tmp[i];

  if (p_.use_motion) {
    std::vector<double> mtmp;
    if (want_grad) mtmp.assign(n * 3, 0.0);
    out.sparsity = motion_sparsity_loss(params.motion, p_.weights.lambda_g,
                                        want_grad ? &mtmp : nullptr);
    if (want_grad)
      for (size_t i = 0; i < n * 3; ++i)
        grads->motion.values[i] += p_.weights.sparsity * mtmp[i];
  }

  if (p_.distill_label) {
    if (want_grad) std::fill(tmp.begin(), tmp.end(), 0.0);
    DistillResult dr = depth_distill_loss(depth_map_, *p_.distill_label,
                                          want_grad ? &tmp : nullptr,
                                          p_.distill_region, p_.alpha_on_region);
    out.distill = dr.loss;
    out.distill_alpha = dr.alpha;
    if (want_grad)
      for (size_t i = 0; i < n; ++i)
        grad_depth_values_[i] += p_.weights.distill * tmp[i];
  }

  out.total = p_.weights.photometric * out.photometric +
              p_.weights.smoothness * out.smoothness +
              p_.weights.sparsity * out.sparsity +
              p_.weights.distill * out.distill;
  if (!std::isfinite(out.total))
    throw OptimizationFailure("non-finite objective value");
  if (!want_grad) return out;

  // ---- Backward through the warp chain.
  Mat3 dl_dr;
  std::fill(dl_dr.m.begin(), dl_dr.m.end(), 0.0);
  Vec3 dl_dt{};
  Mat3 rt = r.transposed();
  const double photo_w = p_.weights.photometric;

  for (int v = 0; v < h_; ++v) {
    for (int u = 0; u < w_; ++u) {
      size_t i = size_t(v) * w_ + u;
      if (!dv[i]) continue;
      if (photo_valid_.mask[i]) {
        double gx = 0.0, gy = 0.0;  // dL/d(target pixel coords)
        double x = corr_.target_u[i], y = corr_.target_v[i];
        int x1 = std::min(int(std::floor(x)), w_ - 2);
        int y1 = std::min(int(std::floor(y)), h_ - 2);
        double du = x - x1, dvv = y - y1;
        for (int c = 0; c < 3; ++c) {
          double g = photo_w * grad_recon_[i * 3 + c];
          if (g == 0.0) continue;
          double q11 = p_.src->at(x1, y1, c), q21 = p_.src->at(x1 + 1, y1, c);
          double q12 = p_.src->at(x1, y1 + 1, c), q22 = p_.src->at(x1 + 1, y1 + 1, c);
          double r1 = q11 + du * (q21 - q11);
          double r2 = q12 + du * (q22 - q12);
          gx += g * ((1.0 - dvv) * (q21 - q11) + dvv * (q22 - q12));
          gy += g * (r2 - r1);
        }
        if (gx != 0.0 || gy != 0.0) {
          const Vec3& hv = hvec_[i];
          double inv_z = 1.0 / hv.z;
          Vec3 dh{gx * inv_z, gy * inv_z,
                  -(gx * hv.x + gy * hv.y) * inv_z * inv_z};
          if (p_.use_motion) {
            size_t mi = i * 3;
            grads->motion.values[mi] += dh.x;
            grads->motion.values[mi + 1] += dh.y;
            grads->motion.values[mi + 2] += dh.z;
          }
          Vec3 dq{k.fx * dh.x, k.fy * dh.y, k.cx * dh.x + k.cy * dh.y + dh.z};
          dl_dt = dl_dt + dq;
          const Vec3& p = pcam_[i];
          dl_dr(0, 0) += dq.x * p.x; dl_dr(0, 1) += dq.x * p.y; dl_dr(0, 2) += dq.x * p.z;
          dl_dr(1, 0) += dq.y * p.x; dl_dr(1, 1) += dq.y * p.y; dl_dr(1, 2) += dq.y * p.z;
          dl_dr(2, 0) += dq.z * p.x; dl_dr(2, 1) += dq.z * p.y; dl_dr(2, 2) += dq.z * p.z;
          Vec3 dp = rt * dq;
          grad_depth_values_[i] += dot(k.unproject(u, v), dp);
        }
      }
      double gd = grad_depth_values_[i];
      if (gd != 0.0) grads->log_depth[i] = gd * depth_[i];
    }
  }

  Vec3 dl_dw = rotation_gradient(params.pose.rotation, r, dl_dr);
  grads->pose[0] = dl_dw.x;
  grads->pose[1] = dl_dw.y;
  grads->pose[2] = dl_dw.z;
  grads->pose[3] = dl_dt.x;
  grads->pose[4] = dl_dt.y;
  grads->pose[5] = dl_dt.z;
  return out;
}

}  // namespace scd
