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

#include "scdepth/losses.hpp"

#include <algorithm>
#include <cmath>

namespace scd {

double median_of(std::vector<double> values) {
  if (values.empty()) throw InputError("median of an empty set");
  std::sort(values.begin(), values.end());
  size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Per-window SSIM statistics and the partials needed for the backward pass.
struct WindowStats {
  double mu_x = 0, mu_y = 0;
  double ssim = 0;
  double d_mu_y = 0, d_var_y = 0, d_cov = 0;  // dSSIM/d{mu_y, var_y, cov}
};

}  // namespace

double photometric_loss(const ImageBuffer& ref, const ImageBuffer& recon,
                        const BinaryMask& valid, double ssim_mix,
                        std::vector<double>* grad_recon) {
  if (ref.width != recon.width || ref.height != recon.height ||
      ref.width != valid.width || ref.height != valid.height)
    throw InputError("photometric_loss: size mismatch");
  int w = ref.width, h = ref.height;
  size_t n_pix = size_t(w) * h;

  size_t n_valid = 0;
  for (size_t i = 0; i < n_pix; ++i) n_valid += (valid.mask[i] != 0);
  if (n_valid == 0) return 0.0;

  double l1_sum = 0.0;
  for (size_t i = 0; i < n_pix; ++i) {
    if (!valid.mask[i]) continue;
    for (int c = 0; c < 3; ++c)
      l1_sum += std::abs(recon.values[i * 3 + c] - ref.values[i * 3 + c]);
  }
  double l1 = l1_sum / (3.0 * double(n_valid));

  // SSIM over 3x3 windows centered at valid pixels; invalid taps excluded
  // and the uniform weights renormalized over the remaining ones.
  std::vector<WindowStats> stats;
  bool want_grad = grad_recon != nullptr;
  if (want_grad) stats.assign(n_pix * 3, WindowStats{});
  std::vector<double> inv_count(n_pix, 0.0);
  double ssim_sum = 0.0;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      size_t i = size_t(v) * w + u;
      if (!valid.mask[i]) continue;
      int u0 = std::max(0, u - 1), u1 = std::min(w - 1, u + 1);
      int v0 = std::max(0, v - 1), v1 = std::min(h - 1, v + 1);
      int cnt = 0;
      for (int vv = v0; vv <= v1; ++vv)
        for (int uu = u0; uu <= u1; ++uu)
          cnt += (valid.mask[size_t(vv) * w + uu] != 0);
      // The center is valid, so cnt >= 1.
      double wgt = 1.0 / double(cnt);
      inv_count[i] = wgt;
      for (int c = 0; c < 3; ++c) {
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for (int vv = v0; vv <= v1; ++vv)
          for (int uu = u0; uu <= u1; ++uu) {
            size_t j = size_t(vv) * w + uu;
            if (!valid.mask[j]) continue;
            double x = ref.values[j * 3 + c];
            double y = recon.values[j * 3 + c];
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
          }
        double mu_x = sx * wgt, mu_y = sy * wgt;
        double var_x = sxx * wgt - mu_x * mu_x;
        double var_y = syy * wgt - mu_y * mu_y;
        double cov = sxy * wgt - mu_x * mu_y;
        double a1 = 2.0 * mu_x * mu_y + kC1;
        double a2 = 2.0 * cov + kC2;
        double b1 = mu_x * mu_x + mu_y * mu_y + kC1;
        double b2 = var_x + var_y + kC2;
        double den = b1 * b2;
        double ssim = (a1 * a2) / den;
        ssim_sum += ssim;
        if (want_grad) {
          WindowStats& ws = stats[i * 3 + c];
          ws.mu_x = mu_x;
          ws.mu_y = mu_y;
          ws.ssim = ssim;
          ws.d_mu_y = (2.0 * mu_x * a2 - ssim * 2.0 * mu_y * b2) / den;
          ws.d_var_y = -ssim * b1 / den;
          ws.d_cov = 2.0 * a1 / den;
        }
      }
    }
  }
  double ssim_term = (1.0 - ssim_sum / (3.0 * double(n_valid))) / 2.0;
  double loss = ssim_mix * ssim_term + (1.0 - ssim_mix) * l1;

  if (want_grad) {
    double l1_coeff = (1.0 - ssim_mix) / (3.0 * double(n_valid));
    double ssim_coeff = -ssim_mix / (2.0 * 3.0 * double(n_valid));
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        size_t j = size_t(v) * w + u;
        if (!valid.mask[j]) continue;  // masked pixels get exactly zero gradient
        for (int c = 0; c < 3; ++c) {
          double y = recon.values[j * 3 + c];
          double x = ref.values[j * 3 + c];
          double g = l1_coeff * sgn(y - x);
          // Windows centered at the 3x3 neighborhood that include pixel j.
          int u0 = std::max(0, u - 1), u1 = std::min(w - 1, u + 1);
          int v0 = std::max(0, v - 1), v1 = std::min(h - 1, v + 1);
          for (int vv = v0; vv <= v1; ++vv)
            for (int uu = u0; uu <= u1; ++uu) {
              size_t i = size_t(vv) * w + uu;
              if (!valid.mask[i]) continue;
              const WindowStats& ws = stats[i * 3 + c];
              double wgt = inv_count[i];
              double d = ws.d_mu_y * wgt + ws.d_var_y * 2.0 * wgt * (y - ws.mu_y) +
                         ws.d_cov * wgt * (x - ws.mu_x);
              g += ssim_coeff * d;
            }
          (*grad_recon)[j * 3 + c] += g;
        }
      }
    }
  }
  return loss;
}

double smoothness_loss(const DepthMap& depth, const ImageBuffer& ref,
                       std::vector<double>* grad_depth) {
  if (depth.width != ref.width || depth.height != ref.height)
    throw InputError("smoothness_loss: size mismatch");
  int w = depth.width, h = depth.height;
  size_t n_pix = size_t(w) * h;

  size_t n_valid = 0;
  double inv_sum = 0.0;
  for (size_t i = 0; i < n_pix; ++i) {
    if (!depth.valid[i]) continue;
    if (!(depth.values[i] > 0.0))
      throw InputError("smoothness_loss: non-positive valid depth");
    inv_sum += 1.0 / depth.values[i];
    ++n_valid;
  }
  if (n_valid == 0) return 0.0;
  double m = inv_sum / double(n_valid);

  // s_i = (1/d_i) / m; pairs of horizontally/vertically adjacent valid pixels.
  auto s_of = [&](size_t i) { return (1.0 / depth.values[i]) / m; };
  double pair_sum = 0.0;
  size_t n_pairs = 0;
  std::vector<double> ds;  // dL/ds per pixel (unscaled by 1/n_pairs yet)
  if (grad_depth) ds.assign(n_pix, 0.0);
  auto edge_weight = [&](size_t a, size_t b) {
    double di = 0.0;
    for (int c = 0; c < 3; ++c)
      di += std::abs(ref.values[a * 3 + c] - ref.values[b * 3 + c]);
    return std::exp(-di / 3.0);
  };
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      size_t i = size_t(v) * w + u;
      if (!depth.valid[i]) continue;
      if (u + 1 < w) {
        size_t j = i + 1;
        if (depth.valid[j]) {
          double wgt = edge_weight(i, j);
          double diff = s_of(j) - s_of(i);
          pair_sum += std::abs(diff) * wgt;
          ++n_pairs;
          if (grad_depth) {
            double g = sgn(diff) * wgt;
            ds[j] += g;
            ds[i] -= g;
          }
        }
      }
      if (v + 1 < h) {
        size_t j = i + w;
        if (depth.valid[j]) {
          double wgt = edge_weight(i, j);
          double diff = s_of(j) - s_of(i);
          pair_sum += std::abs(diff) * wgt;
          ++n_pairs;
          if (grad_depth) {
            double g = sgn(diff) * wgt;
            ds[j] += g;
            ds[i] -= g;
          }
        }
      }
    }
  }
  if (n_pairs == 0) return 0.0;
  double loss = pair_sum / double(n_pairs);

  if (grad_depth) {
    // dL/dr_i with r = 1/d: through s_i = r_i/m and through m itself.
    double inv_np = 1.0 / double(n_pairs);
    double cross = 0.0;  // sum_j dL/ds_j * s_j
    for (size_t i = 0; i < n_pix; ++i)
      if (depth.valid[i]) cross += ds[i] * inv_np * s_of(i);
    for (size_t i = 0; i < n_pix; ++i) {
      if (!depth.valid[i]) continue;
      double dl_ds = ds[i] * inv_np;
      double dl_dr = (dl_ds - cross / double(n_valid)) / m;
      double d = depth.values[i];
      (*grad_depth)[i] += dl_dr * (-1.0 / (d * d));
    }
  }
  return loss;
}

double motion_sparsity_loss(const MotionField& motion, double lambda_g,
                            std::vector<double>* grad_motion) {
  size_t n_pix = size_t(motion.width) * motion.height;
  if (n_pix == 0) return 0.0;
  double mbar[3] = {0, 0, 0};
  for (size_t i = 0; i < n_pix; ++i)
    for (int c = 0; c < 3; ++c) mbar[c] += std::abs(motion.values[i * 3 + c]);
  for (double& m : mbar) m /= double(n_pix);

  double sum = 0.0;
  for (size_t i = 0; i < n_pix; ++i) {
    for (int c = 0; c < 3; ++c) {
      double a = std::abs(motion.values[i * 3 + c]);
      double den = mbar[c] + a;
      if (den > 0.0) sum += 2.0 * mbar[c] * a / den;  // 0/0 counts as 0
    }
  }
  double norm = 1.0 / (3.0 * double(n_pix));
  double loss = lambda_g * sum * norm;

  if (grad_motion) {
    for (size_t i = 0; i < n_pix; ++i) {
      for (int c = 0; c < 3; ++c) {
        double x = motion.values[i * 3 + c];
        double den = mbar[c] + std::abs(x);
        if (den <= 0.0) continue;
        double g = lambda_g * norm * 2.0 * mbar[c] * mbar[c] / (den * den) * sgn(x);
        (*grad_motion)[i * 3 + c] += g;
      }
    }
  }
  return loss;
}

DistillResult depth_distill_loss(const DepthMap& pred, const DepthMap& label,
                                 std::vector<double>* grad_pred,
                                 const BinaryMask* region,
                                 bool alpha_on_region) {
  if (pred.width != label.width || pred.height != label.height)
    throw InputError("depth_distill_loss: size mismatch");
  if (region && (region->width != pred.width || region->height != pred.height))
    throw InputError("depth_distill_loss: region size mismatch");
  DistillResult out;
  std::vector<double> ratios;
  size_t n_pix = pred.pixel_count();
  auto in_region = [&](size_t i) { return !region || region->mask[i] != 0; };
  for (size_t i = 0; i < n_pix; ++i) {
    if (!pred.valid[i] || !label.valid[i]) continue;
    if (alpha_on_region && !in_region(i)) continue;
    if (!(label.values[i] > 0.0))
      throw InputError("depth_distill_loss: non-positive label at pixel " +
                       std::to_string(i % size_t(pred.width)) + "," +
                       std::to_string(i / size_t(pred.width)));
    ratios.push_back(pred.values[i] / label.values[i]);
  }
  if (ratios.empty()) return out;
  out.alpha = median_of(ratios);

  size_t n_loss = 0;
  for (size_t i = 0; i < n_pix; ++i)
    n_loss += (pred.valid[i] && label.valid[i] && in_region(i));
  out.valid_count = n_loss;
  if (n_loss == 0) return out;

  double sum = 0.0;
  double inv_n = 1.0 / double(n_loss);
  for (size_t i = 0; i < n_pix; ++i) {
    if (!pred.valid[i] || !label.valid[i] || !in_region(i)) continue;
    double r = pred.values[i] - out.alpha * label.values[i];
    sum += std::abs(r);
    if (grad_pred) (*grad_pred)[i] += inv_n * sgn(r);
  }
  out.loss = sum * inv_n;
  return out;
}

}  // namespace scd
