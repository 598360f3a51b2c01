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
#include <vector>

#include "scdepth/losses.hpp"
#include "scdepth/rng.hpp"
#include "scdepth/types.hpp"

using scd::BinaryMask;
using scd::DepthMap;
using scd::ImageBuffer;
using scd::MotionField;

namespace {

ImageBuffer random_image(int w, int h, uint64_t seed) {
  scd::Rng rng(seed);
  ImageBuffer img(w, h);
  for (double& x : img.values) x = rng.uniform();
  return img;
}

BinaryMask full_mask(int w, int h) {
  BinaryMask m(w, h);
  for (auto& x : m.mask) x = 1;
  return m;
}

// Independent reimplementation of the photometric objective, written
// directly from its definition: per valid pixel, a 3x3 uniform window with
// invalid taps dropped and weights renormalized; SSIM with C1 = 0.01^2,
// C2 = 0.03^2 from biased weighted moments; blended with per-pixel L1.
double oracle_photometric(const ImageBuffer& ref, const ImageBuffer& recon,
                          const BinaryMask& valid, double mix) {
  int w = ref.width, h = ref.height;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double ssim_sum = 0.0, l1_sum = 0.0;
  size_t n_valid = 0;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      if (!valid.at(u, v)) continue;
      ++n_valid;
      for (int c = 0; c < 3; ++c) {
        l1_sum += std::abs(recon.at(u, v, c) - ref.at(u, v, c));
        std::vector<double> xs, ys;
        for (int dv = -1; dv <= 1; ++dv)
          for (int du = -1; du <= 1; ++du) {
            int uu = u + du, vv = v + dv;
            if (uu < 0 || uu >= w || vv < 0 || vv >= h) continue;
            if (!valid.at(uu, vv)) continue;
            xs.push_back(ref.at(uu, vv, c));
            ys.push_back(recon.at(uu, vv, c));
          }
        double n = double(xs.size());
        double mx = 0, my = 0;
        for (size_t i = 0; i < xs.size(); ++i) {
          mx += xs[i];
          my += ys[i];
        }
        mx /= n;
        my /= n;
        double vx = 0, vy = 0, cov = 0;
        for (size_t i = 0; i < xs.size(); ++i) {
          vx += (xs[i] - mx) * (xs[i] - mx);
          vy += (ys[i] - my) * (ys[i] - my);
          cov += (xs[i] - mx) * (ys[i] - my);
        }
        vx /= n;
        vy /= n;
        cov /= n;
        double ssim = ((2 * mx * my + c1) * (2 * cov + c2)) /
                      ((mx * mx + my * my + c1) * (vx + vy + c2));
        ssim_sum += ssim;
      }
    }
  if (n_valid == 0) return 0.0;
  double ssim_term = (1.0 - ssim_sum / (3.0 * double(n_valid))) / 2.0;
  double l1_term = l1_sum / (3.0 * double(n_valid));
  return mix * ssim_term + (1.0 - mix) * l1_term;
}

}  // namespace

TEST_CASE("median_of: odd, even, singleton, empty") {
  CHECK(scd::median_of({3.0, 1.0, 2.0}) == 2.0);
  CHECK(scd::median_of({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK(scd::median_of({5.0}) == 5.0);
  CHECK(scd::median_of({2.0, 2.0, 9.0, -1.0}) == 2.0);
  CHECK_THROWS_AS(scd::median_of({}), scd::InputError);
}

TEST_CASE("photometric_loss: a perfect reconstruction scores exactly zero") {
  ImageBuffer img = random_image(11, 7, 101);
  BinaryMask valid = full_mask(11, 7);
  std::vector<double> grad(size_t(11) * 7 * 3, 0.0);
  double loss = scd::photometric_loss(img, img, valid, 0.85, &grad);
  CHECK(loss == 0.0);
}

TEST_CASE("photometric_loss matches the independent oracle") {
  ImageBuffer ref = random_image(12, 9, 5);
  ImageBuffer recon = random_image(12, 9, 6);
  scd::Rng rng(7);
  BinaryMask valid(12, 9);
  for (auto& m : valid.mask) m = rng.uniform() < 0.8;
  for (double mix : {0.85, 0.0, 1.0, 0.4}) {
    double got = scd::photometric_loss(ref, recon, valid, mix);
    double want = oracle_photometric(ref, recon, valid, mix);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("photometric_loss with mix 0 is plain masked L1") {
  ImageBuffer ref = random_image(6, 4, 11);
  ImageBuffer recon = random_image(6, 4, 12);
  BinaryMask valid(6, 4);
  valid.mask[valid.idx(2, 1)] = 1;
  valid.mask[valid.idx(4, 3)] = 1;
  double want = 0.0;
  for (int c = 0; c < 3; ++c)
    want += std::abs(recon.at(2, 1, c) - ref.at(2, 1, c)) +
            std::abs(recon.at(4, 3, c) - ref.at(4, 3, c));
  want /= 3.0 * 2.0;
  CHECK(scd::photometric_loss(ref, recon, valid, 0.0) ==
        doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("photometric_loss: empty mask yields zero, size mismatch throws") {
  ImageBuffer ref = random_image(5, 5, 1);
  ImageBuffer recon = random_image(5, 5, 2);
  BinaryMask none(5, 5);
  CHECK(scd::photometric_loss(ref, recon, none, 0.85) == 0.0);
  ImageBuffer wrong = random_image(4, 5, 3);
  CHECK_THROWS_AS(scd::photometric_loss(ref, wrong, none, 0.85), scd::InputError);
}

TEST_CASE("photometric_loss gradient matches finite differences") {
  ImageBuffer ref = random_image(9, 7, 21);
  ImageBuffer recon = random_image(9, 7, 22);
  scd::Rng rng(23);
  BinaryMask valid(9, 7);
  for (auto& m : valid.mask) m = rng.uniform() < 0.85;
  std::vector<double> grad(recon.values.size(), 0.0);
  scd::photometric_loss(ref, recon, valid, 0.85, &grad);
  const double eps = 1e-6;
  scd::Rng pick(24);
  for (int probe = 0; probe < 40; ++probe) {
    size_t i = size_t(pick.uniform_int(0, int64_t(recon.values.size()) - 1));
    if (std::abs(recon.values[i] - ref.values[i]) < 10 * eps) continue;  // L1 kink
    ImageBuffer hi = recon, lo = recon;
    hi.values[i] += eps;
    lo.values[i] -= eps;
    double fd = (scd::photometric_loss(ref, hi, valid, 0.85) -
                 scd::photometric_loss(ref, lo, valid, 0.85)) /
                (2 * eps);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(2e-4));
  }
}

TEST_CASE("photometric_loss: masked pixels receive exactly zero gradient") {
  ImageBuffer ref = random_image(8, 8, 31);
  ImageBuffer recon = random_image(8, 8, 32);
  scd::Rng rng(33);
  BinaryMask valid(8, 8);
  for (auto& m : valid.mask) m = rng.uniform() < 0.6;
  std::vector<double> grad(recon.values.size(), 0.0);
  scd::photometric_loss(ref, recon, valid, 0.85, &grad);
  for (size_t i = 0; i < valid.mask.size(); ++i)
    if (!valid.mask[i])
      for (int c = 0; c < 3; ++c) CHECK(grad[i * 3 + c] == 0.0);
  // And masked values must not influence the loss at all.
  ImageBuffer recon2 = recon;
  for (size_t i = 0; i < valid.mask.size(); ++i)
    if (!valid.mask[i])
      for (int c = 0; c < 3; ++c) recon2.values[i * 3 + c] = rng.uniform() * 100.0;
  CHECK(scd::photometric_loss(ref, recon, valid, 0.85) ==
        scd::photometric_loss(ref, recon2, valid, 0.85));
}

TEST_CASE("smoothness_loss: constant depth is exactly zero") {
  ImageBuffer ref = random_image(10, 6, 41);
  DepthMap d(10, 6);
  for (size_t i = 0; i < d.pixel_count(); ++i) {
    d.values[i] = 7.3;
    d.valid[i] = 1;
  }
  CHECK(scd::smoothness_loss(d, ref) == 0.0);
}

TEST_CASE("smoothness_loss: hand-computed two-pixel case") {
  ImageBuffer ref(2, 1);
  ref.set(0, 0, 0, 0.2);
  ref.set(1, 0, 0, 0.5);  // channel-sum |dI| = 0.3, weight exp(-0.1)
  DepthMap d(2, 1);
  d.values = {2.0, 4.0};
  d.valid = {1, 1};
  // r = (0.5, 0.25), m = 0.375, s = (4/3, 2/3): |ds| = 2/3.
  double want = (2.0 / 3.0) * std::exp(-0.3 / 3.0);
  CHECK(scd::smoothness_loss(d, ref) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("smoothness_loss is invariant to global depth rescaling") {
  ImageBuffer ref = random_image(14, 10, 43);
  scd::Rng rng(44);
  DepthMap d(14, 10);
  for (size_t i = 0; i < d.pixel_count(); ++i) {
    d.valid[i] = rng.uniform() < 0.9;
    d.values[i] = d.valid[i] ? rng.uniform(0.5, 12.0) : 0.0;
  }
  double base = scd::smoothness_loss(d, ref);
  for (double k : {0.1, 3.0, 250.0}) {
    DepthMap scaled = d;
    for (size_t i = 0; i < scaled.pixel_count(); ++i) scaled.values[i] *= k;
    CHECK(scd::smoothness_loss(scaled, ref) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("smoothness_loss gradient matches finite differences through the mean") {
  ImageBuffer ref = random_image(7, 5, 51);
  scd::Rng rng(52);
  DepthMap d(7, 5);
  for (size_t i = 0; i < d.pixel_count(); ++i) {
    d.valid[i] = rng.uniform() < 0.9;
    d.values[i] = d.valid[i] ? rng.uniform(1.0, 6.0) : 0.0;
  }
  std::vector<double> grad(d.pixel_count(), 0.0);
  scd::smoothness_loss(d, ref, &grad);
  const double eps = 1e-7;
  for (size_t i = 0; i < d.pixel_count(); ++i) {
    if (!d.valid[i]) {
      CHECK(grad[i] == 0.0);
      continue;
    }
    DepthMap hi = d, lo = d;
    hi.values[i] += eps;
    lo.values[i] -= eps;
    double fd = (scd::smoothness_loss(hi, ref) - scd::smoothness_loss(lo, ref)) /
                (2 * eps);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("smoothness_loss rejects non-positive valid depth") {
  ImageBuffer ref = random_image(3, 3, 61);
  DepthMap d(3, 3);
  for (size_t i = 0; i < d.pixel_count(); ++i) {
    d.values[i] = 2.0;
    d.valid[i] = 1;
  }
  d.values[4] = 0.0;
  CHECK_THROWS_AS(scd::smoothness_loss(d, ref), scd::InputError);
  d.values[4] = -1.0;
  CHECK_THROWS_AS(scd::smoothness_loss(d, ref), scd::InputError);
}

TEST_CASE("motion_sparsity_loss: zero field scores exactly zero") {
  MotionField m(9, 9);
  std::vector<double> grad(m.values.size(), 0.0);
  CHECK(scd::motion_sparsity_loss(m, 1.0, &grad) == 0.0);
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("motion_sparsity_loss: hand-computed two-pixel case") {
  MotionField m(2, 1);
  m.set(0, 0, {1.0, 0.0, 0.0});
  m.set(1, 0, {3.0, 0.0, 0.0});
  // mbar_x = 2; terms 2*2*1/3 and 2*2*3/5; y and z contribute 0/0 -> 0.
  double want = (4.0 / 3.0 + 12.0 / 5.0) / 6.0;
  CHECK(scd::motion_sparsity_loss(m, 1.0) == doctest::Approx(want).epsilon(1e-14));
  CHECK(scd::motion_sparsity_loss(m, 2.5) == doctest::Approx(2.5 * want).epsilon(1e-14));
  std::vector<double> grad(m.values.size(), 0.0);
  scd::motion_sparsity_loss(m, 1.0, &grad);
  // Closed form with the per-component mean frozen: 2 mbar^2 / (mbar+|x|)^2 / 6.
  CHECK(grad[0] == doctest::Approx((2.0 * 4.0 / 9.0) / 6.0).epsilon(1e-13));
  CHECK(grad[3] == doctest::Approx((2.0 * 4.0 / 25.0) / 6.0).epsilon(1e-13));
  CHECK(grad[1] == 0.0);  // frozen mean of an all-zero component
  CHECK(grad[2] == 0.0);
}

TEST_CASE("motion_sparsity_loss penalizes diffuse fields more than concentrated ones") {
  // Same L1 mass, spread over many pixels vs. a few: the ratio-style penalty
  // must prefer the concentrated field.
  MotionField diffuse(10, 10), compact(10, 10);
  for (int v = 0; v < 10; ++v)
    for (int u = 0; u < 10; ++u) diffuse.set(u, v, {0.1, 0.0, 0.0});
  for (int u = 0; u < 2; ++u) compact.set(u, 0, {5.0, 0.0, 0.0});
  CHECK(scd::motion_sparsity_loss(compact, 1.0) < scd::motion_sparsity_loss(diffuse, 1.0));
}

TEST_CASE("depth_distill_loss: proportional prediction has zero loss at the fitted scale") {
  scd::Rng rng(71);
  DepthMap label(9, 6);
  for (size_t i = 0; i < label.pixel_count(); ++i) {
    label.valid[i] = rng.uniform() < 0.9;
    label.values[i] = label.valid[i] ? rng.uniform(0.5, 9.0) : 0.0;
  }
  DepthMap pred = label;
  for (double& x : pred.values) x *= 3.0;
  std::vector<double> grad(pred.pixel_count(), 0.0);
  auto res = scd::depth_distill_loss(pred, label, &grad);
  CHECK(res.alpha == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(res.loss == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(res.valid_count > 0);
}

TEST_CASE("depth_distill_loss: even-count ratios take the midpoint median") {
  DepthMap label(4, 1), pred(4, 1);
  label.values = {1.0, 1.0, 1.0, 1.0};
  label.valid = {1, 1, 1, 1};
  pred.values = {1.0, 2.0, 3.0, 4.0};
  pred.valid = {1, 1, 1, 1};
  auto res = scd::depth_distill_loss(pred, label);
  CHECK(res.alpha == 2.5);
  CHECK(res.valid_count == 4);
  // Loss: mean |pred - 2.5| = (1.5 + 0.5 + 0.5 + 1.5)/4.
  CHECK(res.loss == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("depth_distill_loss ignores non-shared pixels and rejects bad labels") {
  DepthMap label(4, 1), pred(4, 1);
  label.values = {2.0, 2.0, 0.0, 2.0};
  label.valid = {1, 1, 0, 0};
  pred.values = {4.0, 4.0, 4.0, 4.0};
  pred.valid = {1, 0, 1, 1};
  auto res = scd::depth_distill_loss(pred, label);
  CHECK(res.valid_count == 1);  // only the first pixel is shared-valid
  CHECK(res.alpha == 2.0);
  CHECK(res.loss == 0.0);
  // A label flagged valid but non-positive inside alpha's support is an error.
  DepthMap bad = label;
  bad.valid = {1, 1, 1, 0};  // exposes the zero at index 2
  CHECK_THROWS_AS(scd::depth_distill_loss(pred, bad), scd::InputError);
  // No usable pixel at all: a neutral zero result.
  DepthMap none(4, 1);
  auto empty = scd::depth_distill_loss(none, label);
  CHECK(empty.loss == 0.0);
  CHECK(empty.alpha == 1.0);
  CHECK(empty.valid_count == 0);
}

TEST_CASE("depth_distill_loss region mask bounds the mean while alpha sees all pixels") {
  DepthMap label(4, 1), pred(4, 1);
  label.values = {1.0, 1.0, 1.0, 1.0};
  label.valid = {1, 1, 1, 1};
  pred.values = {2.0, 2.0, 2.0, 5.0};
  pred.valid = {1, 1, 1, 1};
  BinaryMask region(4, 1);
  region.mask = {0, 0, 0, 1};
  std::vector<double> grad(4, 0.0);
  auto res = scd::depth_distill_loss(pred, label, &grad, &region);
  // alpha = median{2,2,2,5} = 2; loss = |5 - 2| / 1 over the single region pixel.
  CHECK(res.alpha == 2.0);
  CHECK(res.valid_count == 1);
  CHECK(res.loss == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(grad[0] == 0.0);
  CHECK(grad[1] == 0.0);
  CHECK(grad[2] == 0.0);
  CHECK(grad[3] == doctest::Approx(1.0).epsilon(1e-14));

  // alpha restricted to the region instead: median{5} = 5, zero residual there.
  auto res2 = scd::depth_distill_loss(pred, label, nullptr, &region, true);
  CHECK(res2.alpha == 5.0);
  CHECK(res2.loss == 0.0);

  // Empty region: zero by convention.
  BinaryMask none(4, 1);
  auto res3 = scd::depth_distill_loss(pred, label, nullptr, &none);
  CHECK(res3.loss == 0.0);
  CHECK(res3.valid_count == 0);
}

TEST_CASE("depth_distill_loss gradient is the signed residual divided by the count") {
  scd::Rng rng(81);
  DepthMap label(8, 5), pred(8, 5);
  for (size_t i = 0; i < label.pixel_count(); ++i) {
    label.valid[i] = pred.valid[i] = 1;
    label.values[i] = rng.uniform(1.0, 5.0);
    pred.values[i] = rng.uniform(1.0, 5.0);
  }
  std::vector<double> grad(pred.pixel_count(), 0.0);
  auto res = scd::depth_distill_loss(pred, label, &grad);
  for (size_t i = 0; i < pred.pixel_count(); ++i) {
    double r = pred.values[i] - res.alpha * label.values[i];
    double want = (r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0)) / double(res.valid_count);
    CHECK(grad[i] == doctest::Approx(want).epsilon(1e-14));
  }
}
