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

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "scdepth/fit.hpp"
#include "scdepth/optim.hpp"
#include "scdepth/rng.hpp"
#include "scdepth/scene.hpp"

using scd::BinaryMask;
using scd::DepthMap;
using scd::LossBreakdown;
using scd::WarpEvaluator;
using scd::WarpGrads;
using scd::WarpParams;
using scd::WarpProblem;

namespace {

// A hand-built 16x12 scene: textured ground, back wall, one box. Small
// enough that dense finite differencing stays cheap.
scd::SceneSpec tiny_scene() {
  scd::SceneSpec s;
  s.name = "tiny";
  s.preset = "custom";
  s.seed = 7;
  s.camera.fx = 14.0;
  s.camera.fy = 14.0;
  s.camera.cx = 7.5;
  s.camera.cy = 5.5;
  s.camera.width = 16;
  s.camera.height = 12;
  s.cam_r_to_s.rotation = {0.002, -0.004, 0.001};
  s.cam_r_to_s.translation = {0.012, -0.004, -0.06};
  s.ground_y = 1.0;
  s.wall_z = 6.0;

  scd::PrimSpec ground;
  ground.kind = scd::PrimSpec::Kind::ground;
  ground.position = {0.0, s.ground_y, 0.0};
  ground.texture = {11, {0.45, 0.38, 0.30}, 0.7};
  s.prims.push_back(ground);

  scd::PrimSpec wall;
  wall.kind = scd::PrimSpec::Kind::wall;
  wall.position = {0.0, 0.0, s.wall_z};
  wall.texture = {12, {0.35, 0.42, 0.50}, 1.7};
  s.prims.push_back(wall);

  scd::PrimSpec box;
  box.kind = scd::PrimSpec::Kind::box;
  box.id = 1;
  box.position = {0.35, 0.62, 3.2};
  box.half_size = {0.38, 0.38, 0.22};
  box.texture = {13, {0.55, 0.35, 0.35}, 0.32};
  s.prims.push_back(box);
  return s;
}

struct Fixture {
  scd::RenderedPair pair;
  BinaryMask support;
  WarpProblem problem;
  WarpParams params;
  DepthMap label;

  explicit Fixture(bool use_motion, bool with_distill) : pair(scd::render_pair(tiny_scene())) {
    int w = pair.spec.camera.width, h = pair.spec.camera.height;
    support = BinaryMask(w, h);
    support.mask = pair.depth_r.valid;

    problem.camera = &pair.spec.camera;
    problem.ref = &pair.image_r;
    problem.src = &pair.image_s;
    problem.support = &support;
    problem.depth_valid = &pair.depth_r.valid;
    problem.use_motion = use_motion;
    problem.weights.photometric = 1.0;
    problem.weights.smoothness = 0.02;
    problem.weights.sparsity = 0.05;
    problem.weights.distill = 0.1;

    if (with_distill) {
      label = pair.depth_r;
      for (double& x : label.values) x *= 1.3;
      // Knock one pixel out so the shared-valid count is odd and the median
      // ratio is a single sample: the fitted scale is then locally constant
      // around every probe that is not the median itself.
      if (label.pixel_count() % 2 == 0) label.valid[label.idx(0, 0)] = 0;
      problem.distill_label = &label;
    }

    scd::Rng rng(505);
    params.log_depth.assign(size_t(w) * h, 0.0);
    for (size_t i = 0; i < params.log_depth.size(); ++i)
      if (pair.depth_r.valid[i])
        params.log_depth[i] = std::log(pair.depth_r.values[i]) + rng.uniform(-0.04, 0.04);
    params.pose = pair.spec.cam_r_to_s;
    params.pose.rotation.x += 0.003;
    params.pose.translation.z += 0.01;
    params.motion = scd::MotionField(w, h);
    if (use_motion)
      for (double& x : params.motion.values) x = rng.uniform(-0.02, 0.02);
  }
};

// Central finite difference at three step sizes; a probe only counts when
// the three estimates agree (the objective has absolute-value and bilinear
// kinks, and probes that straddle one are meaningless).
struct FdCheck {
  std::function<double(double)> eval_at;  // shifts one coordinate, returns loss
  double analytic = 0.0;

  enum class Result { pass, fail, skip };
  Result run() const {
    // Finest step last: it has the least truncation error and is the one
    // compared against; the coarser steps only guard against kinks.
    const double eps[3] = {1e-5, 3e-6, 1e-6};
    double fd[3];
    for (int i = 0; i < 3; ++i) fd[i] = (eval_at(eps[i]) - eval_at(-eps[i])) / (2 * eps[i]);
    double lo = std::min({fd[0], fd[1], fd[2]});
    double hi = std::max({fd[0], fd[1], fd[2]});
    double scale = std::max({std::abs(analytic), std::abs(fd[2]), 1e-8});
    if ((hi - lo) / scale > 5e-3) return Result::skip;
    double rel = std::abs(fd[2] - analytic) / scale;
    return rel < 1e-3 ? Result::pass : Result::fail;
  }
};

}  // namespace

TEST_CASE("evaluator: repeated evaluation is deterministic and grads are overwritten") {
  Fixture fx(true, true);
  WarpEvaluator ev(fx.problem);
  WarpGrads g1, g2;
  LossBreakdown a = ev.evaluate(fx.params, &g1);
  LossBreakdown b = ev.evaluate(fx.params, &g2);
  CHECK(a.total == b.total);
  CHECK(a.photometric == b.photometric);
  CHECK(a.smoothness == b.smoothness);
  CHECK(a.sparsity == b.sparsity);
  CHECK(a.distill == b.distill);
  CHECK(g1.log_depth == g2.log_depth);
  CHECK(g1.motion.values == g2.motion.values);
  for (int i = 0; i < 6; ++i) CHECK(g1.pose[i] == g2.pose[i]);
  // Evaluating without grads reports the same objective.
  CHECK(ev.evaluate(fx.params, nullptr).total == a.total);
  CHECK(a.photo_valid > 100);
}

TEST_CASE("evaluator: photometric-only weights reduce to the bare photometric term") {
  Fixture fx(false, false);
  fx.problem.weights.photometric = 1.0;
  fx.problem.weights.smoothness = 0.0;
  fx.problem.weights.sparsity = 0.0;
  fx.problem.weights.distill = 0.0;
  WarpEvaluator ev(fx.problem);
  LossBreakdown r = ev.evaluate(fx.params, nullptr);
  CHECK(r.total == r.photometric);
  double direct = scd::photometric_loss(*fx.problem.ref, ev.last_recon(),
                                        ev.last_valid(), fx.problem.weights.ssim_mix);
  CHECK(r.photometric == doctest::Approx(direct).epsilon(1e-15));
}

TEST_CASE("evaluator: perfect parameters on a static scene score near zero") {
  scd::SceneSpec spec = tiny_scene();
  scd::RenderedPair pair = scd::render_pair(spec);
  int w = spec.camera.width, h = spec.camera.height;
  BinaryMask support(w, h);
  // Photometric support: non-occluded pixels with valid depth.
  for (size_t i = 0; i < support.mask.size(); ++i)
    support.mask[i] = pair.depth_r.valid[i] && !pair.occluded_r.mask[i];
  WarpProblem prob;
  prob.camera = &spec.camera;
  prob.ref = &pair.image_r;
  prob.src = &pair.image_s;
  prob.support = &support;
  prob.depth_valid = &pair.depth_r.valid;
  prob.weights.photometric = 1.0;
  prob.weights.smoothness = 0.0;
  WarpParams params;
  params.log_depth.assign(size_t(w) * h, 0.0);
  for (size_t i = 0; i < params.log_depth.size(); ++i)
    if (pair.depth_r.valid[i]) params.log_depth[i] = std::log(pair.depth_r.values[i]);
  params.pose = spec.cam_r_to_s;
  WarpEvaluator ev(prob);
  LossBreakdown r = ev.evaluate(params, nullptr);
  // Residual photometric error comes only from resampling blur (the warp is
  // exact); it must be far below the error of a wrong alignment.
  CHECK(r.photometric < 0.02);
  WarpParams off = params;
  off.pose.translation.x += 0.15;
  CHECK(ev.evaluate(off, nullptr).photometric > 3.0 * r.photometric);
}

TEST_CASE("analytic gradients match finite differences: log-depth") {
  Fixture fx(true, true);
  WarpEvaluator ev(fx.problem);
  WarpGrads grads;
  ev.evaluate(fx.params, &grads);
  double alpha = ev.evaluate(fx.params, nullptr).distill_alpha;

  scd::Rng pick(606);
  int passed = 0, failed = 0, skipped = 0;
  for (int probe = 0; probe < 40; ++probe) {
    size_t i = size_t(pick.uniform_int(0, int64_t(fx.params.log_depth.size()) - 1));
    if (!(*fx.problem.depth_valid)[i]) continue;
    // Skip the distill median sample itself (its fitted scale moves with it).
    if (fx.problem.distill_label && fx.label.valid[i]) {
      double ratio = std::exp(fx.params.log_depth[i]) / fx.label.values[i];
      if (std::abs(ratio - alpha) < 1e-9) continue;
    }
    FdCheck check;
    check.analytic = grads.log_depth[i];
    check.eval_at = [&, i](double e) {
      WarpParams p = fx.params;
      p.log_depth[i] += e;
      return ev.evaluate(p, nullptr).total;
    };
    switch (check.run()) {
      case FdCheck::Result::pass: ++passed; break;
      case FdCheck::Result::fail: ++failed; break;
      case FdCheck::Result::skip: ++skipped; break;
    }
  }
  INFO("passed=", passed, " failed=", failed, " skipped=", skipped);
  CHECK(failed == 0);
  CHECK(passed >= 15);
}

TEST_CASE("analytic gradients match finite differences: pose") {
  Fixture fx(true, false);
  WarpEvaluator ev(fx.problem);
  WarpGrads grads;
  ev.evaluate(fx.params, &grads);
  int passed = 0, failed = 0, skipped = 0;
  for (int coord = 0; coord < 6; ++coord) {
    FdCheck check;
    check.analytic = grads.pose[coord];
    check.eval_at = [&, coord](double e) {
      WarpParams p = fx.params;
      if (coord < 3)
        p.pose.rotation[coord] += e;
      else
        p.pose.translation[coord - 3] += e;
      return ev.evaluate(p, nullptr).total;
    };
    switch (check.run()) {
      case FdCheck::Result::pass: ++passed; break;
      case FdCheck::Result::fail: ++failed; break;
      case FdCheck::Result::skip: ++skipped; break;
    }
  }
  INFO("passed=", passed, " failed=", failed, " skipped=", skipped);
  CHECK(failed == 0);
  CHECK(passed >= 4);
}

TEST_CASE("analytic gradients match finite differences: residual motion") {
  Fixture fx(true, false);
  // The sparsity term's per-component mean is treated as a constant by the
  // analytic gradient, so finite differences of the full objective cannot
  // see it; probe the warp chain alone. (The sparsity gradient itself is
  // checked against its closed form elsewhere.)
  fx.problem.weights.sparsity = 0.0;
  WarpEvaluator ev(fx.problem);
  WarpGrads grads;
  ev.evaluate(fx.params, &grads);
  scd::Rng pick(707);
  int passed = 0, failed = 0, skipped = 0;
  for (int probe = 0; probe < 40; ++probe) {
    size_t i = size_t(pick.uniform_int(0, int64_t(fx.params.motion.values.size()) - 1));
    FdCheck check;
    check.analytic = grads.motion.values[i];
    check.eval_at = [&, i](double e) {
      WarpParams p = fx.params;
      p.motion.values[i] += e;
      return ev.evaluate(p, nullptr).total;
    };
    switch (check.run()) {
      case FdCheck::Result::pass: ++passed; break;
      case FdCheck::Result::fail: ++failed; break;
      case FdCheck::Result::skip: ++skipped; break;
    }
  }
  INFO("passed=", passed, " failed=", failed, " skipped=", skipped);
  CHECK(failed == 0);
  CHECK(passed >= 20);
}

TEST_CASE("evaluator rejects malformed problems and inputs") {
  Fixture fx(false, false);
  WarpProblem bad = fx.problem;
  bad.ref = nullptr;
  CHECK_THROWS_AS(WarpEvaluator{bad}, scd::InputError);
  WarpEvaluator ev(fx.problem);
  WarpParams p = fx.params;
  p.log_depth.resize(7);
  CHECK_THROWS_AS(ev.evaluate(p, nullptr), scd::InputError);
}

TEST_CASE("schedule: rate halves at each third of the budget") {
  scd::LrSchedule sched{1e-3, 9};
  CHECK(sched.at(0) == 1e-3);
  CHECK(sched.at(2) == 1e-3);
  CHECK(sched.at(3) == doctest::Approx(5e-4));
  CHECK(sched.at(5) == doctest::Approx(5e-4));
  CHECK(sched.at(6) == doctest::Approx(2.5e-4));
  CHECK(sched.at(8) == doctest::Approx(2.5e-4));
  // Steps past the budget stay at the final rate.
  CHECK(sched.at(100) == doctest::Approx(2.5e-4));
}

TEST_CASE("adam: first step follows the bias-corrected update exactly") {
  std::vector<double> params = {1.0, -2.0};
  std::vector<double> grads = {0.3, -0.7};
  scd::Adam opt(2);
  opt.step(&params, grads, 0.01);
  for (int i = 0; i < 2; ++i) {
    double expect = (i == 0 ? 1.0 : -2.0) -
                    0.01 * grads[i] / (std::abs(grads[i]) + 1e-8);
    CHECK(params[i] == doctest::Approx(expect).epsilon(1e-9));
  }
  std::vector<double> wrong_size = {1.0};
  CHECK_THROWS_AS(opt.step(&params, wrong_size, 0.01), scd::InputError);
}

TEST_CASE("adam minimizes a simple quadratic") {
  std::vector<double> x = {-4.0};
  scd::Adam opt(1);
  for (int i = 0; i < 400; ++i) {
    std::vector<double> g = {2.0 * (x[0] - 3.0)};
    opt.step(&x, g, 0.05);
  }
  CHECK(std::abs(x[0] - 3.0) < 0.05);
}
