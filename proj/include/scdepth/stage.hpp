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

#include "scdepth/config.hpp"
#include "scdepth/fit.hpp"
#include "scdepth/optim.hpp"
#include "scdepth/scene.hpp"

namespace scd {

// One optimizer step of a warp objective, for traces and post-mortems.
struct StageRecord {
  double total = 0.0;
  double photometric = 0.0;
  double smoothness = 0.0;
  double sparsity = 0.0;
  double distill = 0.0;
};

// Directly optimized per-scene parameters: a log-depth field, the camera
// pose, and a per-pixel residual motion field, plus the optimization trace.
struct SceneStageState {
  int width = 0, height = 0;
  std::vector<double> log_depth;      // H*W; meaningful where depth_valid
  std::vector<uint8_t> depth_valid;
  PoseSE3 pose;                       // camera r -> s
  MotionField motion;
  int step = 0;                       // optimizer steps taken so far
  uint64_t seed = 0;
  double learning_rate = 0.0;
  std::vector<StageRecord> trace;

  DepthMap depth() const;
};

// Settings for one descent phase over (log_depth, pose[, motion]).
struct DescentSpec {
  int steps = 0;
  double learning_rate = 2e-4;        // halved at each third of `steps`
  bool freeze_motion = false;         // zero the motion gradient each step
  double d_min = 0.1, d_max = 100.0;  // log-space depth clamp after each step
  int gauge_interval = 0;             // >0: re-center the depth-scale gauge
  double divergence_factor = 10.0;    // loss above factor*initial counts as
  int divergence_patience = 50;       // diverged after this many such steps
};

// Adam-driven descent shared by the scene stage, object stage, and
// distillation. `adam` must cover the flattened vector
// [log_depth | pose(6) | motion(3*H*W) if the problem uses motion].
// Appends one StageRecord per step to `trace`; throws OptimizationFailure
// (carrying the total-loss trace) on divergence.
void descend_warp(WarpEvaluator& eval, const WarpProblem& prob,
                  WarpParams* params, Adam* adam, const DescentSpec& spec,
                  std::vector<StageRecord>* trace);

// Stage 1: two phases — depth+pose with motion frozen at zero, then all
// three parameter groups jointly. Deterministic for a fixed config.
SceneStageState run_scene_stage(const RenderedPair& pair, const RunConfig& cfg);

// Median of gt/pred over static-mask pixels valid in both maps.
// Throws DegenerateInputError when the intersection is empty.
double static_region_scale(const DepthMap& pred, const DepthMap& gt,
                           const BinaryMask& static_mask);

// The refined correspondence implied by a fitted state: rigid reprojection
// of the state's depth through its pose, plus the per-pixel motion residual.
Correspondence refined_correspondence(const SceneStageState& st,
                                      const CameraIntrinsics& k);

// Checkpoints: versioned binary parameter blob (state.bin) + JSON sidecar
// (state.json) + loss trace CSV (trace.csv), all inside `dir`.
void save_stage_state(const SceneStageState& st, const std::string& dir);
SceneStageState load_stage_state(const std::string& dir);

// Content hash of the parameter blob (trace excluded); equal hashes mean
// bit-identical parameters.
uint64_t stage_state_hash(const SceneStageState& st);

}  // namespace scd
