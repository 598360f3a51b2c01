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

#include <cstdint>
#include <string>

#include "scdepth/losses.hpp"
#include "scdepth/types.hpp"

namespace scd {

// Hyperparameters of one run, grouped per stage. Field defaults ARE the
// documented defaults; a config file may override any subset and the
// effective (fully expanded) config is dumped next to the run's outputs.
struct SceneStageConfig {
  int steps_phase_a = 3000;   // depth+pose only, motion frozen at zero
  int steps_phase_b = 3000;   // motion unfrozen
  double learning_rate = 2e-4;
  double d_min = 0.1;
  double d_max = 100.0;
};

struct ObjectStageConfig {
  int steps = 1500;
  double learning_rate = 2e-4;
  int min_object_pixels = 64;
  int crop_padding = 8;       // context pixels around the mask bounding box
  int gauge_interval = 100;   // re-center the depth-scale gauge every k steps
};

struct MaskConfig {
  std::string mode = "oracle";   // "derived" (geometry/motion) or "oracle"
  double theta_n_deg = 15.0;     // ground-normal cone half-angle
  double h_tol_frac = 0.05;      // ground-height tolerance, fraction of median depth
};

struct DsaConfig {
  int epochs = 2000;
  double learning_rate = 1e-3;
  int min_examples = 50;
  double holdout_fraction = 0.2;   // split by scene, never by object
  int ground_patch_dilation = 8;   // bbox dilation for the ground cue
  double theta_m = 0.01;           // moving threshold: mean |delta| vs median depth
};

struct DistillConfig {
  int steps = 2000;
  double learning_rate = 2e-4;
  std::string alpha_support = "all";  // "all" or "dynamic"
  int self_train_iterations = 2;
};

struct RunConfig {
  std::string preset = "cityscapes_like";
  int scene_count = 0;   // <= 0 selects the preset default
  uint64_t seed = 5;
  LossWeights weights;
  SceneStageConfig stage;
  ObjectStageConfig objects;
  MaskConfig masks;
  DsaConfig dsa;
  DistillConfig distill;
  int jobs = 1;
};

constexpr int kConfigVersion = 1;

// Parse and validate a config JSON document. Missing keys take defaults;
// unknown keys and out-of-range values raise ConfigError. The document must
// carry `config_version: 1`.
RunConfig config_from_json(const std::string& text);

// Fully expanded config as pretty JSON, including config_version.
std::string config_to_json(const RunConfig& cfg);

// Content hash of the effective config (stable across formatting).
uint64_t config_hash(const RunConfig& cfg);

}  // namespace scd
