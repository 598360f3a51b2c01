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

#include "scdepth/config.hpp"

#include <set>

#include "json.hpp"

#include "scdepth/rng.hpp"

namespace scd {

namespace {

using nlohmann::json;

// Reject unknown keys so typos never silently fall back to defaults.
void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& known) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void load(const json& j, const char* key, T* out) {
  if (j.contains(key)) *out = j.at(key).get<T>();
}

void require_positive(double v, const std::string& name) {
  if (!(v > 0.0)) throw ConfigError("config: " + name + " must be positive");
}

void require_positive(int v, const std::string& name) {
  if (v <= 0) throw ConfigError("config: " + name + " must be positive");
}

}  // namespace

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: document must be an object");
  if (!j.contains("config_version"))
    throw ConfigError("config: missing config_version");
  if (j.at("config_version").get<int>() != kConfigVersion)
    throw ConfigError("config: unsupported config_version (expected " +
                      std::to_string(kConfigVersion) + ")");

  check_keys(j, "top level",
             {"config_version", "preset", "scene_count", "seed", "weights",
              "stage", "objects", "masks", "dsa", "distill", "jobs"});

  RunConfig c;
  load(j, "preset", &c.preset);
  load(j, "scene_count", &c.scene_count);
  load(j, "seed", &c.seed);
  load(j, "jobs", &c.jobs);

  if (j.contains("weights")) {
    const json& w = j.at("weights");
    check_keys(w, "weights",
               {"photometric", "smoothness", "sparsity", "distill", "ssim_mix",
                "lambda_g"});
    load(w, "photometric", &c.weights.photometric);
    load(w, "smoothness", &c.weights.smoothness);
    load(w, "sparsity", &c.weights.sparsity);
    load(w, "distill", &c.weights.distill);
    load(w, "ssim_mix", &c.weights.ssim_mix);
    load(w, "lambda_g", &c.weights.lambda_g);
  }
  if (j.contains("stage")) {
    const json& s = j.at("stage");
    check_keys(s, "stage",
               {"steps_phase_a", "steps_phase_b", "learning_rate", "d_min",
                "d_max"});
    load(s, "steps_phase_a", &c.stage.steps_phase_a);
    load(s, "steps_phase_b", &c.stage.steps_phase_b);
    load(s, "learning_rate", &c.stage.learning_rate);
    load(s, "d_min", &c.stage.d_min);
    load(s, "d_max", &c.stage.d_max);
  }
  if (j.contains("objects")) {
    const json& o = j.at("objects");
    check_keys(o, "objects",
               {"steps", "learning_rate", "min_object_pixels", "crop_padding",
                "gauge_interval"});
    load(o, "steps", &c.objects.steps);
    load(o, "learning_rate", &c.objects.learning_rate);
    load(o, "min_object_pixels", &c.objects.min_object_pixels);
    load(o, "crop_padding", &c.objects.crop_padding);
    load(o, "gauge_interval", &c.objects.gauge_interval);
  }
  if (j.contains("masks")) {
    const json& m = j.at("masks");
    check_keys(m, "masks", {"mode", "theta_n_deg", "h_tol_frac"});
    load(m, "mode", &c.masks.mode);
    load(m, "theta_n_deg", &c.masks.theta_n_deg);
    load(m, "h_tol_frac", &c.masks.h_tol_frac);
  }
  if (j.contains("dsa")) {
    const json& d = j.at("dsa");
    check_keys(d, "dsa",
               {"epochs", "learning_rate", "min_examples", "holdout_fraction",
                "ground_patch_dilation", "theta_m"});
    load(d, "epochs", &c.dsa.epochs);
    load(d, "learning_rate", &c.dsa.learning_rate);
    load(d, "min_examples", &c.dsa.min_examples);
    load(d, "holdout_fraction", &c.dsa.holdout_fraction);
    load(d, "ground_patch_dilation", &c.dsa.ground_patch_dilation);
    load(d, "theta_m", &c.dsa.theta_m);
  }
  if (j.contains("distill")) {
    const json& d = j.at("distill");
    check_keys(d, "distill",
               {"steps", "learning_rate", "alpha_support",
                "self_train_iterations"});
    load(d, "steps", &c.distill.steps);
    load(d, "learning_rate", &c.distill.learning_rate);
    load(d, "alpha_support", &c.distill.alpha_support);
    load(d, "self_train_iterations", &c.distill.self_train_iterations);
  }

  // Range validation.
  if (c.preset != "static_only" && c.preset != "kitti_like" &&
      c.preset != "cityscapes_like" && c.preset != "stress")
    throw ConfigError("config: unknown preset '" + c.preset + "'");
  require_positive(c.jobs, "jobs");
  require_positive(c.stage.steps_phase_a, "stage.steps_phase_a");
  require_positive(c.stage.steps_phase_b, "stage.steps_phase_b");
  require_positive(c.stage.learning_rate, "stage.learning_rate");
  require_positive(c.stage.d_min, "stage.d_min");
  if (!(c.stage.d_max > c.stage.d_min))
    throw ConfigError("config: stage.d_max must exceed stage.d_min");
  require_positive(c.objects.steps, "objects.steps");
  require_positive(c.objects.learning_rate, "objects.learning_rate");
  require_positive(c.objects.min_object_pixels, "objects.min_object_pixels");
  if (c.objects.crop_padding < 0)
    throw ConfigError("config: objects.crop_padding must be non-negative");
  require_positive(c.objects.gauge_interval, "objects.gauge_interval");
  if (c.masks.mode != "derived" && c.masks.mode != "oracle")
    throw ConfigError("config: masks.mode must be 'derived' or 'oracle'");
  if (!(c.masks.theta_n_deg > 0.0 && c.masks.theta_n_deg < 90.0))
    throw ConfigError("config: masks.theta_n_deg must be in (0, 90)");
  require_positive(c.masks.h_tol_frac, "masks.h_tol_frac");
  require_positive(c.dsa.epochs, "dsa.epochs");
  require_positive(c.dsa.learning_rate, "dsa.learning_rate");
  require_positive(c.dsa.min_examples, "dsa.min_examples");
  if (!(c.dsa.holdout_fraction > 0.0 && c.dsa.holdout_fraction < 1.0))
    throw ConfigError("config: dsa.holdout_fraction must be in (0, 1)");
  if (c.dsa.ground_patch_dilation < 0)
    throw ConfigError("config: dsa.ground_patch_dilation must be non-negative");
  require_positive(c.dsa.theta_m, "dsa.theta_m");
  require_positive(c.distill.steps, "distill.steps");
  require_positive(c.distill.learning_rate, "distill.learning_rate");
  if (c.distill.alpha_support != "all" && c.distill.alpha_support != "dynamic")
    throw ConfigError("config: distill.alpha_support must be 'all' or 'dynamic'");
  if (c.distill.self_train_iterations < 0)
    throw ConfigError("config: distill.self_train_iterations must be >= 0");
  if (c.weights.ssim_mix < 0.0 || c.weights.ssim_mix > 1.0)
    throw ConfigError("config: weights.ssim_mix must be in [0, 1]");
  return c;
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["config_version"] = kConfigVersion;
  j["preset"] = c.preset;
  j["scene_count"] = c.scene_count;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["weights"] = {{"photometric", c.weights.photometric},
                  {"smoothness", c.weights.smoothness},
                  {"sparsity", c.weights.sparsity},
                  {"distill", c.weights.distill},
                  {"ssim_mix", c.weights.ssim_mix},
                  {"lambda_g", c.weights.lambda_g}};
  j["stage"] = {{"steps_phase_a", c.stage.steps_phase_a},
                {"steps_phase_b", c.stage.steps_phase_b},
                {"learning_rate", c.stage.learning_rate},
                {"d_min", c.stage.d_min},
                {"d_max", c.stage.d_max}};
  j["objects"] = {{"steps", c.objects.steps},
                  {"learning_rate", c.objects.learning_rate},
                  {"min_object_pixels", c.objects.min_object_pixels},
                  {"crop_padding", c.objects.crop_padding},
                  {"gauge_interval", c.objects.gauge_interval}};
  j["masks"] = {{"mode", c.masks.mode},
                {"theta_n_deg", c.masks.theta_n_deg},
                {"h_tol_frac", c.masks.h_tol_frac}};
  j["dsa"] = {{"epochs", c.dsa.epochs},
              {"learning_rate", c.dsa.learning_rate},
              {"min_examples", c.dsa.min_examples},
              {"holdout_fraction", c.dsa.holdout_fraction},
              {"ground_patch_dilation", c.dsa.ground_patch_dilation},
              {"theta_m", c.dsa.theta_m}};
  j["distill"] = {{"steps", c.distill.steps},
                  {"learning_rate", c.distill.learning_rate},
                  {"alpha_support", c.distill.alpha_support},
                  {"self_train_iterations", c.distill.self_train_iterations}};
  return j.dump(2) + "\n";
}

uint64_t config_hash(const RunConfig& cfg) {
  return fnv1a(config_to_json(cfg));
}

}  // namespace scd
