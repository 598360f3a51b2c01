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

#include "scdepth/label.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "json.hpp"

#include "scdepth/fit.hpp"
#include "scdepth/io.hpp"
#include "scdepth/rng.hpp"

namespace scd {

namespace {

// Formats up to `cap` offending pixel coordinates for an error message.
std::string pixel_list(const std::vector<std::pair<int, int>>& px, size_t cap) {
  std::ostringstream os;
  for (size_t i = 0; i < px.size() && i < cap; ++i) {
    if (i) os << ", ";
    os << "(" << px[i].first << "," << px[i].second << ")";
  }
  if (px.size() > cap) os << " and " << (px.size() - cap) << " more";
  return os.str();
}

}  // namespace

PseudoLabel compose_label(const DepthMap& scene_depth,
                          const DynamicComposite& dyn,
                          const std::string& provenance) {
  int w = scene_depth.width, h = scene_depth.height;
  if (dyn.depth.width != w || dyn.depth.height != h ||
      dyn.mask.width != w || dyn.mask.height != h)
    throw InputError("compose_label: size mismatch between scene depth and "
                     "dynamic composite");

  std::vector<std::pair<int, int>> bad;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      size_t i = scene_depth.idx(u, v);
      if (dyn.mask.mask[i] && !dyn.depth.valid[i]) bad.push_back({u, v});
    }
  if (!bad.empty())
    throw InputError(
        "compose_label: dynamic mask covers pixels without dynamic depth at " +
        pixel_list(bad, 5));

  PseudoLabel label;
  label.depth = DepthMap(w, h);
  label.dyn_mask = dyn.mask;
  label.per_object = dyn.objects;
  label.provenance = provenance;

  for (size_t i = 0; i < label.depth.values.size(); ++i) {
    if (dyn.mask.mask[i]) {
      label.depth.values[i] = dyn.depth.values[i];
      label.depth.valid[i] = 1;
    } else {
      label.depth.values[i] = scene_depth.valid[i] ? scene_depth.values[i] : 0.0;
      label.depth.valid[i] = scene_depth.valid[i];
    }
    if (label.depth.valid[i] && !(label.depth.values[i] > 0.0)) {
      int u = int(i) % w, v = int(i) / w;
      throw InputError("compose_label: non-positive depth at " +
                       pixel_list({{u, v}}, 1));
    }
  }
  return label;
}

void save_label(const PseudoLabel& label, const std::string& dir) {
  ensure_directory(dir);
  write_pfm(dir + "/depth.pfm", label.depth);
  write_png_indexed(dir + "/dyn_mask.png", label.dyn_mask.width,
                    label.dyn_mask.height, label.dyn_mask.mask);

  nlohmann::json j;
  j["format_version"] = 1;
  j["width"] = label.depth.width;
  j["height"] = label.depth.height;
  j["provenance"] = label.provenance;
  j["files"] = {{"depth", "depth.pfm"}, {"dyn_mask", "dyn_mask.png"}};
  nlohmann::json objs = nlohmann::json::array();
  for (const AlignedObject& o : label.per_object)
    objs.push_back({{"id", o.id},
                    {"beta", o.beta},
                    {"used_fallback", o.used_fallback},
                    {"note", o.note}});
  j["per_object"] = objs;
  write_text_file(dir + "/label.json", j.dump(2) + "\n");
}

PseudoLabel load_label(const std::string& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(dir + "/label.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_label: bad label.json in " + dir + ": " + e.what());
  }
  PseudoLabel label;
  try {
    if (j.at("format_version").get<int>() != 1)
      throw IoError("load_label: unsupported format_version in " + dir);
    label.provenance = j.at("provenance").get<std::string>();
    for (const auto& o : j.at("per_object")) {
      AlignedObject a;
      a.id = o.at("id").get<int>();
      a.beta = o.at("beta").get<double>();
      a.used_fallback = o.at("used_fallback").get<bool>();
      a.note = o.at("note").get<std::string>();
      label.per_object.push_back(a);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_label: bad label.json in " + dir + ": " + e.what());
  }

  label.depth = read_pfm(dir + "/depth.pfm");
  int mw = 0, mh = 0;
  std::vector<uint8_t> idx = read_png_indexed(dir + "/dyn_mask.png", &mw, &mh);
  if (mw != label.depth.width || mh != label.depth.height ||
      label.depth.width != j.at("width").get<int>() ||
      label.depth.height != j.at("height").get<int>())
    throw IoError("load_label: inconsistent dimensions in " + dir);
  label.dyn_mask = BinaryMask(mw, mh);
  for (size_t i = 0; i < idx.size(); ++i) label.dyn_mask.mask[i] = idx[i] ? 1 : 0;
  return label;
}

SceneStageState distill_final(const RenderedPair& pair,
                              const PseudoLabel& label,
                              const SceneStageState& init,
                              const RunConfig& cfg) {
  const CameraIntrinsics& k = pair.spec.camera;
  int w = k.width, h = k.height;
  size_t n = size_t(w) * h;
  if (init.width != w || init.height != h)
    throw InputError("distill_final: state does not match the rendered pair");
  if (label.depth.width != w || label.depth.height != h)
    throw InputError("distill_final: label does not match the rendered pair");
  if (init.log_depth.size() != n || init.motion.values.size() != 3 * n)
    throw InputError("distill_final: malformed state");
  if (cfg.distill.alpha_support != "all" &&
      cfg.distill.alpha_support != "dynamic")
    throw ConfigError("distill.alpha_support must be \"all\" or \"dynamic\", "
                      "got \"" + cfg.distill.alpha_support + "\"");

  SceneStageState st;
  st.width = w;
  st.height = h;
  st.depth_valid = init.depth_valid;
  st.seed = init.seed;
  st.learning_rate = cfg.distill.learning_rate;

  BinaryMask support(w, h);
  support.mask = pair.depth_r.valid;

  WarpProblem prob;
  prob.camera = &k;
  prob.ref = &pair.image_r;
  prob.src = &pair.image_s;
  prob.support = &support;
  prob.depth_valid = &st.depth_valid;
  prob.weights = cfg.weights;
  prob.use_motion = true;
  prob.distill_label = &label.depth;
  prob.distill_region = &label.dyn_mask;
  prob.alpha_on_region = cfg.distill.alpha_support == "dynamic";
  WarpEvaluator eval(prob);

  // Warm start: every parameter group continues from the converged state.
  WarpParams params;
  params.log_depth = init.log_depth;
  params.pose = init.pose;
  params.motion = init.motion;

  Adam adam(n + 6 + 3 * n);

  DescentSpec spec;
  spec.steps = cfg.distill.steps;
  spec.learning_rate = cfg.distill.learning_rate;
  spec.freeze_motion = false;
  spec.d_min = cfg.stage.d_min;
  spec.d_max = cfg.stage.d_max;
  spec.gauge_interval = 0;  // the label pins the scale; keep the gauge free
  descend_warp(eval, prob, &params, &adam, spec, &st.trace);

  st.log_depth = std::move(params.log_depth);
  st.pose = params.pose;
  st.motion = std::move(params.motion);
  st.step = init.step + int(st.trace.size());
  return st;
}

std::vector<SceneStageState> self_train(const RenderedPair& pair,
                                        const SceneStageState& state,
                                        const BinaryMask& dyn_mask,
                                        int iterations, const RunConfig& cfg) {
  if (iterations < 0)
    throw InputError("self_train: iterations must be >= 0");
  if (dyn_mask.width != state.width || dyn_mask.height != state.height)
    throw InputError("self_train: mask does not match the state");

  std::vector<SceneStageState> states;
  states.reserve(size_t(iterations) + 1);
  states.push_back(state);

  for (int it = 0; it < iterations; ++it) {
    const SceneStageState& cur = states.back();
    DepthMap pred = cur.depth();

    // The current prediction becomes its own label; the dynamic mask is
    // frozen across iterations.
    DynamicComposite dyn;
    dyn.depth = DepthMap(state.width, state.height);
    dyn.mask = dyn_mask;
    for (size_t i = 0; i < dyn.depth.values.size(); ++i)
      if (dyn_mask.mask[i] && pred.valid[i]) {
        dyn.depth.values[i] = pred.values[i];
        dyn.depth.valid[i] = 1;
      }
    PseudoLabel label = compose_label(
        pred, dyn,
        "self-train iteration " + std::to_string(it + 1) + " from state " +
            hash_hex(stage_state_hash(cur)));

    states.push_back(distill_final(pair, label, cur, cfg));
  }
  return states;
}

}  // namespace scd
