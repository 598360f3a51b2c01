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

#include "scdepth/objects.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <cmath>

#include "json.hpp"

#include "scdepth/fit.hpp"
#include "scdepth/geometry.hpp"
#include "scdepth/io.hpp"
#include "scdepth/optim.hpp"

namespace scd {

InstanceMask transport_mask(const InstanceMask& mask,
                            const Correspondence& tau_prime) {
  BinaryMask b(mask.width, mask.height);
  b.mask = mask.mask;
  BinaryMask warped = morph_close(forward_warp_mask(tau_prime, b), 1);
  InstanceMask out(mask.width, mask.height);
  out.id = mask.id;
  out.classification = mask.classification;
  out.mask = std::move(warped.mask);
  return out;
}

std::optional<ObjectHypothesis> make_object_hypothesis(
    const InstanceMask& mask_r, const Correspondence& tau_prime,
    const ObjectStageConfig& cfg, std::string* warning) {
  size_t n_ref = mask_r.pixel_count();
  if (n_ref < size_t(cfg.min_object_pixels)) {
    if (warning)
      *warning = "object " + std::to_string(mask_r.id) + ": only " +
                 std::to_string(n_ref) + " pixels (need " +
                 std::to_string(cfg.min_object_pixels) + "), dropped";
    return std::nullopt;
  }

  ObjectHypothesis hyp;
  hyp.id = mask_r.id;
  hyp.classification = mask_r.classification;
  hyp.mask_r = mask_r;
  hyp.mask_s = transport_mask(mask_r, tau_prime);

  size_t n_src = hyp.mask_s.pixel_count();
  if (n_src == 0) {
    if (warning)
      *warning = "object " + std::to_string(mask_r.id) +
                 ": transported mask is empty, dropped";
    return std::nullopt;
  }
  if (n_src < n_ref)
    hyp.warning = "object " + std::to_string(mask_r.id) +
                  ": transported mask has " + std::to_string(n_src) + " of " +
                  std::to_string(n_ref) + " pixels (partly out of frame)";

  // Union bounding box of both masks, padded for loss stencils.
  int u0 = mask_r.width, v0 = mask_r.height, u1 = -1, v1 = -1;
  for (int v = 0; v < mask_r.height; ++v)
    for (int u = 0; u < mask_r.width; ++u)
      if (hyp.mask_r.at(u, v) || hyp.mask_s.at(u, v)) {
        u0 = std::min(u0, u);
        v0 = std::min(v0, v);
        u1 = std::max(u1, u);
        v1 = std::max(v1, v);
      }
  hyp.crop_u0 = std::max(0, u0 - cfg.crop_padding);
  hyp.crop_v0 = std::max(0, v0 - cfg.crop_padding);
  hyp.crop_u1 = std::min(mask_r.width, u1 + 1 + cfg.crop_padding);
  hyp.crop_v1 = std::min(mask_r.height, v1 + 1 + cfg.crop_padding);
  return hyp;
}

WarpProblem ObjectCrop::problem(const LossWeights& weights) const {
  WarpProblem prob;
  prob.camera = &camera;
  prob.ref = &ref;
  prob.src = &src;
  prob.support = &support;
  prob.depth_valid = &depth_valid;
  prob.weights = weights;
  prob.use_motion = false;
  prob.src_mask = &src_mask;
  prob.smooth_ref = &flat;  // the smoothness edge image is the mask itself
  return prob;
}

ObjectCrop build_object_crop(const RenderedPair& pair,
                             const ObjectHypothesis& hyp) {
  const CameraIntrinsics& full_k = pair.spec.camera;
  const int cw = hyp.crop_u1 - hyp.crop_u0, ch = hyp.crop_v1 - hyp.crop_v0;
  if (cw <= 0 || ch <= 0)
    throw InputError("object stage: empty crop window");

  ObjectCrop crop;
  // Shifting the principal point by the crop origin keeps every ray
  // identical to the full frame.
  crop.camera.fx = full_k.fx;
  crop.camera.fy = full_k.fy;
  crop.camera.cx = full_k.cx - hyp.crop_u0;
  crop.camera.cy = full_k.cy - hyp.crop_v0;
  crop.camera.width = cw;
  crop.camera.height = ch;

  crop.ref = ImageBuffer(cw, ch);
  crop.src = ImageBuffer(cw, ch);
  crop.flat = ImageBuffer(cw, ch);
  crop.support = BinaryMask(cw, ch);
  crop.src_mask = BinaryMask(cw, ch);
  crop.depth_valid.assign(size_t(cw) * ch, 0);
  for (int v = 0; v < ch; ++v)
    for (int u = 0; u < cw; ++u) {
      int fu = u + hyp.crop_u0, fv = v + hyp.crop_v0;
      size_t ci = size_t(v) * cw + u, fi = size_t(fv) * full_k.width + fu;
      for (int c = 0; c < 3; ++c) {
        crop.ref.values[ci * 3 + c] = pair.image_r.values[fi * 3 + c];
        crop.src.values[ci * 3 + c] = pair.image_s.values[fi * 3 + c];
        crop.flat.values[ci * 3 + c] = 1.0;
      }
      crop.support.mask[ci] = hyp.mask_r.mask[fi];
      crop.src_mask.mask[ci] = hyp.mask_s.mask[fi];
      crop.depth_valid[ci] = hyp.mask_r.mask[fi];
    }
  return crop;
}

ObjectHypothesis run_object_stage(const RenderedPair& pair,
                                  ObjectHypothesis hyp, const RunConfig& cfg) {
  const CameraIntrinsics& full_k = pair.spec.camera;
  const int cw = hyp.crop_u1 - hyp.crop_u0, ch = hyp.crop_v1 - hyp.crop_v0;
  if (hyp.mask_r.pixel_count() < size_t(cfg.objects.min_object_pixels))
    throw InputError("object stage: mask below min_object_pixels");

  ObjectCrop crop = build_object_crop(pair, hyp);

  // Textureless guard: photometric SfM needs gradients inside the mask.
  {
    double mean[3] = {0, 0, 0};
    size_t cnt = 0;
    for (size_t i = 0; i < crop.support.mask.size(); ++i)
      if (crop.support.mask[i]) {
        for (int c = 0; c < 3; ++c) mean[c] += crop.ref.values[i * 3 + c];
        ++cnt;
      }
    for (double& m : mean) m /= double(cnt);
    double var = 0.0;
    for (size_t i = 0; i < crop.support.mask.size(); ++i)
      if (crop.support.mask[i])
        for (int c = 0; c < 3; ++c) {
          double d = crop.ref.values[i * 3 + c] - mean[c];
          var += d * d;
        }
    var /= double(3 * cnt);
    if (var < 1e-4)
      throw DegenerateInputError(
          "object stage: textureless object (image variance " +
          std::to_string(var) + " inside the mask)");
  }

  WarpProblem prob = crop.problem(cfg.weights);
  WarpEvaluator eval(prob);

  WarpParams params;
  params.log_depth.assign(size_t(cw) * ch, 0.0);
  params.pose = hyp.pose;
  bool seeded = false;
  for (int v = 0; v < ch && !seeded; ++v)
    for (int u = 0; u < cw; ++u) {
      int fu = u + hyp.crop_u0, fv = v + hyp.crop_v0;
      if (hyp.depth.width > 0 &&
          hyp.depth.valid[size_t(fv) * full_k.width + fu]) {
        seeded = true;
        break;
      }
    }
  if (seeded)
    for (int v = 0; v < ch; ++v)
      for (int u = 0; u < cw; ++u) {
        size_t ci = size_t(v) * cw + u;
        if (!crop.depth_valid[ci]) continue;
        int fu = u + hyp.crop_u0, fv = v + hyp.crop_v0;
        size_t fi = size_t(fv) * full_k.width + fu;
        if (hyp.depth.valid[fi] && hyp.depth.values[fi] > 0.0)
          params.log_depth[ci] = std::log(hyp.depth.values[fi]);
      }

  Adam adam(params.log_depth.size() + 6);
  DescentSpec spec;
  spec.steps = cfg.objects.steps;
  spec.learning_rate = cfg.objects.learning_rate;
  spec.d_min = cfg.stage.d_min;
  spec.d_max = cfg.stage.d_max;
  spec.gauge_interval = cfg.objects.gauge_interval;
  hyp.trace.clear();
  descend_warp(eval, prob, &params, &adam, spec, &hyp.trace);

  hyp.pose = params.pose;
  hyp.depth = DepthMap(full_k.width, full_k.height);
  for (int v = 0; v < ch; ++v)
    for (int u = 0; u < cw; ++u) {
      size_t ci = size_t(v) * cw + u;
      if (!crop.depth_valid[ci]) continue;
      int fu = u + hyp.crop_u0, fv = v + hyp.crop_v0;
      size_t fi = size_t(fv) * full_k.width + fu;
      hyp.depth.values[fi] = std::exp(params.log_depth[ci]);
      hyp.depth.valid[fi] = 1;
    }
  return hyp;
}

namespace {

const char* class_name(MotionClass c) {
  switch (c) {
    case MotionClass::static_object: return "static";
    case MotionClass::moving_object: return "moving";
    default: return "unknown";
  }
}

}  // namespace

void save_object(const ObjectHypothesis& hyp, const std::string& dir) {
  ensure_directory(dir);
  write_pfm(dir + "/depth.pfm", hyp.depth);

  std::string csv = "step,total,photometric,smoothness,sparsity,distill\n";
  {
    std::ostringstream os;
    os.precision(17);
    for (size_t i = 0; i < hyp.trace.size(); ++i) {
      const StageRecord& r = hyp.trace[i];
      os << i << ',' << r.total << ',' << r.photometric << ',' << r.smoothness
         << ',' << r.sparsity << ',' << r.distill << '\n';
    }
    csv += os.str();
  }
  write_text_file(dir + "/trace.csv", csv);

  nlohmann::json j;
  j["id"] = hyp.id;
  j["classification"] = class_name(hyp.classification);
  j["pose"] = {{"rotation", {hyp.pose.rotation.x, hyp.pose.rotation.y,
                             hyp.pose.rotation.z}},
               {"translation", {hyp.pose.translation.x, hyp.pose.translation.y,
                                hyp.pose.translation.z}}};
  j["crop"] = {hyp.crop_u0, hyp.crop_v0, hyp.crop_u1, hyp.crop_v1};
  j["mask_r_pixels"] = hyp.mask_r.pixel_count();
  j["mask_s_pixels"] = hyp.mask_s.pixel_count();
  j["warning"] = hyp.warning;
  j["depth_file"] = "depth.pfm";
  j["trace_file"] = "trace.csv";
  write_text_file(dir + "/object.json", j.dump(2) + "\n");
}

ObjectHypothesis load_object(const std::string& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(dir + "/object.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("object sidecar: invalid JSON in " + dir + ": " + e.what());
  }
  ObjectHypothesis hyp;
  try {
    hyp.id = j.at("id").get<int>();
    std::string cls = j.at("classification").get<std::string>();
    hyp.classification = cls == "static"
                             ? MotionClass::static_object
                             : cls == "moving" ? MotionClass::moving_object
                                               : MotionClass::unknown;
    const auto& rot = j.at("pose").at("rotation");
    const auto& tr = j.at("pose").at("translation");
    hyp.pose.rotation = {rot.at(0).get<double>(), rot.at(1).get<double>(),
                         rot.at(2).get<double>()};
    hyp.pose.translation = {tr.at(0).get<double>(), tr.at(1).get<double>(),
                            tr.at(2).get<double>()};
    const auto& crop = j.at("crop");
    hyp.crop_u0 = crop.at(0).get<int>();
    hyp.crop_v0 = crop.at(1).get<int>();
    hyp.crop_u1 = crop.at(2).get<int>();
    hyp.crop_v1 = crop.at(3).get<int>();
    hyp.warning = j.at("warning").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("object sidecar: missing field in " + dir + ": " + e.what());
  }
  hyp.depth = read_pfm(dir + "/depth.pfm");

  // The reference mask is exactly the depth support.
  hyp.mask_r = InstanceMask(hyp.depth.width, hyp.depth.height);
  hyp.mask_r.id = hyp.id;
  hyp.mask_r.classification = hyp.classification;
  hyp.mask_r.mask = hyp.depth.valid;

  if (file_exists(dir + "/trace.csv")) {
    std::istringstream in(read_text_file(dir + "/trace.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      StageRecord rec;
      long step_idx = 0;
      if (std::sscanf(line.c_str(), "%ld,%lf,%lf,%lf,%lf,%lf", &step_idx,
                      &rec.total, &rec.photometric, &rec.smoothness,
                      &rec.sparsity, &rec.distill) == 6)
        hyp.trace.push_back(rec);
    }
  }
  return hyp;
}

}  // namespace scd
