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

#include "scdepth/stage.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "scdepth/geometry.hpp"
#include "scdepth/io.hpp"
#include "scdepth/losses.hpp"
#include "scdepth/rng.hpp"

namespace scd {

DepthMap SceneStageState::depth() const {
  DepthMap d(width, height);
  d.valid = depth_valid;
  for (size_t i = 0; i < d.values.size(); ++i)
    d.values[i] = depth_valid[i] ? std::exp(log_depth[i]) : 0.0;
  return d;
}

namespace {

// Flat layout: [log_depth (n)] [pose (6)] [motion (3n) when used].
size_t flat_size(size_t n, bool use_motion) {
  return n + 6 + (use_motion ? 3 * n : 0);
}

void pack(const WarpParams& p, bool use_motion, std::vector<double>* flat) {
  size_t n = p.log_depth.size();
  flat->resize(flat_size(n, use_motion));
  std::copy(p.log_depth.begin(), p.log_depth.end(), flat->begin());
  (*flat)[n + 0] = p.pose.rotation.x;
  (*flat)[n + 1] = p.pose.rotation.y;
  (*flat)[n + 2] = p.pose.rotation.z;
  (*flat)[n + 3] = p.pose.translation.x;
  (*flat)[n + 4] = p.pose.translation.y;
  (*flat)[n + 5] = p.pose.translation.z;
  if (use_motion)
    std::copy(p.motion.values.begin(), p.motion.values.end(),
              flat->begin() + n + 6);
}

void unpack(const std::vector<double>& flat, bool use_motion, WarpParams* p) {
  size_t n = p->log_depth.size();
  std::copy(flat.begin(), flat.begin() + n, p->log_depth.begin());
  p->pose.rotation = {flat[n + 0], flat[n + 1], flat[n + 2]};
  p->pose.translation = {flat[n + 3], flat[n + 4], flat[n + 5]};
  if (use_motion)
    std::copy(flat.begin() + n + 6, flat.end(), p->motion.values.begin());
}

void pack_grads(const WarpGrads& g, bool use_motion, size_t n,
                std::vector<double>* flat) {
  flat->resize(flat_size(n, use_motion));
  std::copy(g.log_depth.begin(), g.log_depth.end(), flat->begin());
  for (int i = 0; i < 6; ++i) (*flat)[n + i] = g.pose[i];
  if (use_motion)
    std::copy(g.motion.values.begin(), g.motion.values.end(),
              flat->begin() + n + 6);
}

}  // namespace

void descend_warp(WarpEvaluator& eval, const WarpProblem& prob,
                  WarpParams* params, Adam* adam, const DescentSpec& spec,
                  std::vector<StageRecord>* trace) {
  size_t n = params->log_depth.size();
  bool use_motion = prob.use_motion;
  if (adam->size() != flat_size(n, use_motion))
    throw InputError("descend_warp: optimizer size mismatch");

  LrSchedule lr{spec.learning_rate, spec.steps};
  WarpGrads grads;
  if (use_motion) grads.motion = MotionField(params->motion.width, params->motion.height);
  std::vector<double> flat, flat_g;
  const double lo = std::log(spec.d_min), hi = std::log(spec.d_max);
  const std::vector<uint8_t>& dv = *prob.depth_valid;

  double initial = 0.0;
  int high_streak = 0;

  for (int s = 0; s < spec.steps; ++s) {
    if (spec.gauge_interval > 0 && s > 0 && s % spec.gauge_interval == 0) {
      // Remove the depth-scale gauge direction: re-center valid log-depths to
      // zero mean and shrink the translation by the same factor, which leaves
      // every reprojection unchanged.
      double sum = 0.0;
      size_t cnt = 0;
      for (size_t i = 0; i < n; ++i)
        if (dv[i]) {
          sum += params->log_depth[i];
          ++cnt;
        }
      if (cnt > 0) {
        double mu = sum / double(cnt);
        for (size_t i = 0; i < n; ++i)
          if (dv[i]) params->log_depth[i] -= mu;
        double c = std::exp(-mu);
        params->pose.translation = params->pose.translation * c;
      }
    }

    LossBreakdown lb = eval.evaluate(*params, &grads);
    trace->push_back({lb.total, lb.photometric, lb.smoothness, lb.sparsity,
                      lb.distill});

    if (s == 0) {
      initial = lb.total;
    } else if (lb.total > spec.divergence_factor * initial &&
               initial > 0.0) {
      if (++high_streak >= spec.divergence_patience) {
        std::vector<double> totals;
        totals.reserve(trace->size());
        for (const auto& r : *trace) totals.push_back(r.total);
        throw OptimizationFailure(
            "descent diverged: loss " + std::to_string(lb.total) +
                " stayed above " + std::to_string(spec.divergence_factor) +
                "x the initial " + std::to_string(initial) + " for " +
                std::to_string(high_streak) + " steps",
            std::move(totals));
      }
    } else {
      high_streak = 0;
    }

    if (spec.freeze_motion && use_motion)
      std::fill(grads.motion.values.begin(), grads.motion.values.end(), 0.0);

    pack(*params, use_motion, &flat);
    pack_grads(grads, use_motion, n, &flat_g);
    adam->step(&flat, flat_g, lr.at(s));
    unpack(flat, use_motion, params);

    for (size_t i = 0; i < n; ++i)
      if (dv[i]) params->log_depth[i] = std::clamp(params->log_depth[i], lo, hi);
  }
}

SceneStageState run_scene_stage(const RenderedPair& pair, const RunConfig& cfg) {
  const CameraIntrinsics& k = pair.spec.camera;
  int w = k.width, h = k.height;
  size_t n = size_t(w) * h;

  SceneStageState st;
  st.width = w;
  st.height = h;
  st.depth_valid = pair.depth_r.valid;
  st.seed = hash_combine(cfg.seed, pair.spec.seed);
  st.learning_rate = cfg.stage.learning_rate;
  st.log_depth.assign(n, std::log(std::sqrt(cfg.stage.d_min * cfg.stage.d_max)));
  st.motion = MotionField(w, h);

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
  WarpEvaluator eval(prob);

  WarpParams params;
  params.log_depth = st.log_depth;
  params.pose = st.pose;
  params.motion = st.motion;

  Adam adam(flat_size(n, true));

  DescentSpec phase_a;
  phase_a.steps = cfg.stage.steps_phase_a;
  phase_a.learning_rate = cfg.stage.learning_rate;
  phase_a.freeze_motion = true;
  phase_a.d_min = cfg.stage.d_min;
  phase_a.d_max = cfg.stage.d_max;
  descend_warp(eval, prob, &params, &adam, phase_a, &st.trace);

  DescentSpec phase_b = phase_a;
  phase_b.steps = cfg.stage.steps_phase_b;
  phase_b.freeze_motion = false;
  descend_warp(eval, prob, &params, &adam, phase_b, &st.trace);

  st.log_depth = std::move(params.log_depth);
  st.pose = params.pose;
  st.motion = std::move(params.motion);
  st.step = int(st.trace.size());
  return st;
}

double static_region_scale(const DepthMap& pred, const DepthMap& gt,
                           const BinaryMask& static_mask) {
  if (pred.width != gt.width || pred.height != gt.height ||
      static_mask.width != pred.width || static_mask.height != pred.height)
    throw InputError("static_region_scale: size mismatch");
  std::vector<double> ratios;
  for (size_t i = 0; i < pred.values.size(); ++i) {
    if (!static_mask.mask[i] || !pred.valid[i] || !gt.valid[i]) continue;
    if (!(pred.values[i] > 0.0)) continue;
    ratios.push_back(gt.values[i] / pred.values[i]);
  }
  if (ratios.empty())
    throw DegenerateInputError("static_region_scale: empty static region");
  return median_of(ratios);
}

Correspondence refined_correspondence(const SceneStageState& st,
                                      const CameraIntrinsics& k) {
  Correspondence tau = build_correspondence(st.depth(), k, st.pose);
  return apply_pixel_motion(tau, st.motion, k);
}

// ---------------------------------------------------------------------------
// Checkpoints.

namespace {

constexpr char kStateMagic[4] = {'S', 'C', 'D', 'S'};
constexpr uint32_t kStateVersion = 1;

template <typename T>
void put(std::string* buf, const T& v) {
  buf->append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void put_vec(std::string* buf, const std::vector<T>& v) {
  uint64_t len = v.size();
  put(buf, len);
  buf->append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(T));
}

struct Reader {
  const std::string& s;
  size_t off = 0;
  template <typename T>
  T get() {
    if (off + sizeof(T) > s.size()) throw IoError("checkpoint: truncated blob");
    T v;
    std::memcpy(&v, s.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
  }
  template <typename T>
  std::vector<T> get_vec() {
    uint64_t len = get<uint64_t>();
    if (off + len * sizeof(T) > s.size())
      throw IoError("checkpoint: truncated blob");
    std::vector<T> v(len);
    std::memcpy(v.data(), s.data() + off, len * sizeof(T));
    off += len * sizeof(T);
    return v;
  }
};

std::string state_blob(const SceneStageState& st) {
  std::string buf;
  buf.append(kStateMagic, 4);
  put(&buf, kStateVersion);
  put(&buf, int32_t(st.width));
  put(&buf, int32_t(st.height));
  put(&buf, st.seed);
  put(&buf, int32_t(st.step));
  put(&buf, st.learning_rate);
  double pose[6] = {st.pose.rotation.x,    st.pose.rotation.y,
                    st.pose.rotation.z,    st.pose.translation.x,
                    st.pose.translation.y, st.pose.translation.z};
  buf.append(reinterpret_cast<const char*>(pose), sizeof(pose));
  put_vec(&buf, st.depth_valid);
  put_vec(&buf, st.log_depth);
  put_vec(&buf, st.motion.values);
  return buf;
}

}  // namespace

uint64_t stage_state_hash(const SceneStageState& st) {
  return fnv1a(state_blob(st));
}

void save_stage_state(const SceneStageState& st, const std::string& dir) {
  ensure_directory(dir);
  std::string blob = state_blob(st);
  write_text_file(dir + "/state.bin", blob);

  std::ostringstream csv;
  csv << "step,total,photometric,smoothness,sparsity,distill\n";
  csv.precision(17);
  for (size_t i = 0; i < st.trace.size(); ++i) {
    const StageRecord& r = st.trace[i];
    csv << i << ',' << r.total << ',' << r.photometric << ',' << r.smoothness
        << ',' << r.sparsity << ',' << r.distill << '\n';
  }
  write_text_file(dir + "/trace.csv", csv.str());

  nlohmann::json j;
  j["checkpoint_version"] = kStateVersion;
  j["width"] = st.width;
  j["height"] = st.height;
  j["step"] = st.step;
  j["seed"] = st.seed;
  j["learning_rate"] = st.learning_rate;
  j["state_hash"] = hash_hex(stage_state_hash(st));
  j["trace_file"] = "trace.csv";
  write_text_file(dir + "/state.json", j.dump(2) + "\n");
}

SceneStageState load_stage_state(const std::string& dir) {
  std::string blob = read_text_file(dir + "/state.bin");
  if (blob.size() < 8 || std::memcmp(blob.data(), kStateMagic, 4) != 0)
    throw IoError("checkpoint: bad magic in " + dir + "/state.bin");
  Reader r{blob, 4};
  uint32_t version = r.get<uint32_t>();
  if (version != kStateVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  SceneStageState st;
  st.width = r.get<int32_t>();
  st.height = r.get<int32_t>();
  st.seed = r.get<uint64_t>();
  st.step = r.get<int32_t>();
  st.learning_rate = r.get<double>();
  double pose[6];
  for (double& p : pose) p = r.get<double>();
  st.pose.rotation = {pose[0], pose[1], pose[2]};
  st.pose.translation = {pose[3], pose[4], pose[5]};
  st.depth_valid = r.get_vec<uint8_t>();
  st.log_depth = r.get_vec<double>();
  st.motion = MotionField(st.width, st.height);
  st.motion.values = r.get_vec<double>();
  size_t n = size_t(st.width) * st.height;
  if (st.depth_valid.size() != n || st.log_depth.size() != n ||
      st.motion.values.size() != 3 * n)
    throw IoError("checkpoint: inconsistent field sizes");

  if (file_exists(dir + "/trace.csv")) {
    std::istringstream in(read_text_file(dir + "/trace.csv"));
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      StageRecord rec;
      long step_idx = 0;
      if (std::sscanf(line.c_str(), "%ld,%lf,%lf,%lf,%lf,%lf", &step_idx,
                      &rec.total, &rec.photometric, &rec.smoothness,
                      &rec.sparsity, &rec.distill) == 6)
        st.trace.push_back(rec);
    }
  }
  return st;
}

}  // namespace scd
