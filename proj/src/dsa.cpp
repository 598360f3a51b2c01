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

#include "scdepth/dsa.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "scdepth/io.hpp"
#include "scdepth/optim.hpp"
#include "scdepth/rng.hpp"

namespace scd {

namespace {

const char* const kFeatureNames[DsaFeatures::kCount] = {
    "log_mean_object_depth",  "log_median_object_depth",
    "log_mean_ground_depth",  "bbox_u",
    "bbox_v",                 "bbox_w",
    "bbox_h",                 "area_fraction",
    "bottom_edge_v",
};

double median_inplace(std::vector<double>* v) {
  size_t mid = v->size() / 2;
  std::nth_element(v->begin(), v->begin() + mid, v->end());
  return (*v)[mid];
}

// Ratio/weight pairs for the alignment loss, sorted by ratio.
struct RatioStats {
  std::vector<double> ratio, weight;
};

RatioStats ratio_stats(const DepthMap& object_depth,
                       const DepthMap& scene_depth,
                       const std::vector<uint8_t>& mask,
                       const char* caller) {
  if (object_depth.values.size() != mask.size() ||
      scene_depth.values.size() != mask.size())
    throw InputError(std::string(caller) + ": size mismatch");
  std::vector<std::pair<double, double>> rw;
  for (size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i] || !object_depth.valid[i] || !scene_depth.valid[i]) continue;
    double d = object_depth.values[i];
    if (d <= 0.0) continue;
    rw.emplace_back(scene_depth.values[i] / d, d);
  }
  if (rw.empty())
    throw DegenerateInputError(std::string(caller) +
                               ": no valid pixels under the mask");
  std::sort(rw.begin(), rw.end());
  RatioStats st;
  st.ratio.reserve(rw.size());
  st.weight.reserve(rw.size());
  for (const auto& p : rw) {
    st.ratio.push_back(p.first);
    st.weight.push_back(p.second);
  }
  return st;
}

// Weighted median: the smallest ratio whose cumulative weight reaches half
// the total. This is an exact minimizer of sum_i w_i |beta - r_i|.
double weighted_median(const RatioStats& st) {
  double total = std::accumulate(st.weight.begin(), st.weight.end(), 0.0);
  double cum = 0.0;
  for (size_t i = 0; i < st.ratio.size(); ++i) {
    cum += st.weight[i];
    if (cum >= 0.5 * total) return st.ratio[i];
  }
  return st.ratio.back();
}

}  // namespace

const char* DsaFeatures::name(int index) { return kFeatureNames[index]; }

uint64_t dsaFeatureChecksumImpl() {
  std::string contract;
  for (int i = 0; i < DsaFeatures::kCount; ++i) {
    contract += std::to_string(i);
    contract += ':';
    contract += kFeatureNames[i];
    contract += ';';
  }
  return fnv1a(contract);
}

uint64_t dsa_feature_checksum() {
  static const uint64_t h = dsaFeatureChecksumImpl();
  return h;
}

GroundPatch ground_patch_for_object(const InstanceMask& mask,
                                    const BinaryMask& ground,
                                    const DepthMap& scene_depth, int dilation) {
  if (ground.mask.size() != mask.mask.size() ||
      scene_depth.values.size() != mask.mask.size())
    throw InputError("ground patch: size mismatch");
  int u0 = mask.width, v0 = mask.height, u1 = -1, v1 = -1;
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u)
      if (mask.at(u, v)) {
        u0 = std::min(u0, u);
        v0 = std::min(v0, v);
        u1 = std::max(u1, u);
        v1 = std::max(v1, v);
      }
  GroundPatch patch;
  patch.mask = BinaryMask(mask.width, mask.height);
  if (u1 < 0) {
    patch.note = "object mask is empty";
    return patch;
  }
  u0 = std::max(0, u0 - dilation);
  v0 = std::max(0, v0 - dilation);
  u1 = std::min(mask.width - 1, u1 + dilation);
  v1 = std::min(mask.height - 1, v1 + dilation);
  size_t n = 0;
  for (int v = v0; v <= v1; ++v)
    for (int u = u0; u <= u1; ++u) {
      size_t i = patch.mask.idx(u, v);
      if (ground.mask[i] && scene_depth.valid[i]) {
        patch.mask.mask[i] = 1;
        ++n;
      }
    }
  if (n == 0)
    patch.note = "no ground pixels near object " + std::to_string(mask.id);
  return patch;
}

DsaFeatures extract_dsa_features(const DepthMap& object_depth,
                                 const InstanceMask& mask,
                                 const DepthMap& scene_depth,
                                 const BinaryMask& ground_patch) {
  if (object_depth.values.size() != mask.mask.size() ||
      scene_depth.values.size() != mask.mask.size() ||
      ground_patch.mask.size() != mask.mask.size())
    throw InputError("dsa features: size mismatch");

  std::vector<double> obj;
  size_t mask_px = 0;
  int u0 = mask.width, v0 = mask.height, u1 = -1, v1 = -1;
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u) {
      size_t i = mask.idx(u, v);
      if (!mask.mask[i]) continue;
      ++mask_px;
      u0 = std::min(u0, u);
      v0 = std::min(v0, v);
      u1 = std::max(u1, u);
      v1 = std::max(v1, v);
      if (object_depth.valid[i] && object_depth.values[i] > 0.0)
        obj.push_back(object_depth.values[i]);
    }
  if (obj.empty())
    throw DegenerateInputError(
        "dsa features: no positive object depth under the mask");

  double ground_sum = 0.0;
  size_t ground_n = 0;
  for (size_t i = 0; i < ground_patch.mask.size(); ++i)
    if (ground_patch.mask[i] && scene_depth.valid[i]) {
      ground_sum += scene_depth.values[i];
      ++ground_n;
    }
  if (ground_n == 0)
    throw DegenerateInputError("dsa features: empty ground patch");

  double obj_mean = std::accumulate(obj.begin(), obj.end(), 0.0) / obj.size();
  double obj_median = median_inplace(&obj);

  DsaFeatures f;
  f.v[0] = std::log(obj_mean);
  f.v[1] = std::log(obj_median);
  f.v[2] = std::log(ground_sum / double(ground_n));
  f.v[3] = double(u0) / mask.width;
  f.v[4] = double(v0) / mask.height;
  f.v[5] = double(u1 + 1 - u0) / mask.width;
  f.v[6] = double(v1 + 1 - v0) / mask.height;
  f.v[7] = double(mask_px) / double(mask.mask.size());
  f.v[8] = double(v1 + 1) / mask.height;
  for (double x : f.v)
    if (!std::isfinite(x))
      throw DegenerateInputError("dsa features: non-finite feature");
  return f;
}

double oracle_beta(const DepthMap& object_depth, const DepthMap& scene_depth,
                   const BinaryMask& mask) {
  return weighted_median(
      ratio_stats(object_depth, scene_depth, mask.mask, "oracle_beta"));
}

DsaExample make_dsa_example(const DepthMap& object_depth,
                            const InstanceMask& mask,
                            const DepthMap& scene_depth,
                            const BinaryMask& ground_patch, int scene_index) {
  DsaExample ex;
  ex.features =
      extract_dsa_features(object_depth, mask, scene_depth, ground_patch);
  RatioStats st =
      ratio_stats(object_depth, scene_depth, mask.mask, "dsa example");
  ex.ratio = std::move(st.ratio);
  ex.weight = std::move(st.weight);
  ex.beta_star = weighted_median({ex.ratio, ex.weight});
  ex.scene_index = scene_index;
  ex.object_id = mask.id;
  return ex;
}

double scale_loss(const DsaExample& ex, double beta) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < ex.ratio.size(); ++i) {
    num += ex.weight[i] * std::abs(beta - ex.ratio[i]);
    den += ex.weight[i];
  }
  return den > 0.0 ? num / den : 0.0;
}

// ---------------------------------------------------------------------------
// Regressor.

namespace {

constexpr double kLeak = 0.01;       // leaky-ReLU slope (no dead units)
constexpr double kBetaFloor = 1e-12; // keeps beta > 0 even when softplus
                                     // underflows for very negative inputs

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Forward activations kept for the backward pass.
struct Activations {
  std::vector<double> z1, a1, z2, a2;
  double z3 = 0.0;
  double beta = 0.0;
};

void forward(const DsaRegressor& r, const double* f, Activations* act) {
  int in = r.in_dim, h = r.hidden;
  act->z1.assign(h, 0.0);
  act->a1.assign(h, 0.0);
  act->z2.assign(h, 0.0);
  act->a2.assign(h, 0.0);
  for (int j = 0; j < h; ++j) {
    double z = r.b1[j];
    for (int i = 0; i < in; ++i) z += r.w1[size_t(j) * in + i] * f[i];
    act->z1[j] = z;
    act->a1[j] = z > 0.0 ? z : kLeak * z;
  }
  for (int k = 0; k < h; ++k) {
    double z = r.b2[k];
    for (int j = 0; j < h; ++j) z += r.w2[size_t(k) * h + j] * act->a1[j];
    act->z2[k] = z;
    act->a2[k] = z > 0.0 ? z : kLeak * z;
  }
  double z = r.b3[0];
  for (int k = 0; k < h; ++k) z += r.w3[k] * act->a2[k];
  act->z3 = z;
  act->beta = softplus(z) + kBetaFloor;
}

// Gradients of a scalar loss with respect to every parameter, given
// dL/dbeta. Accumulates into `g` (same layout as the regressor).
void backward(const DsaRegressor& r, const double* f, const Activations& act,
              double dbeta, DsaRegressor* g) {
  int in = r.in_dim, h = r.hidden;
  double dz3 = dbeta * sigmoid(act.z3);
  g->b3[0] += dz3;
  std::vector<double> da2(h), da1(h);
  for (int k = 0; k < h; ++k) {
    g->w3[k] += dz3 * act.a2[k];
    da2[k] = dz3 * r.w3[k];
  }
  for (int k = 0; k < h; ++k) {
    double dz2 = da2[k] * (act.z2[k] > 0.0 ? 1.0 : kLeak);
    g->b2[k] += dz2;
    for (int j = 0; j < h; ++j) {
      g->w2[size_t(k) * h + j] += dz2 * act.a1[j];
      da1[j] += dz2 * r.w2[size_t(k) * h + j];
    }
  }
  for (int j = 0; j < h; ++j) {
    double dz1 = da1[j] * (act.z1[j] > 0.0 ? 1.0 : kLeak);
    g->b1[j] += dz1;
    for (int i = 0; i < in; ++i) g->w1[size_t(j) * in + i] += dz1 * f[i];
  }
}

size_t param_count(const DsaRegressor& r) {
  return r.w1.size() + r.b1.size() + r.w2.size() + r.b2.size() + r.w3.size() +
         r.b3.size();
}

void pack_params(const DsaRegressor& r, std::vector<double>* flat) {
  flat->clear();
  flat->reserve(param_count(r));
  for (const auto* v : {&r.w1, &r.b1, &r.w2, &r.b2, &r.w3, &r.b3})
    flat->insert(flat->end(), v->begin(), v->end());
}

void unpack_params(const std::vector<double>& flat, DsaRegressor* r) {
  size_t off = 0;
  for (auto* v : {&r->w1, &r->b1, &r->w2, &r->b2, &r->w3, &r->b3}) {
    std::copy(flat.begin() + off, flat.begin() + off + v->size(), v->begin());
    off += v->size();
  }
}

void zero_like(DsaRegressor* g) {
  std::fill(g->w1.begin(), g->w1.end(), 0.0);
  std::fill(g->b1.begin(), g->b1.end(), 0.0);
  std::fill(g->w2.begin(), g->w2.end(), 0.0);
  std::fill(g->b2.begin(), g->b2.end(), 0.0);
  std::fill(g->w3.begin(), g->w3.end(), 0.0);
  std::fill(g->b3.begin(), g->b3.end(), 0.0);
}

// Loss value and subgradient of the normalized alignment loss at beta, using
// the example's sorted ratios.
void loss_at(const DsaExample& ex, double beta, double* loss, double* dloss) {
  // Prefix sums are tiny per example; recompute on the fly.
  double wtot = 0.0, stot = 0.0;
  double wless = 0.0, sless = 0.0, wgreater = 0.0;
  for (size_t i = 0; i < ex.ratio.size(); ++i) {
    wtot += ex.weight[i];
    stot += ex.weight[i] * ex.ratio[i];
    if (ex.ratio[i] < beta) {
      wless += ex.weight[i];
      sless += ex.weight[i] * ex.ratio[i];
    } else if (ex.ratio[i] > beta) {
      wgreater += ex.weight[i];
    }
  }
  *loss = (beta * (2.0 * wless - wtot) + stot - 2.0 * sless) / wtot;
  *dloss = (wless - wgreater) / wtot;
}

}  // namespace

double DsaRegressor::predict(const DsaFeatures& f) const {
  Activations act;
  forward(*this, f.v, &act);
  return act.beta;
}

DsaRegressor make_dsa_regressor(uint64_t seed) {
  DsaRegressor r;
  r.seed = seed;
  Rng rng(seed);
  int in = r.in_dim, h = r.hidden;
  r.w1.resize(size_t(h) * in);
  r.b1.assign(h, 0.0);
  r.w2.resize(size_t(h) * h);
  r.b2.assign(h, 0.0);
  r.w3.resize(h);
  r.b3.assign(1, std::log(std::exp(1.0) - 1.0));  // softplus(b3) = 1
  double s1 = std::sqrt(2.0 / in), s2 = std::sqrt(2.0 / h);
  for (double& w : r.w1) w = rng.normal(0.0, s1);
  for (double& w : r.w2) w = rng.normal(0.0, s2);
  for (double& w : r.w3) w = rng.normal(0.0, 0.1);
  return r;
}

DsaTrainResult train_dsa(const std::vector<DsaExample>& examples,
                         const DsaConfig& cfg, uint64_t seed) {
  if (int(examples.size()) < cfg.min_examples)
    throw InputError("dsa training: " + std::to_string(examples.size()) +
                     " static-object examples, need at least " +
                     std::to_string(cfg.min_examples) +
                     "; render a larger scene suite");

  // Hold out whole scenes so objects from one scene never straddle the split.
  std::vector<int> scenes;
  for (const DsaExample& ex : examples) scenes.push_back(ex.scene_index);
  std::sort(scenes.begin(), scenes.end());
  scenes.erase(std::unique(scenes.begin(), scenes.end()), scenes.end());

  Rng rng(hash_combine(seed, 0xd5a));
  for (size_t i = scenes.size(); i > 1; --i)
    std::swap(scenes[i - 1], scenes[rng.uniform_int(0, int64_t(i) - 1)]);

  size_t n_hold = 0;
  if (scenes.size() >= 2) {
    n_hold = size_t(std::llround(cfg.holdout_fraction * double(scenes.size())));
    n_hold = std::max<size_t>(1, std::min(n_hold, scenes.size() - 1));
  }
  std::vector<int> holdout_scenes(scenes.begin(), scenes.begin() + n_hold);
  std::sort(holdout_scenes.begin(), holdout_scenes.end());
  auto held_out = [&](int scene) {
    return std::binary_search(holdout_scenes.begin(), holdout_scenes.end(),
                              scene);
  };

  std::vector<size_t> train_idx, hold_idx;
  for (size_t i = 0; i < examples.size(); ++i)
    (held_out(examples[i].scene_index) ? hold_idx : train_idx).push_back(i);

  DsaTrainResult res;
  res.regressor = make_dsa_regressor(hash_combine(seed, 0x1417));
  res.holdout_scenes = holdout_scenes;
  res.train_count = train_idx.size();
  res.holdout_count = hold_idx.size();

  DsaRegressor& reg = res.regressor;
  DsaRegressor grad = reg;  // same shape; contents overwritten per step
  std::vector<double> flat, flat_grad;
  Adam adam(param_count(reg));
  Activations act;

  std::vector<size_t> order = train_idx;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(0, int64_t(i) - 1)]);
    for (size_t idx : order) {
      const DsaExample& ex = examples[idx];
      // Gauge augmentation: the per-object fit could have landed at any
      // scale, so shift the object-depth features by a random log factor and
      // demand the equivalently rescaled prediction. This teaches the exact
      // equivariance beta(f + g) = beta(f) * exp(-g).
      double g = rng.uniform(-2.0, 2.0);
      double f[DsaFeatures::kCount];
      std::copy(ex.features.v, ex.features.v + DsaFeatures::kCount, f);
      f[0] += g;
      f[1] += g;
      double c = std::exp(g);
      forward(reg, f, &act);
      double loss = 0.0, dloss = 0.0;
      loss_at(ex, c * act.beta, &loss, &dloss);
      zero_like(&grad);
      backward(reg, f, act, c * dloss, &grad);
      pack_params(reg, &flat);
      pack_params(grad, &flat_grad);
      adam.step(&flat, flat_grad, cfg.learning_rate);
      unpack_params(flat, &reg);
    }
  }

  double train_loss = 0.0;
  for (size_t idx : train_idx) {
    const DsaExample& ex = examples[idx];
    train_loss += scale_loss(ex, reg.predict(ex.features));
  }
  res.final_train_loss =
      train_idx.empty() ? 0.0 : train_loss / double(train_idx.size());

  if (!hold_idx.empty()) {
    std::vector<double> rel;
    for (size_t idx : hold_idx) {
      const DsaExample& ex = examples[idx];
      rel.push_back(std::abs(reg.predict(ex.features) - ex.beta_star) /
                    ex.beta_star);
    }
    res.holdout_median_rel_error = median_inplace(&rel);
  }
  return res;
}

ObjectPartition classify_objects(const std::vector<ObjectHypothesis>& hyps,
                                 const MotionField& delta,
                                 const DepthMap& scene_depth, double theta_m) {
  if (delta.values.size() != scene_depth.values.size() * 3)
    throw InputError("classify_objects: size mismatch");
  std::vector<double> depths;
  for (size_t i = 0; i < scene_depth.values.size(); ++i)
    if (scene_depth.valid[i]) depths.push_back(scene_depth.values[i]);
  if (depths.empty())
    throw DegenerateInputError("classify_objects: no valid scene depth");
  double threshold = theta_m * median_inplace(&depths);

  ObjectPartition part;
  for (size_t h = 0; h < hyps.size(); ++h) {
    const InstanceMask& m = hyps[h].mask_r;
    if (m.mask.size() != scene_depth.values.size())
      throw InputError("classify_objects: mask size mismatch");
    double sum = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < m.mask.size(); ++i) {
      if (!m.mask[i]) continue;
      const double* d = &delta.values[i * 3];
      sum += std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
      ++n;
    }
    double score = n > 0 ? sum / double(n) : 0.0;
    part.motion_score.push_back(score);
    (score > threshold ? part.moving_idx : part.static_idx).push_back(h);
  }
  return part;
}

namespace {

double masked_median_depth(const DepthMap& depth,
                           const std::vector<uint8_t>& mask) {
  std::vector<double> vals;
  for (size_t i = 0; i < depth.values.size(); ++i)
    if (mask[i] && depth.valid[i] && depth.values[i] > 0.0)
      vals.push_back(depth.values[i]);
  if (vals.empty())
    throw DegenerateInputError("dsa: no positive depth under mask");
  return median_inplace(&vals);
}

// Regressor-free scale guess when no ground shows near the object: ratio of
// scene depth on the nearest ground row (or globally, failing that) to the
// object's own median depth.
double fallback_beta(const ObjectHypothesis& hyp, const DepthMap& scene_depth,
                     const BinaryMask& ground, std::string* note) {
  int bottom = -1;
  for (int v = 0; v < hyp.mask_r.height; ++v)
    for (int u = 0; u < hyp.mask_r.width; ++u)
      if (hyp.mask_r.at(u, v)) bottom = std::max(bottom, v);

  double obj_median = masked_median_depth(hyp.depth, hyp.mask_r.mask);

  int best_row = -1;
  for (int dv = 0; dv < ground.height; ++dv) {
    for (int sign : {+1, -1}) {
      int v = bottom + sign * dv;
      if (v < 0 || v >= ground.height) continue;
      for (int u = 0; u < ground.width; ++u)
        if (ground.at(u, v) && scene_depth.is_valid(u, v)) {
          best_row = v;
          break;
        }
      if (best_row >= 0) break;
    }
    if (best_row >= 0) break;
  }

  std::vector<double> vals;
  if (best_row >= 0) {
    for (int u = 0; u < ground.width; ++u)
      if (ground.at(u, best_row) && scene_depth.is_valid(u, best_row))
        vals.push_back(scene_depth.at(u, best_row));
    *note = "object " + std::to_string(hyp.id) +
            ": empty ground patch; scale from ground row " +
            std::to_string(best_row);
  } else {
    for (size_t i = 0; i < scene_depth.values.size(); ++i)
      if (scene_depth.valid[i]) vals.push_back(scene_depth.values[i]);
    *note = "object " + std::to_string(hyp.id) +
            ": no ground visible; scale from global scene depth median";
  }
  if (vals.empty())
    throw DegenerateInputError("dsa fallback: no valid scene depth");
  return median_inplace(&vals) / obj_median;
}

}  // namespace

DynamicComposite infer_dynamic_depth(const std::vector<ObjectHypothesis>& hyps,
                                     const std::vector<size_t>& moving_idx,
                                     const DsaRegressor& regressor,
                                     const DepthMap& scene_depth,
                                     const BinaryMask& ground,
                                     const DsaConfig& cfg) {
  DynamicComposite out;
  out.depth = DepthMap(scene_depth.width, scene_depth.height);
  out.mask = BinaryMask(scene_depth.width, scene_depth.height);

  for (size_t idx : moving_idx) {
    const ObjectHypothesis& hyp = hyps.at(idx);
    if (hyp.depth.values.size() != scene_depth.values.size())
      throw InputError("infer_dynamic_depth: depth size mismatch");

    AlignedObject aligned;
    aligned.id = hyp.id;
    GroundPatch patch = ground_patch_for_object(
        hyp.mask_r, ground, scene_depth, cfg.ground_patch_dilation);
    if (patch.mask.count() == 0) {
      aligned.used_fallback = true;
      aligned.beta =
          fallback_beta(hyp, scene_depth, ground, &aligned.note);
    } else {
      DsaFeatures f = extract_dsa_features(hyp.depth, hyp.mask_r, scene_depth,
                                           patch.mask);
      aligned.beta = regressor.predict(f);
    }

    for (size_t i = 0; i < hyp.depth.values.size(); ++i) {
      if (!hyp.depth.valid[i]) continue;
      out.mask.mask[i] = 1;
      double cand = aligned.beta * hyp.depth.values[i];
      // Nearer aligned depth wins where movers overlap.
      if (!out.depth.valid[i] || cand < out.depth.values[i]) {
        out.depth.values[i] = cand;
        out.depth.valid[i] = 1;
      }
    }
    out.objects.push_back(std::move(aligned));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization.

namespace {

constexpr char kDsaMagic[4] = {'S', 'C', 'D', 'R'};
constexpr uint32_t kDsaVersion = 1;

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
    if (off + sizeof(T) > s.size())
      throw IoError("dsa weights: truncated file");
    T v;
    std::memcpy(&v, s.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
  }
  template <typename T>
  std::vector<T> get_vec() {
    uint64_t len = get<uint64_t>();
    if (off + len * sizeof(T) > s.size())
      throw IoError("dsa weights: truncated file");
    std::vector<T> v(len);
    std::memcpy(v.data(), s.data() + off, len * sizeof(T));
    off += len * sizeof(T);
    return v;
  }
};

}  // namespace

void save_dsa_regressor(const DsaRegressor& reg, const std::string& dir) {
  ensure_directory(dir);
  std::string buf;
  buf.append(kDsaMagic, 4);
  put(&buf, kDsaVersion);
  put(&buf, int32_t(reg.in_dim));
  put(&buf, int32_t(reg.hidden));
  put(&buf, reg.seed);
  put(&buf, dsa_feature_checksum());
  put_vec(&buf, reg.w1);
  put_vec(&buf, reg.b1);
  put_vec(&buf, reg.w2);
  put_vec(&buf, reg.b2);
  put_vec(&buf, reg.w3);
  put_vec(&buf, reg.b3);
  write_text_file(dir + "/dsa.bin", buf);

  nlohmann::json j;
  j["format"] = "dsa_regressor";
  j["version"] = kDsaVersion;
  j["in_dim"] = reg.in_dim;
  j["hidden"] = reg.hidden;
  j["seed"] = reg.seed;
  j["feature_checksum"] = hash_hex(dsa_feature_checksum());
  auto features = nlohmann::json::array();
  for (int i = 0; i < DsaFeatures::kCount; ++i)
    features.push_back({{"index", i}, {"name", DsaFeatures::name(i)}});
  j["features"] = features;
  j["weights_file"] = "dsa.bin";
  write_text_file(dir + "/dsa.json", j.dump(2) + "\n");
}

DsaRegressor load_dsa_regressor(const std::string& dir) {
  std::string buf = read_text_file(dir + "/dsa.bin");
  if (buf.size() < 8 || std::memcmp(buf.data(), kDsaMagic, 4) != 0)
    throw IoError("dsa weights: bad magic in " + dir + "/dsa.bin");
  Reader r{buf, 4};
  uint32_t version = r.get<uint32_t>();
  if (version != kDsaVersion)
    throw IoError("dsa weights: unsupported version " +
                  std::to_string(version));
  DsaRegressor reg;
  reg.in_dim = r.get<int32_t>();
  reg.hidden = r.get<int32_t>();
  reg.seed = r.get<uint64_t>();
  uint64_t checksum = r.get<uint64_t>();
  if (checksum != dsa_feature_checksum())
    throw IoError(
        "dsa weights: feature ordering contract mismatch (file " +
        hash_hex(checksum) + ", expected " + hash_hex(dsa_feature_checksum()) +
        ")");
  if (reg.in_dim != DsaFeatures::kCount || reg.hidden <= 0)
    throw IoError("dsa weights: bad dimensions");
  reg.w1 = r.get_vec<double>();
  reg.b1 = r.get_vec<double>();
  reg.w2 = r.get_vec<double>();
  reg.b2 = r.get_vec<double>();
  reg.w3 = r.get_vec<double>();
  reg.b3 = r.get_vec<double>();
  size_t h = size_t(reg.hidden), in = size_t(reg.in_dim);
  if (reg.w1.size() != h * in || reg.b1.size() != h ||
      reg.w2.size() != h * h || reg.b2.size() != h || reg.w3.size() != h ||
      reg.b3.size() != 1)
    throw IoError("dsa weights: inconsistent layer sizes");
  return reg;
}

}  // namespace scd
