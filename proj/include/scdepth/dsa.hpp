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
#include <vector>

#include "scdepth/config.hpp"
#include "scdepth/objects.hpp"
#include "scdepth/types.hpp"

namespace scd {

// Summary features describing one object instance and its ground context.
// Each per-object depth fit carries its own arbitrary scale; these features
// give a regressor everything it needs to recover the missing scale: the
// object's own depth statistics, the scene-scale depth of the ground it
// rests on, and where/how large it appears in the image.
struct DsaFeatures {
  static constexpr int kCount = 9;
  double v[kCount] = {0, 0, 0, 0, 0, 0, 0, 0, 0};

  // Stable ordering contract (index -> meaning); see dsa_feature_checksum.
  static const char* name(int index);
};

// FNV-1a hash of the "index:name" feature ordering contract. Serialized
// alongside trained weights so a reader can detect an incompatible layout.
uint64_t dsa_feature_checksum();

// Ground pixels within the object's bounding box dilated by `dilation`
// pixels, intersected with valid scene depth. `note` is nonempty when the
// patch came up empty.
struct GroundPatch {
  BinaryMask mask;
  std::string note;
};
GroundPatch ground_patch_for_object(const InstanceMask& mask,
                                    const BinaryMask& ground,
                                    const DepthMap& scene_depth, int dilation);

// Features for one object. Throws DegenerateInputError when the mask has no
// pixel with positive valid object depth or when the ground patch is empty.
DsaFeatures extract_dsa_features(const DepthMap& object_depth,
                                 const InstanceMask& mask,
                                 const DepthMap& scene_depth,
                                 const BinaryMask& ground_patch);

// The exact minimizer of sum_i |beta * Do_i - Dscene_i| over mask pixels
// where both depths are valid and Do > 0: the weighted median of the ratios
// Dscene/Do with weights Do. Throws DegenerateInputError when no pixel
// qualifies.
double oracle_beta(const DepthMap& object_depth, const DepthMap& scene_depth,
                   const BinaryMask& mask);

// One training example: features plus the exact scale-loss geometry of the
// instance (ratios sorted ascending with their weights), so the training
// loop can evaluate the alignment loss for any predicted scale in O(log n).
struct DsaExample {
  DsaFeatures features;
  std::vector<double> ratio;   // Dscene/Do, sorted ascending
  std::vector<double> weight;  // matching Do
  double beta_star = 1.0;      // weighted-median minimizer
  int scene_index = 0;         // split unit: holdout is chosen per scene
  int object_id = 0;
};

DsaExample make_dsa_example(const DepthMap& object_depth,
                            const InstanceMask& mask,
                            const DepthMap& scene_depth,
                            const BinaryMask& ground_patch, int scene_index);

// Mean |beta * Do - Dscene| over the example's pixels (weight-normalized
// weighted L1 distance between beta and the ratio distribution).
double scale_loss(const DsaExample& ex, double beta);

// Small fully connected regressor (kCount -> 32 -> 32 -> 1) with a softplus
// head, so the predicted scale is strictly positive for any finite input.
struct DsaRegressor {
  int in_dim = DsaFeatures::kCount;
  int hidden = 32;
  std::vector<double> w1, b1, w2, b2, w3, b3;
  uint64_t seed = 0;

  double predict(const DsaFeatures& f) const;
};

// Seeded random initialization (prediction starts near 1).
DsaRegressor make_dsa_regressor(uint64_t seed);

struct DsaTrainResult {
  DsaRegressor regressor;
  // Mean scale loss over the training examples after training (no gauge
  // augmentation applied when measuring).
  double final_train_loss = 0.0;
  // Median |beta_hat - beta*| / beta* over held-out examples; 0 when the
  // suite has too few scenes to hold any out.
  double holdout_median_rel_error = 0.0;
  size_t train_count = 0;
  size_t holdout_count = 0;
  std::vector<int> holdout_scenes;
};

// Train on static-object examples with the alignment loss evaluated at the
// predicted scale. Scenes (never objects) are split 80/20 into train and
// holdout. Each visit applies a random gauge shift to the object-depth
// features so the learned map is equivariant to the arbitrary per-object
// scale. Deterministic per seed. Throws InputError when fewer than
// cfg.min_examples examples are supplied.
DsaTrainResult train_dsa(const std::vector<DsaExample>& examples,
                         const DsaConfig& cfg, uint64_t seed);

// Split object hypotheses by motion magnitude: an object moves iff the mean
// |delta| over its mask exceeds theta_m * median(valid scene depth).
struct ObjectPartition {
  std::vector<size_t> static_idx, moving_idx;
  std::vector<double> motion_score;  // mean |delta| per hypothesis
};
ObjectPartition classify_objects(const std::vector<ObjectHypothesis>& hyps,
                                 const MotionField& delta,
                                 const DepthMap& scene_depth,
                                 double theta_m = 0.01);

// Scale applied to one object when assembling the dynamic depth layer.
struct AlignedObject {
  int id = 0;
  double beta = 1.0;
  bool used_fallback = false;
  std::string note;  // nonempty when a fallback fired
};

struct DynamicComposite {
  DepthMap depth;   // beta * Do on the union of moving-object masks
  BinaryMask mask;  // that union
  std::vector<AlignedObject> objects;
};

// Predict a scale for every moving object and assemble the aligned dynamic
// depth. Overlapping masks resolve to the nearer aligned depth. Objects with
// an empty ground patch fall back to a regressor-free ratio of median scene
// depth on the nearest ground row to median object depth (noted per object).
DynamicComposite infer_dynamic_depth(const std::vector<ObjectHypothesis>& hyps,
                                     const std::vector<size_t>& moving_idx,
                                     const DsaRegressor& regressor,
                                     const DepthMap& scene_depth,
                                     const BinaryMask& ground,
                                     const DsaConfig& cfg);

// Weights as a versioned binary plus a JSON sidecar documenting the feature
// ordering contract. Loading verifies magic, version, dimensions, and the
// feature checksum.
void save_dsa_regressor(const DsaRegressor& reg, const std::string& dir);
DsaRegressor load_dsa_regressor(const std::string& dir);

}  // namespace scd
