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
#include "scdepth/dsa.hpp"
#include "scdepth/scene.hpp"
#include "scdepth/stage.hpp"
#include "scdepth/types.hpp"

namespace scd {

// Scale-consistent depth label: scene-stage depth outside the dynamic mask,
// aligned per-object depth inside it.
struct PseudoLabel {
  DepthMap depth;
  BinaryMask dyn_mask;
  std::vector<AlignedObject> per_object;  // object id -> applied scale
  std::string provenance;  // hashes/notes of the inputs this was built from
};

// Exact masked blend: label = dyn (inside the mask) else scene. Every masked
// pixel must carry valid dynamic depth; violations raise InputError naming
// the offending pixels. Composing twice from the same inputs is bit-identical.
PseudoLabel compose_label(const DepthMap& scene_depth,
                          const DynamicComposite& dyn,
                          const std::string& provenance = "");

// Label directory: depth.pfm + dyn_mask.png + label.json (scale table and
// provenance).
void save_label(const PseudoLabel& label, const std::string& dir);
PseudoLabel load_label(const std::string& dir);

// Fine-tune a converged scene state against the pseudo label: the scene-stage
// objective plus a scale-invariant depth term on the dynamic region (the
// label's own scale is absorbed by a detached median ratio, so scaling the
// label leaves the trace unchanged). Warm-starts every parameter group from
// `init`; never sees ground truth.
SceneStageState distill_final(const RenderedPair& pair,
                              const PseudoLabel& label,
                              const SceneStageState& init,
                              const RunConfig& cfg);

// Self-training: repeatedly use the current prediction as its own label (the
// dynamic mask stays frozen) and re-run the distillation stage. Returns
// states[0] = the unchanged input followed by one state per iteration.
std::vector<SceneStageState> self_train(const RenderedPair& pair,
                                        const SceneStageState& state,
                                        const BinaryMask& dyn_mask,
                                        int iterations, const RunConfig& cfg);

}  // namespace scd
