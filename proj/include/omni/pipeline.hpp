// Copyright 2026 The omnisparse Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Update-Dispatch scheduler. Every interval_n-th step refreshes symbols,
// caches and cached biases with full computation; the steps in between run
// the sparse paths against that state.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "omni/attention.hpp"
#include "omni/config.hpp"
#include "omni/costs.hpp"
#include "omni/mask_policy.hpp"
#include "omni/sparse_gemm.hpp"
#include "omni/symbols.hpp"
#include "omni/tensor.hpp"
#include "omni/workload.hpp"

namespace omni {

struct LayerWeights {
  std::vector<Matrix> w_q;   // [heads] d_model x d
  std::vector<Matrix> w_k;
  std::vector<Matrix> w_v;
  std::vector<Matrix> w_out; // [heads] d x d_model
  std::vector<std::vector<float>> q_norm;  // [heads] d
  std::vector<std::vector<float>> k_norm;

  static LayerWeights random(const EngineConfig& config, std::size_t layer);
};

// Masks for one head at block granularity together with their packed form.
struct HeadMasks {
  Bits cache;
  SkipMask skip;
  SymbolBuffer symbols;

  // Block pairs the masks mark as skipped (cached rows count in full).
  std::uint64_t skipped_pairs() const;
};

// Mask policy chain for one head: pooled map, C/G metrics, ramped cache
// selection, degradation, skip selection, expansion and encoding.
HeadMasks generate_masks(const Matrix& q, const Matrix& k,
                         const EngineConfig& config, std::size_t step);

inline bool is_update_step(std::size_t step, std::size_t interval_n) {
  return step % interval_n == 0;
}

struct LayerState {
  std::vector<HeadMasks> masks;  // governs Dispatch steps
  FeatureCache cache;
  CachedBias bias;
  std::size_t updates = 0;
  std::size_t last_update = 0;
};

struct PipelineOptions {
  std::size_t threads = 1;
  // NaN-fill skipped placeholder rows so illegal reads show up in outputs.
  bool poison = false;
};

class Pipeline {
 public:
  explicit Pipeline(EngineConfig config, PipelineOptions options = {});

  // Runs one step through every layer; returns the last layer's output.
  Matrix step(const Matrix& x, std::size_t t, StepCounters& counters);
  Matrix update_step(const Matrix& x, std::size_t t, StepCounters& counters);
  Matrix dispatch_step(const Matrix& x, std::size_t t, std::size_t elapsed_k,
                       StepCounters& counters);

  const EngineConfig& config() const { return config_; }
  const LayerWeights& weights(std::size_t layer) const { return weights_[layer]; }
  const LayerState& state(std::size_t layer) const { return states_[layer]; }
  LayerState& mutable_state(std::size_t layer) { return states_[layer]; }
  const std::vector<LayerWeights>& all_weights() const { return weights_; }

 private:
  Matrix update_layer(std::size_t layer, const Matrix& x, std::size_t t,
                      StepCounters& counters);
  Matrix dispatch_layer(std::size_t layer, const Matrix& x,
                        std::size_t elapsed_k, StepCounters& counters);

  EngineConfig config_;
  PipelineOptions options_;
  std::vector<LayerWeights> weights_;
  std::vector<LayerState> states_;
};

// Reference forward pass with dense attention and dense projections.
Matrix dense_forward(const std::vector<LayerWeights>& weights,
                     const EngineConfig& config, const Matrix& x);

struct RunResult {
  std::vector<Matrix> outputs;
  std::vector<Matrix> dense_outputs;  // empty unless compare_dense
  std::vector<StepCounters> counters;
  CostReport report;
};

struct RunOptions {
  PipelineOptions pipeline;
  bool compare_dense = true;
};

RunResult run(const EngineConfig& config, const SyntheticWorkload& workload,
              const RunOptions& options = {});

}  // namespace omni
