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

// Query and output projections that honor the cache symbols.
//
// GEMM-Q skips the rows of cached query blocks at Dispatch steps. GEMM-O
// splits the output projection at Update steps: heads about to be cached are
// projected once per forecast order into a per-block bias stack, so Dispatch
// steps only project the heads that were recomputed and add the forecast bias.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "omni/attention.hpp"
#include "omni/symbols.hpp"
#include "omni/tensor.hpp"

namespace omni {

enum class Phase { kUpdate, kDispatch };

const char* phase_name(Phase phase);

struct GemmCounters {
  std::uint64_t q_macs = 0;
  std::uint64_t q_macs_dense = 0;
  std::uint64_t o_macs = 0;        // per-head tile projections into Out
  std::uint64_t o_macs_dense = 0;
  std::uint64_t o_bias_macs = 0;   // higher-order bias projections + combine

  GemmCounters& operator+=(const GemmCounters& o);
};

// Projection + RMSNorm + RoPE for one head. At kUpdate every row is written.
// At kDispatch only rows of blocks with cache bit 1 are written; the others
// keep whatever `out` held (NaN when `poison_skipped`).
void gemm_q(const Matrix& x, const Matrix& w_q, std::span<const float> norm_weight,
            float eps, const SymbolBuffer& symbols, std::size_t block_q,
            Phase phase, Matrix& out, GemmCounters* counters = nullptr,
            bool poison_skipped = false);

// Dense projection + RMSNorm + RoPE over all rows (keys, and queries at
// Update steps).
Matrix project_normed(const Matrix& x, const Matrix& w,
                      std::span<const float> norm_weight, float eps);

struct CachedBias {
  // stacks[i][d]: sum over cached heads of diff_stack[d] * W_out, for block i.
  std::vector<std::vector<Matrix>> stacks;
  // active[i][h] == 1 iff head h recomputes block i (h in H_i).
  std::vector<Bits> active;

  bool has_cached(std::size_t block) const { return !stacks[block].empty(); }
};

struct GemmOUpdateResult {
  Matrix out;
  CachedBias bias;
};

// Update-step output projection. `cache` must already hold this step's
// outputs in diff_stack[0] for every (head, block); `next_symbols` are the
// symbols that govern the following Dispatch steps.
GemmOUpdateResult gemm_o_update(std::span<const Matrix> o_heads,
                                std::span<const Matrix> w_out,
                                std::span<const SymbolBuffer> next_symbols,
                                const FeatureCache& cache, std::size_t block_q,
                                GemmCounters* counters = nullptr);

// Dispatch-step output projection: forecast bias plus the recomputed heads.
// Rows of cached (head, block) tiles in `o_heads` are never read.
Matrix gemm_o_dispatch(std::span<const Matrix> o_heads,
                       std::span<const Matrix> w_out,
                       std::span<const SymbolBuffer> symbols,
                       const CachedBias& bias, std::size_t elapsed_k,
                       std::size_t interval_n, std::size_t order_d,
                       std::size_t block_q, GemmCounters* counters = nullptr);

}  // namespace omni
