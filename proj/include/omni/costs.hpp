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

// Work accounting and analytical speedup models. Work is counted in block
// pairs and multiply-accumulates, never wall time.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "omni/attention.hpp"
#include "omni/sparse_gemm.hpp"

namespace omni {

// skipped / total. Throws ParameterError when total == 0 or skipped > total.
double sparsity(std::uint64_t skipped, std::uint64_t total);

// N / (1 + (N - 1)(1 - s)): one dense Update plus N - 1 Dispatch passes at
// sparsity s, against N dense passes.
double theoretical_speedup_gemm_o(std::size_t interval_n, double s);

// 1 / (1 - s). Throws ParameterError for s == 1.
double theoretical_speedup_attention(double s);

// Raw counters gathered by the pipeline for one step (summed over layers).
struct StepCounters {
  std::size_t step = 0;
  Phase phase = Phase::kUpdate;
  std::size_t elapsed_k = 0;
  AttentionCounters attn;
  GemmCounters gemm;
  // Pairs the symbols say should be skipped.
  std::uint64_t predicted_pairs_skipped = 0;
  // (head, query block) tiles served from cache, and all tiles.
  std::uint64_t cached_tiles = 0;
  std::uint64_t total_tiles = 0;
  double rel_err = 0.0;
};

struct StepCost {
  std::size_t step = 0;
  Phase phase = Phase::kUpdate;
  std::uint64_t attn_pairs_total = 0;
  std::uint64_t attn_pairs_skipped = 0;
  std::uint64_t gemm_q_macs = 0;
  std::uint64_t gemm_q_macs_dense = 0;
  std::uint64_t gemm_o_macs = 0;
  std::uint64_t gemm_o_macs_dense = 0;
  std::uint64_t gemm_o_bias_macs = 0;
  std::uint64_t cached_tiles = 0;
  std::uint64_t total_tiles = 0;
  double sparsity = 0.0;
  double max_rel_err = 0.0;
};

struct CostReport {
  std::vector<StepCost> steps;

  std::uint64_t attn_pairs_total = 0;
  std::uint64_t attn_pairs_skipped = 0;
  std::uint64_t gemm_q_macs = 0;
  std::uint64_t gemm_q_macs_dense = 0;
  std::uint64_t gemm_o_macs = 0;
  std::uint64_t gemm_o_macs_dense = 0;
  std::uint64_t gemm_o_bias_macs = 0;

  double sparsity = 0.0;           // attention pairs, all steps
  double dispatch_sparsity = 0.0;  // attention pairs, Dispatch steps only
  double cache_sparsity = 0.0;     // cached tiles / tiles, Dispatch steps only
  double max_rel_err = 0.0;
  double mean_rel_err = 0.0;

  std::optional<double> speedup_attention;  // at `sparsity`; empty when 1
  double speedup_gemm_o = 1.0;              // at cache_sparsity
};

// Aggregates per-step counters. Throws InternalError when measured skip
// counts disagree with the symbols or a counter exceeds its dense bound.
CostReport account_run(const std::vector<StepCounters>& steps,
                       std::size_t interval_n);

}  // namespace omni
