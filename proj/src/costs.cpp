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

#include "omni/costs.hpp"

#include <algorithm>
#include <string>

#include "omni/error.hpp"

namespace omni {

double sparsity(std::uint64_t skipped, std::uint64_t total) {
  if (total == 0) throw ParameterError("sparsity: total must be > 0");
  if (skipped > total) throw ParameterError("sparsity: skipped exceeds total");
  return static_cast<double>(skipped) / static_cast<double>(total);
}

double theoretical_speedup_gemm_o(std::size_t interval_n, double s) {
  if (interval_n < 1) throw ParameterError("speedup: interval must be >= 1");
  if (!(s >= 0.0 && s <= 1.0)) throw ParameterError("speedup: s outside [0, 1]");
  const double n = static_cast<double>(interval_n);
  return n / (1.0 + (n - 1.0) * (1.0 - s));
}

double theoretical_speedup_attention(double s) {
  if (!(s >= 0.0 && s < 1.0)) {
    throw ParameterError("attention speedup: s must lie in [0, 1)");
  }
  return 1.0 / (1.0 - s);
}

CostReport account_run(const std::vector<StepCounters>& steps,
                       std::size_t interval_n) {
  CostReport report;
  std::uint64_t dispatch_total = 0;
  std::uint64_t dispatch_skipped = 0;
  std::uint64_t dispatch_tiles = 0;
  std::uint64_t dispatch_cached = 0;
  double err_sum = 0.0;

  for (const StepCounters& s : steps) {
    const auto& a = s.attn;
    const auto& g = s.gemm;
    const std::string where = "step " + std::to_string(s.step) + ": ";
    if (a.pairs_computed > a.pairs_total) {
      throw InternalError(where + "computed pairs exceed total");
    }
    if (a.pairs_skipped() != s.predicted_pairs_skipped) {
      throw InternalError(where + "measured skipped pairs " +
                          std::to_string(a.pairs_skipped()) +
                          " != predicted " +
                          std::to_string(s.predicted_pairs_skipped));
    }
    if (g.q_macs > g.q_macs_dense || g.o_macs > g.o_macs_dense) {
      throw InternalError(where + "GEMM work exceeds the dense bound");
    }
    if (s.cached_tiles > s.total_tiles) {
      throw InternalError(where + "cached tiles exceed total");
    }

    StepCost row;
    row.step = s.step;
    row.phase = s.phase;
    row.attn_pairs_total = a.pairs_total;
    row.attn_pairs_skipped = a.pairs_skipped();
    row.gemm_q_macs = g.q_macs;
    row.gemm_q_macs_dense = g.q_macs_dense;
    row.gemm_o_macs = g.o_macs;
    row.gemm_o_macs_dense = g.o_macs_dense;
    row.gemm_o_bias_macs = g.o_bias_macs;
    row.cached_tiles = s.cached_tiles;
    row.total_tiles = s.total_tiles;
    row.sparsity = a.pairs_total > 0 ? sparsity(row.attn_pairs_skipped, a.pairs_total) : 0.0;
    row.max_rel_err = s.rel_err;
    report.steps.push_back(row);

    report.attn_pairs_total += row.attn_pairs_total;
    report.attn_pairs_skipped += row.attn_pairs_skipped;
    report.gemm_q_macs += row.gemm_q_macs;
    report.gemm_q_macs_dense += row.gemm_q_macs_dense;
    report.gemm_o_macs += row.gemm_o_macs;
    report.gemm_o_macs_dense += row.gemm_o_macs_dense;
    report.gemm_o_bias_macs += row.gemm_o_bias_macs;
    report.max_rel_err = std::max(report.max_rel_err, s.rel_err);
    err_sum += s.rel_err;
    if (s.phase == Phase::kDispatch) {
      dispatch_total += row.attn_pairs_total;
      dispatch_skipped += row.attn_pairs_skipped;
      dispatch_tiles += s.total_tiles;
      dispatch_cached += s.cached_tiles;
    }
  }

  if (report.attn_pairs_total > 0) {
    report.sparsity = sparsity(report.attn_pairs_skipped, report.attn_pairs_total);
  }
  if (dispatch_total > 0) {
    report.dispatch_sparsity = sparsity(dispatch_skipped, dispatch_total);
  }
  if (dispatch_tiles > 0) {
    report.cache_sparsity = sparsity(dispatch_cached, dispatch_tiles);
  }
  if (!steps.empty()) err_sum /= static_cast<double>(steps.size());
  report.mean_rel_err = err_sum;
  if (report.sparsity < 1.0) {
    report.speedup_attention = theoretical_speedup_attention(report.sparsity);
  }
  report.speedup_gemm_o = theoretical_speedup_gemm_o(interval_n, report.cache_sparsity);
  return report;
}

}  // namespace omni
