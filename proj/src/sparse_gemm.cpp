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

#include "omni/sparse_gemm.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "omni/error.hpp"

namespace omni {
namespace {

// rows [r0, r1) of x * w, accumulated into dst rows [r0, r1).
void project_rows(const Matrix& x, const Matrix& w, std::size_t r0,
                  std::size_t r1, Matrix& dst, bool accumulate) {
  for (std::size_t r = r0; r < r1; ++r) {
    auto out = dst.row(r);
    if (!accumulate) std::fill(out.begin(), out.end(), 0.0f);
    auto lhs = x.row(r);
    for (std::size_t p = 0; p < lhs.size(); ++p) {
      const float s = lhs[p];
      auto rhs = w.row(p);
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += s * rhs[j];
    }
  }
}

void normalize_rows(Matrix& m, std::size_t r0, std::size_t r1,
                    std::span<const float> norm_weight, float eps) {
  for (std::size_t r = r0; r < r1; ++r) {
    rms_norm_inplace(m.row(r), norm_weight, eps);
    rope_inplace(m.row(r), r);
  }
}

void check_heads(std::span<const Matrix> o_heads, std::span<const Matrix> w_out,
                 std::span<const SymbolBuffer> symbols, std::size_t block_q) {
  if (o_heads.empty() || o_heads.size() != w_out.size() ||
      o_heads.size() != symbols.size()) {
    throw ShapeError("gemm_o: head counts of outputs/weights/symbols differ");
  }
  if (block_q == 0) throw ParameterError("gemm_o: block_q must be >= 1");
  const std::size_t n = o_heads[0].rows();
  const std::size_t width = w_out[0].cols();
  for (std::size_t h = 0; h < o_heads.size(); ++h) {
    if (o_heads[h].rows() != n || o_heads[h].cols() != w_out[h].rows() ||
        w_out[h].cols() != width) {
      throw ShapeError("gemm_o: head " + std::to_string(h) + " shape mismatch");
    }
    if (symbols[h].rows() != ceil_div(n, block_q)) {
      throw ShapeError("gemm_o: symbols for head " + std::to_string(h) +
                       " do not match the block count");
    }
  }
}

}  // namespace

const char* phase_name(Phase phase) {
  return phase == Phase::kUpdate ? "update" : "dispatch";
}

GemmCounters& GemmCounters::operator+=(const GemmCounters& o) {
  q_macs += o.q_macs;
  q_macs_dense += o.q_macs_dense;
  o_macs += o.o_macs;
  o_macs_dense += o.o_macs_dense;
  o_bias_macs += o.o_bias_macs;
  return *this;
}

Matrix project_normed(const Matrix& x, const Matrix& w,
                      std::span<const float> norm_weight, float eps) {
  Matrix out = matmul(x, w);
  normalize_rows(out, 0, out.rows(), norm_weight, eps);
  return out;
}

void gemm_q(const Matrix& x, const Matrix& w_q, std::span<const float> norm_weight,
            float eps, const SymbolBuffer& symbols, std::size_t block_q,
            Phase phase, Matrix& out, GemmCounters* counters,
            bool poison_skipped) {
  if (x.cols() != w_q.rows()) throw ShapeError("gemm_q: x width != w_q rows");
  if (block_q == 0) throw ParameterError("gemm_q: block_q must be >= 1");
  const std::size_t n = x.rows();
  const std::size_t d = w_q.cols();
  if (out.rows() != n || out.cols() != d) out = Matrix(n, d);
  const std::size_t t_q = ceil_div(n, block_q);
  if (phase == Phase::kDispatch && symbols.rows() != t_q) {
    throw ShapeError("gemm_q: symbols do not match the block count");
  }
  const std::uint64_t row_macs = static_cast<std::uint64_t>(x.cols()) * d;
  std::uint64_t macs = 0;
  for (std::size_t i = 0; i < t_q; ++i) {
    const std::size_t r0 = i * block_q;
    const std::size_t r1 = std::min(r0 + block_q, n);
    if (phase == Phase::kDispatch && !symbols.compute_block(i)) {
      // The tile exits without touching its rows.
      if (poison_skipped) {
        for (std::size_t r = r0; r < r1; ++r) {
          auto row = out.row(r);
          std::fill(row.begin(), row.end(),
                    std::numeric_limits<float>::quiet_NaN());
        }
      }
      continue;
    }
    project_rows(x, w_q, r0, r1, out, false);
    normalize_rows(out, r0, r1, norm_weight, eps);
    macs += (r1 - r0) * row_macs;
  }
  if (counters != nullptr) {
    counters->q_macs += macs;
    counters->q_macs_dense += n * row_macs;
  }
}

GemmOUpdateResult gemm_o_update(std::span<const Matrix> o_heads,
                                std::span<const Matrix> w_out,
                                std::span<const SymbolBuffer> next_symbols,
                                const FeatureCache& cache, std::size_t block_q,
                                GemmCounters* counters) {
  check_heads(o_heads, w_out, next_symbols, block_q);
  const std::size_t heads = o_heads.size();
  const std::size_t n = o_heads[0].rows();
  const std::size_t d = o_heads[0].cols();
  const std::size_t width = w_out[0].cols();
  const std::size_t t_q = ceil_div(n, block_q);
  if (cache.size() != heads) throw ShapeError("gemm_o_update: cache head count");

  GemmOUpdateResult result{Matrix(n, width), {}};
  CachedBias& bias = result.bias;
  bias.stacks.resize(t_q);
  bias.active.assign(t_q, Bits(heads, 1));
  GemmCounters local;
  local.o_macs_dense = static_cast<std::uint64_t>(n) * heads * d * width;

  for (std::size_t i = 0; i < t_q; ++i) {
    const std::size_t r0 = i * block_q;
    const std::size_t r1 = std::min(r0 + block_q, n);
    const std::uint64_t tile_macs = static_cast<std::uint64_t>(r1 - r0) * d * width;

    // Stage 1: project every stored order of the to-be-cached heads.
    std::size_t orders = 0;
    for (std::size_t h = 0; h < heads; ++h) {
      if (next_symbols[h].compute_block(i)) continue;
      bias.active[i][h] = 0;
      if (cache[h].size() != t_q || !cache[h][i].warm()) {
        throw StateError("gemm_o_update: head " + std::to_string(h) +
                         " block " + std::to_string(i) + " has a cold cache");
      }
      const auto& stack = cache[h][i].diff_stack;
      if (orders == 0) {
        orders = stack.size();
        bias.stacks[i].assign(orders, Matrix(r1 - r0, width));
      } else if (stack.size() != orders) {
        throw InternalError("gemm_o_update: heads disagree on cached orders");
      }
      for (std::size_t k = 0; k < orders; ++k) {
        matmul_accumulate(stack[k], w_out[h], bias.stacks[i][k]);
      }
      local.o_macs += tile_macs;
      local.o_bias_macs += (orders - 1) * tile_macs;
    }

    // Stage 2: order-0 bias already holds the cached heads' current output.
    if (bias.has_cached(i)) result.out.set_rows(r0, bias.stacks[i][0]);
    for (std::size_t h = 0; h < heads; ++h) {
      if (!bias.active[i][h]) continue;
      project_rows(o_heads[h], w_out[h], r0, r1, result.out, true);
      local.o_macs += tile_macs;
    }
  }
  if (counters != nullptr) *counters += local;
  return result;
}

Matrix gemm_o_dispatch(std::span<const Matrix> o_heads,
                       std::span<const Matrix> w_out,
                       std::span<const SymbolBuffer> symbols,
                       const CachedBias& bias, std::size_t elapsed_k,
                       std::size_t interval_n, std::size_t order_d,
                       std::size_t block_q, GemmCounters* counters) {
  check_heads(o_heads, w_out, symbols, block_q);
  const std::size_t heads = o_heads.size();
  const std::size_t n = o_heads[0].rows();
  const std::size_t d = o_heads[0].cols();
  const std::size_t width = w_out[0].cols();
  const std::size_t t_q = ceil_div(n, block_q);
  if (bias.stacks.size() != t_q || bias.active.size() != t_q) {
    throw StateError("gemm_o_dispatch: bias missing or sized for another shape");
  }
  if (elapsed_k < 1 || elapsed_k >= interval_n) {
    throw ParameterError("gemm_o_dispatch: elapsed_k " +
                         std::to_string(elapsed_k) + " outside [1, " +
                         std::to_string(interval_n) + ")");
  }

  Matrix out(n, width);
  GemmCounters local;
  local.o_macs_dense = static_cast<std::uint64_t>(n) * heads * d * width;
  for (std::size_t i = 0; i < t_q; ++i) {
    const std::size_t r0 = i * block_q;
    const std::size_t r1 = std::min(r0 + block_q, n);
    bool any_cached = false;
    for (std::size_t h = 0; h < heads; ++h) {
      const bool active = symbols[h].compute_block(i);
      if (bias.active[i].size() != heads ||
          (bias.active[i][h] != 0) != active) {
        throw StateError("gemm_o_dispatch: bias was built for different symbols");
      }
      any_cached = any_cached || !active;
    }
    if (any_cached) {
      if (!bias.has_cached(i)) throw StateError("gemm_o_dispatch: missing bias");
      const auto coeff = reuse_coefficients(elapsed_k, interval_n, order_d,
                                            bias.stacks[i].size());
      out.set_rows(r0, combine_stack(bias.stacks[i], coeff));
      local.o_bias_macs += coeff.size() * (r1 - r0) * width;
    }
    for (std::size_t h = 0; h < heads; ++h) {
      if (!bias.active[i][h]) continue;
      project_rows(o_heads[h], w_out[h], r0, r1, out, true);
      local.o_macs += static_cast<std::uint64_t>(r1 - r0) * d * width;
    }
  }
  if (counters != nullptr) *counters += local;
  return out;
}

}  // namespace omni
