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

#include "omni/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "omni/error.hpp"

namespace omni {

void update_cache(FeatureCacheEntry& entry, const Matrix& o_new,
                  std::size_t order_d, std::size_t step) {
  if (entry.warm() && (entry.diff_stack[0].rows() != o_new.rows() ||
                       entry.diff_stack[0].cols() != o_new.cols())) {
    throw ShapeError("update_cache: tile shape changed between updates");
  }
  const std::size_t keep = std::min(entry.valid_orders() + 1, order_d + 1);
  std::vector<Matrix> next;
  next.reserve(keep);
  next.push_back(o_new);
  for (std::size_t d = 1; d < keep; ++d) {
    next.push_back(next[d - 1] - entry.diff_stack[d - 1]);
  }
  entry.diff_stack = std::move(next);
  entry.last_update_step = step;
}

std::vector<float> reuse_coefficients(std::size_t elapsed_k,
                                      std::size_t interval_n,
                                      std::size_t order_d,
                                      std::size_t valid_orders) {
  if (valid_orders == 0) throw StateError("op_reuse: cache entry is cold");
  if (interval_n == 0) throw ParameterError("op_reuse: interval_n must be >= 1");
  const std::size_t orders = std::min(order_d + 1, valid_orders);
  std::vector<float> coeff(orders);
  const double x = static_cast<double>(elapsed_k) /
                   static_cast<double>(interval_n);
  double term = 1.0;
  for (std::size_t d = 0; d < orders; ++d) {
    if (d > 0) term *= x / static_cast<double>(d);
    coeff[d] = static_cast<float>(term);
  }
  return coeff;
}

Matrix combine_stack(std::span<const Matrix> stack,
                     std::span<const float> coefficients) {
  if (coefficients.empty() || coefficients.size() > stack.size()) {
    throw StateError("combine_stack: stack shorter than coefficient list");
  }
  Matrix out = stack[0];
  if (coefficients[0] != 1.0f) out *= coefficients[0];
  for (std::size_t d = 1; d < coefficients.size(); ++d) {
    const float c = coefficients[d];
    auto dst = out.data();
    auto src = stack[d].data();
    if (src.size() != dst.size()) throw ShapeError("combine_stack: ragged stack");
    for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += c * src[e];
  }
  return out;
}

Matrix op_reuse(const FeatureCacheEntry& entry, std::size_t elapsed_k,
                std::size_t interval_n, std::size_t order_d) {
  if (!entry.warm()) throw StateError("op_reuse: cache entry is cold");
  if (elapsed_k < 1 || elapsed_k >= interval_n) {
    throw ParameterError("op_reuse: elapsed_k " + std::to_string(elapsed_k) +
                         " outside [1, " + std::to_string(interval_n) + ")");
  }
  const auto coeff = reuse_coefficients(elapsed_k, interval_n, order_d,
                                        entry.valid_orders());
  return combine_stack(entry.diff_stack, coeff);
}

OnlineSoftmaxState::OnlineSoftmaxState(std::size_t rows, std::size_t d)
    : m(rows, -std::numeric_limits<float>::infinity()),
      l(rows, 0.0f),
      acc(rows, d) {}

Matrix OnlineSoftmaxState::finalize() const {
  Matrix out = acc;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    if (!(l[r] > 0.0f)) {
      throw PolicyError("online softmax: row finalized without any key block");
    }
    const float inv = 1.0f / l[r];
    for (float& x : out.row(r)) x *= inv;
  }
  return out;
}

void online_softmax_update(OnlineSoftmaxState& state, const Matrix& scores,
                           const Matrix& v_block) {
  if (scores.rows() != state.acc.rows() || scores.cols() != v_block.rows() ||
      v_block.cols() != state.acc.cols()) {
    throw ShapeError("online_softmax_update: block shapes disagree");
  }
  std::vector<float> p(scores.cols());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    auto s = scores.row(r);
    const float m_new = std::max(state.m[r], *std::max_element(s.begin(), s.end()));
    // exp(-inf) = 0 on the first block.
    const float rescale = std::exp(state.m[r] - m_new);
    float row_sum = 0.0f;
    for (std::size_t c = 0; c < s.size(); ++c) {
      p[c] = std::exp(s[c] - m_new);
      row_sum += p[c];
    }
    state.l[r] = state.l[r] * rescale + row_sum;
    state.m[r] = m_new;
    auto acc = state.acc.row(r);
    for (float& a : acc) a *= rescale;
    for (std::size_t c = 0; c < s.size(); ++c) {
      auto vr = v_block.row(c);
      const float w = p[c];
      for (std::size_t e = 0; e < acc.size(); ++e) acc[e] += w * vr[e];
    }
  }
}

AttentionCounters& AttentionCounters::operator+=(const AttentionCounters& o) {
  pairs_total += o.pairs_total;
  pairs_computed += o.pairs_computed;
  tiles_cached += o.tiles_cached;
  tiles_computed += o.tiles_computed;
  score_macs += o.score_macs;
  return *this;
}

Matrix flashomni_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                           const SymbolBuffer& symbols,
                           std::span<const FeatureCacheEntry> cache,
                           const AttentionParams& params,
                           AttentionCounters* counters) {
  if (q.cols() != k.cols() || k.cols() != v.cols() || k.rows() != v.rows()) {
    throw ShapeError("flashomni_attention: q/k/v shapes disagree");
  }
  if (params.block_q == 0 || params.block_k == 0) {
    throw ParameterError("flashomni_attention: block sizes must be >= 1");
  }
  const std::size_t n_q = q.rows();
  const std::size_t n_kv = k.rows();
  const std::size_t d = q.cols();
  const std::size_t t_q = ceil_div(n_q, params.block_q);
  const std::size_t t_kv = ceil_div(n_kv, params.block_k);
  if (symbols.rows() != t_q || symbols.cols() != t_kv) {
    throw ShapeError("flashomni_attention: symbols sized " +
                     std::to_string(symbols.rows()) + "x" +
                     std::to_string(symbols.cols()) + ", need " +
                     std::to_string(t_q) + "x" + std::to_string(t_kv));
  }
  const float scale = 1.0f / std::sqrt(static_cast<float>(d));

  Matrix out(n_q, d);
  if (params.poison_unwritten) {
    std::fill(out.data().begin(), out.data().end(),
              std::numeric_limits<float>::quiet_NaN());
  }
  AttentionCounters local;
  local.pairs_total = static_cast<std::uint64_t>(t_q) * t_kv;

  // Key blocks are sliced once and shared by every query tile.
  std::vector<Matrix> k_blocks(t_kv);
  std::vector<Matrix> v_blocks(t_kv);

  for (std::size_t i = 0; i < t_q; ++i) {
    const std::size_t r0 = i * params.block_q;
    const std::size_t r1 = std::min(r0 + params.block_q, n_q);
    if (!symbols.compute_block(i)) {
      // Cache-then-reuse.
      ++local.tiles_cached;
      if (params.mode == ReuseMode::kBias) continue;
      if (i >= cache.size() || !cache[i].warm()) {
        throw StateError("flashomni_attention: cached tile " +
                         std::to_string(i) + " has a cold cache");
      }
      const Matrix tile = op_reuse(cache[i], params.elapsed_k,
                                   params.interval_n, params.order_d);
      if (tile.rows() != r1 - r0 || tile.cols() != d) {
        throw ShapeError("flashomni_attention: cached tile shape mismatch");
      }
      out.set_rows(r0, tile);
      continue;
    }
    // Compute-on-demand. The skip row is decoded once for the whole loop.
    ++local.tiles_computed;
    const Bits run = symbols.row_run(i);
    const Matrix q_tile = q.slice_rows(r0, r1);
    OnlineSoftmaxState state(r1 - r0, d);
    bool any = false;
    for (std::size_t j = 0; j < t_kv; ++j) {
      if (!run[j]) continue;
      if (k_blocks[j].empty()) {
        const std::size_t c0 = j * params.block_k;
        const std::size_t c1 = std::min(c0 + params.block_k, n_kv);
        k_blocks[j] = k.slice_rows(c0, c1);
        v_blocks[j] = v.slice_rows(c0, c1);
      }
      Matrix scores = matmul_transposed(q_tile, k_blocks[j]);
      scores *= scale;
      online_softmax_update(state, scores, v_blocks[j]);
      any = true;
      ++local.pairs_computed;
      local.score_macs += 2ull * q_tile.rows() * k_blocks[j].rows() * d;
    }
    if (!any) {
      throw PolicyError("flashomni_attention: active query block " +
                        std::to_string(i) + " skips every key block");
    }
    out.set_rows(r0, state.finalize());
  }
  if (counters != nullptr) *counters += local;
  return out;
}

}  // namespace omni
