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

#include "omni/mask_policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "omni/error.hpp"

namespace omni {
namespace {

void require_fraction(double tau, const char* name) {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw ParameterError(std::string(name) + " must lie in [0, 1], got " +
                         std::to_string(tau));
  }
}

// Indices sorted by ascending score, lower index first on ties.
std::vector<std::size_t> ascending_order(std::span<const float> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  return order;
}

// Members of the longest ascending prefix with cumulative sum <= budget.
std::vector<std::uint8_t> prefix_set(std::span<const float> scores,
                                     double tau) {
  std::vector<std::uint8_t> in(scores.size(), 0);
  if (tau == 0.0 || scores.empty()) return in;
  const auto order = ascending_order(scores);
  double total = 0.0;
  for (std::size_t idx : order) total += scores[idx];
  const double budget = tau * total;
  double cum = 0.0;
  for (std::size_t idx : order) {
    cum += scores[idx];
    if (cum > budget) break;
    in[idx] = 1;
  }
  return in;
}

}  // namespace

CompressedAttnMap compressed_attention(const Matrix& q, const Matrix& k,
                                       std::size_t pool_q, std::size_t pool_k,
                                       std::size_t n_text) {
  if (pool_q != pool_k) {
    throw ParameterError("compressed_attention: pool_q and pool_k must match");
  }
  if (q.cols() != k.cols() || q.rows() != k.rows()) {
    throw ShapeError("compressed_attention: q and k shapes differ");
  }
  const Matrix pq = mean_pool_blocks(q, pool_q);
  const Matrix pk = mean_pool_blocks(k, pool_k);
  Matrix scores = matmul_transposed(pq, pk);
  scores *= 1.0f / std::sqrt(static_cast<float>(q.cols()));
  CompressedAttnMap map{row_softmax(scores), ceil_div(n_text, pool_q)};
  if (map.n_t > map.p_tilde.rows()) {
    throw ParameterError("compressed_attention: n_text exceeds sequence");
  }
  return map;
}

std::vector<float> vision_to_text_contribution(const CompressedAttnMap& map) {
  const std::size_t m = map.p_tilde.cols();
  std::vector<float> c(m - map.n_t, 0.0f);
  for (std::size_t t = 0; t < map.n_t; ++t) {
    auto row = map.p_tilde.row(t);
    for (std::size_t i = map.n_t; i < m; ++i) c[i - map.n_t] += row[i];
  }
  return c;
}

std::vector<float> text_to_vision_guidance(const CompressedAttnMap& map) {
  const std::size_t n_t = map.n_t;
  const std::size_t n_v = map.p_tilde.rows() - n_t;
  std::vector<float> g(n_v, 0.0f);
  if (n_t == 0 || n_v == 0) return g;
  // beta = softmax over vision blocks of each text column of P~[n_t:, :n_t].
  std::vector<float> row(n_v);
  for (std::size_t t = 0; t < n_t; ++t) {
    for (std::size_t i = 0; i < n_v; ++i) row[i] = map.p_tilde.at(n_t + i, t);
    softmax_inplace(row);
    for (std::size_t i = 0; i < n_v; ++i) g[i] += row[i];
  }
  return g;
}

Bits select_cached_blocks(std::span<const float> c, std::span<const float> g,
                          double tau_q, std::size_t n_t) {
  require_fraction(tau_q, "tau_q");
  if (c.size() != g.size()) {
    throw ShapeError("select_cached_blocks: C and G lengths differ");
  }
  const auto by_c = prefix_set(c, tau_q);
  const auto by_g = prefix_set(g, tau_q);
  Bits mask(n_t + c.size(), 1);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (by_c[i] && by_g[i]) mask[n_t + i] = 0;
  }
  return mask;
}

SkipMask select_skip_blocks(const CompressedAttnMap& map,
                            std::span<const std::uint8_t> cache_mask,
                            double tau_kv, bool protect) {
  require_fraction(tau_kv, "tau_kv");
  const Matrix& p = map.p_tilde;
  if (cache_mask.size() != p.rows()) {
    throw ShapeError("select_skip_blocks: cache mask length mismatch");
  }
  SkipMask skip(p.rows(), p.cols(), 1);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    if (!cache_mask[i]) {
      for (std::size_t j = 0; j < p.cols(); ++j) skip.set(i, j, false);
      continue;
    }
    if (tau_kv == 0.0) continue;
    auto row = p.row(i);
    candidates.clear();
    for (std::size_t j = 0; j < p.cols(); ++j) {
      if (protect && (j < map.n_t || j == i)) continue;
      candidates.push_back(j);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return row[a] < row[b]; });
    // Without protection the heaviest block must survive.
    const std::size_t limit =
        (!protect && candidates.size() == p.cols()) ? candidates.size() - 1
                                                    : candidates.size();
    double cum = 0.0;
    for (std::size_t n = 0; n < limit; ++n) {
      cum += row[candidates[n]];
      if (cum > tau_kv) break;
      skip.set(i, candidates[n], false);
    }
  }
  return skip;
}

Bits degrade_to_full_cache(std::span<const std::uint8_t> mask, double s_q,
                           std::size_t n_t) {
  require_fraction(s_q, "s_q");
  Bits out(mask.begin(), mask.end());
  if (n_t >= mask.size()) return out;
  const std::size_t n_v = mask.size() - n_t;
  std::size_t computing = 0;
  for (std::size_t i = n_t; i < mask.size(); ++i) computing += mask[i] ? 1 : 0;
  const double fraction = static_cast<double>(computing) /
                          static_cast<double>(n_v);
  if (fraction < s_q) {
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(n_t), out.end(), 0);
  }
  return out;
}

double ramp_threshold(double tau_target, std::size_t step,
                      std::size_t warmup_steps) {
  if (warmup_steps == 0 || step >= warmup_steps) return tau_target;
  return tau_target * static_cast<double>(step) /
         static_cast<double>(warmup_steps);
}

}  // namespace omni
