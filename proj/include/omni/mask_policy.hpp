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

// Mask generation at Update steps. Everything here works at compressed
// granularity: one row/column per group of pool_n blocks.

#include <cstddef>
#include <span>
#include <vector>

#include "omni/symbols.hpp"
#include "omni/tensor.hpp"

namespace omni {

struct CompressedAttnMap {
  Matrix p_tilde;          // row-softmaxed pooled scores
  std::size_t n_t = 0;     // compressed text blocks (rows and columns)
};

// P~ = softmax(pool(q) pool(k)^T / sqrt(d)). Requires pool_q == pool_k so the
// map is square and text blocks line up on both axes.
CompressedAttnMap compressed_attention(const Matrix& q, const Matrix& k,
                                       std::size_t pool_q, std::size_t pool_k,
                                       std::size_t n_text);

// C_i: mass text query rows place on vision column i. One entry per vision
// block; lower means a better caching candidate.
std::vector<float> vision_to_text_contribution(const CompressedAttnMap& map);

// G_i: column sums of softmax(P~[n_t:, :n_t]^T). One entry per vision block.
std::vector<float> text_to_vision_guidance(const CompressedAttnMap& map);

// Cache mask over all n_t + c.size() compressed query blocks. A vision block
// is cached (bit 0) iff it sits in the ascending-C prefix whose cumulative sum
// stays within tau_q * sum(C) and in the analogous G prefix. Ties go to the
// lower index first. tau_q == 0 caches nothing.
Bits select_cached_blocks(std::span<const float> c, std::span<const float> g,
                          double tau_q, std::size_t n_t);

// Per active row, skips the longest ascending-probability prefix whose
// cumulative mass stays within tau_kv. With `protect` set, text key columns
// and the diagonal block are never skipped. Cached rows come back all zero.
SkipMask select_skip_blocks(const CompressedAttnMap& map,
                            std::span<const std::uint8_t> cache_mask,
                            double tau_kv, bool protect = true);

// Caches every vision block when fewer than s_q of them still compute.
Bits degrade_to_full_cache(std::span<const std::uint8_t> mask, double s_q,
                           std::size_t n_t);

// tau_target * min(1, step / warmup_steps).
double ramp_threshold(double tau_target, std::size_t step,
                      std::size_t warmup_steps);

}  // namespace omni
