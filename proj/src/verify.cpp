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

#include "omni/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "omni/attention.hpp"
#include "omni/error.hpp"
#include "omni/pipeline.hpp"
#include "omni/sparse_gemm.hpp"
#include "omni/symbols.hpp"
#include "omni/tensor.hpp"

namespace omni {
namespace {

constexpr double kAttnTol = 1e-5;
constexpr double kBiasTol = 1e-4;

// Random compressed masks with the diagonal kept on every active row.
HeadMasks random_masks(const EngineConfig& c, std::mt19937_64& rng) {
  const std::size_t crows = ceil_div(c.query_blocks(), c.pool_n);
  const std::size_t ccols = ceil_div(c.key_blocks(), c.pool_n);
  std::bernoulli_distribution coin(0.5);
  Bits cache(crows);
  SkipMask skip(crows, ccols, 0);
  for (std::size_t i = 0; i < crows; ++i) {
    cache[i] = coin(rng) ? 1 : 0;
    if (!cache[i]) continue;
    for (std::size_t j = 0; j < ccols; ++j) skip.set(i, j, coin(rng));
    skip.set(i, std::min(i, ccols - 1), true);
  }
  HeadMasks m;
  m.cache = expand_bits(cache, c.pool_n, c.query_blocks());
  m.skip = expand_skip(skip, c.pool_n, c.query_blocks(), c.key_blocks());
  m.symbols = SymbolBuffer::encode(m.cache, m.skip, c.pool_n);
  return m;
}

// Softmax over exactly the unskipped key blocks of query block i, in double.
Matrix masked_tile_oracle(const Matrix& q, const Matrix& k, const Matrix& v,
                          const SkipMask& skip, std::size_t i, std::size_t b_q,
                          std::size_t b_k) {
  const std::size_t r0 = i * b_q;
  const std::size_t r1 = std::min(r0 + b_q, q.rows());
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Matrix out(r1 - r0, v.cols());
  std::vector<double> w(k.rows());
  for (std::size_t r = r0; r < r1; ++r) {
    double mx = -INFINITY;
    for (std::size_t t = 0; t < k.rows(); ++t) {
      if (!skip.at(i, t / b_k)) continue;
      double s = 0.0;
      for (std::size_t e = 0; e < q.cols(); ++e) s += double(q.at(r, e)) * k.at(t, e);
      w[t] = s * scale;
      mx = std::max(mx, w[t]);
    }
    double z = 0.0;
    for (std::size_t t = 0; t < k.rows(); ++t) {
      if (!skip.at(i, t / b_k)) continue;
      w[t] = std::exp(w[t] - mx);
      z += w[t];
    }
    for (std::size_t e = 0; e < v.cols(); ++e) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k.rows(); ++t) {
        if (skip.at(i, t / b_k)) acc += w[t] * v.at(t, e);
      }
      out.at(r - r0, e) = static_cast<float>(acc / z);
    }
  }
  return out;
}

using Check = std::function<std::string(std::uint64_t seed)>;

PropertyResult run_property(const std::string& name, std::size_t trials,
                            std::uint64_t base_seed, const Check& check) {
  PropertyResult result{name, true, "", 0};
  for (std::size_t t = 0; t < trials; ++t) {
    const std::uint64_t seed = base_seed * 1000 + t;
    std::string failure;
    try {
      failure = check(seed);
    } catch (const Error& e) {
      failure = std::string("exception: ") + e.what();
    }
    if (!failure.empty()) {
      result.passed = false;
      result.detail = failure;
      result.seed = seed;
      break;
    }
  }
  return result;
}

}  // namespace

std::vector<PropertyResult> run_verification(const EngineConfig& config,
                                             const VerifyOptions& options) {
  config.validate();
  const EngineConfig& c = config;
  const std::size_t n = c.tokens();
  std::vector<PropertyResult> results;

  results.push_back(run_property(
      "codec roundtrip", options.trials, c.seed, [&](std::uint64_t seed) {
        if (encode_cache_mask(Bits{1, 1, 1, 0, 0}, 1) != Bytes{224}) {
          return std::string("anchor [1,1,1,0,0] did not encode to 224");
        }
        std::mt19937_64 rng(seed);
        HeadMasks m = random_masks(c, rng);
        SymbolBuffer sym = SymbolBuffer::deserialize(m.symbols.serialize());
        if (options.corrupt_symbols) sym.corrupt_skip_bit(0, 7);
        if (sym.cache_mask() != m.cache) return std::string("decode mismatch in s_c");
        for (std::size_t i = 0; i < m.skip.rows(); ++i) {
          const Bits run = sym.row_run(i);
          for (std::size_t j = 0; j < m.skip.cols(); ++j) {
            if (run[j] != m.skip.at(i, j) ||
                sym.compute_pair(i, j) != static_cast<bool>(m.skip.at(i, j))) {
              return "decode mismatch in s_s at (" + std::to_string(i) + ", " +
                     std::to_string(j) + ")";
            }
          }
        }
        return std::string();
      }));

  results.push_back(run_property(
      "dense equivalence", options.trials, c.seed + 1, [&](std::uint64_t seed) {
        const Matrix q = random_normal(n, c.d, 1.0f, seed * 3);
        const Matrix k = random_normal(n, c.d, 1.0f, seed * 3 + 1);
        const Matrix v = random_normal(n, c.d, 1.0f, seed * 3 + 2);
        AttentionParams p;
        p.block_q = c.b_q;
        p.block_k = c.b_k;
        const Matrix got = flashomni_attention(
            q, k, v, SymbolBuffer::all_active(c.query_blocks(), c.key_blocks(), c.pool_n),
            {}, p);
        const double err = relative_error(got, dense_attention(q, k, v));
        if (err > kAttnTol) return "relative error " + std::to_string(err);
        return std::string();
      }));

  results.push_back(run_property(
      "masked-oracle equivalence", options.trials, c.seed + 2,
      [&](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        const Matrix q = random_normal(n, c.d, 1.0f, seed * 3);
        const Matrix k = random_normal(n, c.d, 1.0f, seed * 3 + 1);
        const Matrix v = random_normal(n, c.d, 1.0f, seed * 3 + 2);
        const HeadMasks m = random_masks(c, rng);
        AttentionParams p;
        p.block_q = c.b_q;
        p.block_k = c.b_k;
        p.mode = ReuseMode::kBias;
        AttentionCounters counters;
        const Matrix got = flashomni_attention(q, k, v, m.symbols, {}, p, &counters);
        if (counters.pairs_skipped() != m.skipped_pairs()) {
          return "skipped pairs " + std::to_string(counters.pairs_skipped()) +
                 " != predicted " + std::to_string(m.skipped_pairs());
        }
        for (std::size_t i = 0; i < c.query_blocks(); ++i) {
          if (!m.cache[i]) continue;
          const Matrix want = masked_tile_oracle(q, k, v, m.skip, i, c.b_q, c.b_k);
          const std::size_t r0 = i * c.b_q;
          const double err =
              relative_error(got.slice_rows(r0, r0 + want.rows()), want);
          if (err > kAttnTol) {
            return "tile " + std::to_string(i) + " relative error " +
                   std::to_string(err);
          }
        }
        return std::string();
      }));

  results.push_back(run_property(
      "cached-bias equivalence", options.trials, c.seed + 3,
      [&](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        const std::size_t t_q = c.query_blocks();
        const std::size_t interval = std::max<std::size_t>(c.interval_n, 2);
        const std::size_t order = c.order_d;
        std::vector<Matrix> w_out;
        std::vector<Matrix> o_now;
        std::vector<SymbolBuffer> symbols;
        FeatureCache cache(c.heads, HeadCache(t_q));
        std::bernoulli_distribution coin(0.5);
        for (std::size_t h = 0; h < c.heads; ++h) {
          w_out.push_back(random_normal(c.d, c.d_model, 0.3f, seed * 31 + h));
          for (std::size_t u = 0; u <= order; ++u) {
            const Matrix o = random_normal(n, c.d, 1.0f, seed * 37 + h * 11 + u);
            for (std::size_t i = 0; i < t_q; ++i) {
              const std::size_t r0 = i * c.b_q;
              update_cache(cache[h][i], o.slice_rows(r0, std::min(r0 + c.b_q, n)), order);
            }
            if (u == order) o_now.push_back(o);
          }
          Bits bits(ceil_div(t_q, c.pool_n));
          for (auto& b : bits) b = coin(rng) ? 1 : 0;
          const Bits blocks = expand_bits(bits, c.pool_n, t_q);
          symbols.push_back(SymbolBuffer::encode(
              blocks, SkipMask(t_q, c.key_blocks(), 1), c.pool_n));
        }
        const auto upd = gemm_o_update(o_now, w_out, symbols, cache, c.b_q);
        const std::size_t k = 1 + seed % (interval - 1);
        std::vector<Matrix> o_disp;
        std::vector<Matrix> o_full;
        for (std::size_t h = 0; h < c.heads; ++h) {
          Matrix fresh = random_normal(n, c.d, 1.0f, seed * 41 + h);
          Matrix full = fresh;
          for (std::size_t i = 0; i < t_q; ++i) {
            if (symbols[h].compute_block(i)) continue;
            full.set_rows(i * c.b_q, op_reuse(cache[h][i], k, interval, order));
          }
          o_disp.push_back(std::move(fresh));
          o_full.push_back(std::move(full));
        }
        const Matrix got = gemm_o_dispatch(o_disp, w_out, symbols, upd.bias, k,
                                           interval, order, c.b_q);
        Matrix want(n, c.d_model);
        for (std::size_t h = 0; h < c.heads; ++h) matmul_accumulate(o_full[h], w_out[h], want);
        const double err = relative_error(got, want);
        if (err > kBiasTol) return "relative error " + std::to_string(err);
        return std::string();
      }));

  results.push_back(run_property(
      "zero-sparsity transparency", 1, c.seed + 4, [&](std::uint64_t) {
        EngineConfig dense = c;
        dense.tau_q = 0.0;
        dense.tau_kv = 0.0;
        dense.warmup = 0;
        dense.steps = std::min<std::size_t>(c.steps, 2 * c.interval_n + 1);
        const auto res = run(dense, synthetic_workload(dense.seed, dense, dense.smoothness));
        if (res.report.max_rel_err > kAttnTol) {
          return "max relative error " + std::to_string(res.report.max_rel_err);
        }
        return std::string();
      }));

  results.push_back(run_property(
      "work accounting", 1, c.seed + 5, [&](std::uint64_t) {
        EngineConfig short_run = c;
        short_run.steps = std::min<std::size_t>(c.steps, 2 * c.interval_n + 1);
        // account_run raises InternalError on any counter mismatch.
        const auto res = run(short_run,
                             synthetic_workload(c.seed, short_run, c.smoothness),
                             RunOptions{{}, false});
        const double ratio =
            1.0 - static_cast<double>(res.report.attn_pairs_total -
                                      res.report.attn_pairs_skipped) /
                      static_cast<double>(res.report.attn_pairs_total);
        if (std::abs(ratio - res.report.sparsity) > 1e-12) {
          return std::string("pair ratio disagrees with sparsity");
        }
        return std::string();
      }));

  return results;
}

}  // namespace omni
