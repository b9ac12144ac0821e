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

#include "omni/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "omni/error.hpp"
#include "omni/parallel.hpp"

namespace omni {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t weight_seed(std::uint64_t seed, std::size_t layer,
                          std::size_t head, std::size_t slot) {
  return splitmix64(splitmix64(splitmix64(seed ^ 0x5eedull) + layer) +
                    head * 16 + slot);
}

std::vector<float> norm_weight(std::size_t d, std::uint64_t seed) {
  const Matrix noise = random_normal(1, d, 0.1f, seed);
  std::vector<float> w(d);
  for (std::size_t i = 0; i < d; ++i) w[i] = 1.0f + noise.at(0, i);
  return w;
}

}  // namespace

LayerWeights LayerWeights::random(const EngineConfig& config,
                                  std::size_t layer) {
  LayerWeights w;
  const float in_std = 1.0f / std::sqrt(static_cast<float>(config.d_model));
  const float out_std =
      1.0f / std::sqrt(static_cast<float>(config.heads * config.d));
  for (std::size_t h = 0; h < config.heads; ++h) {
    const std::uint64_t s = config.seed;
    w.w_q.push_back(random_normal(config.d_model, config.d, in_std, weight_seed(s, layer, h, 0)));
    w.w_k.push_back(random_normal(config.d_model, config.d, in_std, weight_seed(s, layer, h, 1)));
    w.w_v.push_back(random_normal(config.d_model, config.d, in_std, weight_seed(s, layer, h, 2)));
    w.w_out.push_back(random_normal(config.d, config.d_model, out_std, weight_seed(s, layer, h, 3)));
    w.q_norm.push_back(norm_weight(config.d, weight_seed(s, layer, h, 4)));
    w.k_norm.push_back(norm_weight(config.d, weight_seed(s, layer, h, 5)));
  }
  return w;
}

std::uint64_t HeadMasks::skipped_pairs() const {
  std::uint64_t computed = 0;
  for (std::size_t i = 0; i < skip.rows(); ++i) {
    if (!cache[i]) continue;
    for (std::size_t j = 0; j < skip.cols(); ++j) computed += skip.at(i, j);
  }
  return static_cast<std::uint64_t>(skip.rows()) * skip.cols() - computed;
}

HeadMasks generate_masks(const Matrix& q, const Matrix& k,
                         const EngineConfig& config, std::size_t step) {
  const std::size_t pool = config.pool_n * config.b_q;
  const CompressedAttnMap map =
      compressed_attention(q, k, pool, config.pool_n * config.b_k, config.n_text);
  const auto c = vision_to_text_contribution(map);
  const auto g = text_to_vision_guidance(map);
  const double tau_q = ramp_threshold(config.tau_q, step, config.warmup);
  const double tau_kv = ramp_threshold(config.tau_kv, step, config.warmup);
  Bits cached = select_cached_blocks(c, g, tau_q, map.n_t);
  cached = degrade_to_full_cache(cached, config.s_q, map.n_t);
  const SkipMask skip =
      select_skip_blocks(map, cached, tau_kv, config.protect_cross_modal);

  HeadMasks masks;
  masks.cache = expand_bits(cached, config.pool_n, config.query_blocks());
  masks.skip = expand_skip(skip, config.pool_n, config.query_blocks(),
                           config.key_blocks());
  masks.symbols = SymbolBuffer::encode(masks.cache, masks.skip, config.pool_n);
  return masks;
}

Pipeline::Pipeline(EngineConfig config, PipelineOptions options)
    : config_(config), options_(options) {
  config_.validate();
  for (std::size_t l = 0; l < config_.layers; ++l) {
    weights_.push_back(LayerWeights::random(config_, l));
    LayerState st;
    st.cache.assign(config_.heads, HeadCache(config_.query_blocks()));
    states_.push_back(std::move(st));
  }
}

Matrix Pipeline::step(const Matrix& x, std::size_t t, StepCounters& counters) {
  if (is_update_step(t, config_.interval_n)) return update_step(x, t, counters);
  const std::size_t elapsed = t - states_.front().last_update;
  return dispatch_step(x, t, elapsed, counters);
}

Matrix Pipeline::update_step(const Matrix& x, std::size_t t,
                             StepCounters& counters) {
  counters.step = t;
  counters.phase = Phase::kUpdate;
  counters.elapsed_k = 0;
  Matrix h = x;
  Matrix out;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    out = update_layer(l, h, t, counters);
    if (l + 1 < config_.layers) h += out;
  }
  return out;
}

Matrix Pipeline::dispatch_step(const Matrix& x, std::size_t t,
                               std::size_t elapsed_k, StepCounters& counters) {
  counters.step = t;
  counters.phase = Phase::kDispatch;
  counters.elapsed_k = elapsed_k;
  Matrix h = x;
  Matrix out;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    out = dispatch_layer(l, h, elapsed_k, counters);
    if (l + 1 < config_.layers) h += out;
  }
  return out;
}

Matrix Pipeline::update_layer(std::size_t layer, const Matrix& x, std::size_t t,
                              StepCounters& counters) {
  if (x.rows() != config_.tokens() || x.cols() != config_.d_model) {
    throw ShapeError("update_step: input must be tokens x d_model");
  }
  const LayerWeights& w = weights_[layer];
  LayerState& st = states_[layer];
  const std::size_t heads = config_.heads;
  const std::size_t t_q = config_.query_blocks();
  const SymbolBuffer full =
      SymbolBuffer::all_active(t_q, config_.key_blocks(), config_.pool_n);

  AttentionParams params;
  params.block_q = config_.b_q;
  params.block_k = config_.b_k;
  params.interval_n = config_.interval_n;
  params.order_d = config_.order_d;

  std::vector<Matrix> o_heads(heads);
  std::vector<HeadMasks> next(heads);
  std::vector<AttentionCounters> attn(heads);
  std::vector<GemmCounters> gemm(heads);
  parallel_for(heads, options_.threads, [&](std::size_t h) {
    Matrix q;
    gemm_q(x, w.w_q[h], w.q_norm[h], kNormEps, full, config_.b_q, Phase::kUpdate,
           q, &gemm[h]);
    const Matrix k = project_normed(x, w.w_k[h], w.k_norm[h], kNormEps);
    const Matrix v = matmul(x, w.w_v[h]);
    // Update steps compute every tile; the fresh symbols govern Dispatch.
    o_heads[h] = flashomni_attention(q, k, v, full, {}, params, &attn[h]);
    next[h] = generate_masks(q, k, config_, t);
    for (std::size_t i = 0; i < t_q; ++i) {
      const std::size_t r0 = i * config_.b_q;
      const std::size_t r1 = std::min(r0 + config_.b_q, config_.tokens());
      update_cache(st.cache[h][i], o_heads[h].slice_rows(r0, r1),
                   config_.order_d, t);
    }
  });

  std::vector<SymbolBuffer> symbols;
  symbols.reserve(heads);
  for (const auto& m : next) symbols.push_back(m.symbols);
  GemmCounters out_counters;
  GemmOUpdateResult result =
      gemm_o_update(o_heads, w.w_out, symbols, st.cache, config_.b_q, &out_counters);

  st.masks = std::move(next);
  st.bias = std::move(result.bias);
  st.updates += 1;
  st.last_update = t;

  for (std::size_t h = 0; h < heads; ++h) {
    counters.attn += attn[h];
    counters.gemm += gemm[h];
  }
  counters.gemm += out_counters;
  counters.total_tiles += heads * t_q;
  return std::move(result.out);
}

Matrix Pipeline::dispatch_layer(std::size_t layer, const Matrix& x,
                                std::size_t elapsed_k, StepCounters& counters) {
  if (x.rows() != config_.tokens() || x.cols() != config_.d_model) {
    throw ShapeError("dispatch_step: input must be tokens x d_model");
  }
  const LayerWeights& w = weights_[layer];
  LayerState& st = states_[layer];
  if (st.updates == 0 || st.masks.size() != config_.heads) {
    throw StateError("dispatch_step: no governing Update step");
  }
  const std::size_t heads = config_.heads;

  AttentionParams params;
  params.block_q = config_.b_q;
  params.block_k = config_.b_k;
  params.interval_n = config_.interval_n;
  params.order_d = config_.order_d;
  params.elapsed_k = elapsed_k;
  params.mode = ReuseMode::kBias;
  params.poison_unwritten = options_.poison;

  std::vector<Matrix> o_heads(heads);
  std::vector<AttentionCounters> attn(heads);
  std::vector<GemmCounters> gemm(heads);
  parallel_for(heads, options_.threads, [&](std::size_t h) {
    const SymbolBuffer& sym = st.masks[h].symbols;
    Matrix q(config_.tokens(), config_.d);
    gemm_q(x, w.w_q[h], w.q_norm[h], kNormEps, sym, config_.b_q,
           Phase::kDispatch, q, &gemm[h], options_.poison);
    const Matrix k = project_normed(x, w.w_k[h], w.k_norm[h], kNormEps);
    const Matrix v = matmul(x, w.w_v[h]);
    o_heads[h] = flashomni_attention(q, k, v, sym, st.cache[h], params, &attn[h]);
  });

  std::vector<SymbolBuffer> symbols;
  symbols.reserve(heads);
  for (const auto& m : st.masks) symbols.push_back(m.symbols);
  GemmCounters out_counters;
  Matrix out = gemm_o_dispatch(o_heads, w.w_out, symbols, st.bias, elapsed_k,
                               config_.interval_n, config_.order_d, config_.b_q,
                               &out_counters);

  for (std::size_t h = 0; h < heads; ++h) {
    counters.attn += attn[h];
    counters.gemm += gemm[h];
    counters.predicted_pairs_skipped += st.masks[h].skipped_pairs();
    for (auto bit : st.masks[h].cache) counters.cached_tiles += bit ? 0 : 1;
  }
  counters.gemm += out_counters;
  counters.total_tiles += heads * config_.query_blocks();
  return out;
}

Matrix dense_forward(const std::vector<LayerWeights>& weights,
                     const EngineConfig& config, const Matrix& x) {
  Matrix h = x;
  Matrix out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const LayerWeights& w = weights[l];
    out = Matrix(x.rows(), config.d_model);
    for (std::size_t head = 0; head < config.heads; ++head) {
      const Matrix q = project_normed(h, w.w_q[head], w.q_norm[head], kNormEps);
      const Matrix k = project_normed(h, w.w_k[head], w.k_norm[head], kNormEps);
      const Matrix v = matmul(h, w.w_v[head]);
      matmul_accumulate(dense_attention(q, k, v), w.w_out[head], out);
    }
    if (l + 1 < weights.size()) h += out;
  }
  return out;
}

RunResult run(const EngineConfig& config, const SyntheticWorkload& workload,
              const RunOptions& options) {
  Pipeline pipeline(config, options.pipeline);
  RunResult result;
  for (std::size_t t = 0; t < config.steps; ++t) {
    const Matrix x = workload.features(t);
    StepCounters counters;
    Matrix out = pipeline.step(x, t, counters);
    if (options.compare_dense) {
      Matrix ref = dense_forward(pipeline.all_weights(), config, x);
      counters.rel_err = relative_error(out, ref);
      result.dense_outputs.push_back(std::move(ref));
    }
    result.outputs.push_back(std::move(out));
    result.counters.push_back(counters);
  }
  result.report = account_run(result.counters, config.interval_n);
  return result;
}

}  // namespace omni
