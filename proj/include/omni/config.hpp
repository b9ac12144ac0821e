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

#include <cstddef>
#include <cstdint>
#include <string>

namespace omni {

enum class WorkloadKind {
  kSmooth,     // bounded sinusoidal drift
  kAffine,     // X(t) = X0 + s * t * A
  kQuadratic,  // X(t) = X0 + s * (t * A + t^2 * B)
};

const char* workload_name(WorkloadKind kind);
WorkloadKind parse_workload(const std::string& name);

// Workload shape and sparsity hyperparameters.
struct EngineConfig {
  std::size_t n_text = 32;
  std::size_t n_vision = 224;
  std::size_t b_q = 16;
  std::size_t b_k = 16;
  std::size_t pool_n = 2;
  std::size_t d = 16;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  double tau_q = 0.8;
  double tau_kv = 0.1;
  std::size_t interval_n = 6;
  std::size_t order_d = 1;
  double s_q = 0.3;
  std::size_t steps = 24;
  std::size_t warmup = 0;
  std::uint64_t seed = 0;
  std::size_t layers = 1;
  double smoothness = 0.05;
  WorkloadKind workload = WorkloadKind::kSmooth;
  bool protect_cross_modal = true;

  std::size_t tokens() const { return n_text + n_vision; }
  std::size_t query_blocks() const { return (tokens() + b_q - 1) / b_q; }
  std::size_t key_blocks() const { return (tokens() + b_k - 1) / b_k; }

  // Throws ParameterError on the first violated invariant.
  void validate() const;
};

inline constexpr float kNormEps = 1e-6f;

}  // namespace omni
