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
#include <vector>

#include "omni/config.hpp"
#include "omni/tensor.hpp"

namespace omni {

// Deterministic stand-in for the hidden states entering an attention layer.
class SyntheticWorkload {
 public:
  SyntheticWorkload(std::uint64_t seed, const EngineConfig& config,
                    double smoothness);

  // Layer input at `step`. smoothness == 0 gives the same matrix every step.
  Matrix features(std::size_t step) const;

  WorkloadKind kind() const { return kind_; }
  double smoothness() const { return smoothness_; }

 private:
  WorkloadKind kind_;
  double smoothness_;
  Matrix base_;
  Matrix drift_a_;
  Matrix drift_b_;
};

SyntheticWorkload synthetic_workload(std::uint64_t seed,
                                     const EngineConfig& config,
                                     double smoothness);

// Matrix of i.i.d. N(0, stddev^2) entries.
Matrix random_normal(std::size_t rows, std::size_t cols, float stddev,
                     std::uint64_t seed);

}  // namespace omni
