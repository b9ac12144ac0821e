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

#include "omni/config.hpp"

#include <string>

#include "omni/error.hpp"

namespace omni {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ParameterError("config: " + what);
}

void require_fraction(double v, const char* name) {
  require(v >= 0.0 && v <= 1.0,
          std::string(name) + " must lie in [0, 1], got " + std::to_string(v));
}

}  // namespace

void EngineConfig::validate() const {
  require(tokens() >= 1, "n_text + n_vision must be >= 1");
  require(b_q >= 1 && b_k >= 1, "block sizes must be >= 1");
  // The caching metrics index vision blocks on both axes of the pooled map.
  require(b_q == b_k, "b_q and b_k must be equal");
  require(pool_n >= 1, "pool_n must be >= 1");
  require(d >= 2 && d % 2 == 0, "d must be even and >= 2");
  require(d_model >= 1, "d_model must be >= 1");
  require(heads >= 1, "heads must be >= 1");
  require_fraction(tau_q, "tau_q");
  require_fraction(tau_kv, "tau_kv");
  require_fraction(s_q, "s_q");
  require(interval_n >= 1, "interval_n must be >= 1");
  require(steps >= 1, "steps must be >= 1");
  require(layers >= 1, "layers must be >= 1");
  require(smoothness >= 0.0, "smoothness must be >= 0");
}

}  // namespace omni
