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

// Self-check suite run by `flashomni verify`: each property is evaluated at
// the configured shape over a handful of derived seeds.

#include <cstdint>
#include <string>
#include <vector>

#include "omni/config.hpp"

namespace omni {

struct PropertyResult {
  std::string name;
  bool passed = true;
  std::string detail;       // first failure, if any
  std::uint64_t seed = 0;   // reproducer for the first failure
};

struct VerifyOptions {
  std::size_t trials = 4;
  // Flip one bit of every encoded skip buffer before decoding.
  bool corrupt_symbols = false;
};

std::vector<PropertyResult> run_verification(const EngineConfig& config,
                                             const VerifyOptions& options = {});

}  // namespace omni
