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

// Config ingestion and run-manifest emission for the CLI.

#include <string>

#include "omni/config.hpp"
#include "omni/costs.hpp"

namespace omni {

// Parses a flat JSON object whose keys are EngineConfig field names.
// Unknown keys, wrong types and invariant violations raise ParameterError.
EngineConfig parse_config(const std::string& json_text);
EngineConfig load_config(const std::string& path);
std::string config_to_json(const EngineConfig& config);

// JSON manifest: config echo, seed, per-step rows, aggregate report, max
// relative error and wall time. Everything except wall_time_s is a pure
// function of (config, report).
std::string manifest_json(const EngineConfig& config, const CostReport& report,
                          double wall_time_s);

inline constexpr const char* kCsvHeader =
    "step,phase,attn_pairs_total,attn_pairs_skipped,gemm_q_macs,gemm_o_macs,"
    "sparsity,max_rel_err";

std::string manifest_csv(const CostReport& report);

}  // namespace omni
