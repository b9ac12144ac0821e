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

#include "omni/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "omni/error.hpp"

namespace omni {
namespace {

using nlohmann::json;

template <typename T>
T get_field(const json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    throw ParameterError("config: key '" + key + "' has the wrong type");
  }
}

std::size_t get_count(const json& value, const std::string& key) {
  if (!value.is_number_unsigned() &&
      !(value.is_number_integer() && value.get<long long>() >= 0)) {
    throw ParameterError("config: key '" + key +
                         "' must be a non-negative integer");
  }
  return value.get<std::size_t>();
}

double get_real(const json& value, const std::string& key) {
  if (!value.is_number()) {
    throw ParameterError("config: key '" + key + "' must be a number");
  }
  return value.get<double>();
}

// Fixed-precision rendering keeps CSV output stable across runs.
std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

EngineConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParameterError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParameterError("config: top level must be an object");
  EngineConfig c;
  for (const auto& [key, value] : doc.items()) {
    if (key == "n_text") c.n_text = get_count(value, key);
    else if (key == "n_vision") c.n_vision = get_count(value, key);
    else if (key == "b_q") c.b_q = get_count(value, key);
    else if (key == "b_k") c.b_k = get_count(value, key);
    else if (key == "pool_n") c.pool_n = get_count(value, key);
    else if (key == "d") c.d = get_count(value, key);
    else if (key == "d_model") c.d_model = get_count(value, key);
    else if (key == "heads") c.heads = get_count(value, key);
    else if (key == "tau_q") c.tau_q = get_real(value, key);
    else if (key == "tau_kv") c.tau_kv = get_real(value, key);
    else if (key == "interval_n") c.interval_n = get_count(value, key);
    else if (key == "order_d") c.order_d = get_count(value, key);
    else if (key == "s_q") c.s_q = get_real(value, key);
    else if (key == "steps") c.steps = get_count(value, key);
    else if (key == "warmup") c.warmup = get_count(value, key);
    else if (key == "seed") c.seed = get_count(value, key);
    else if (key == "layers") c.layers = get_count(value, key);
    else if (key == "smoothness") c.smoothness = get_real(value, key);
    else if (key == "workload") c.workload = parse_workload(get_field<std::string>(value, key));
    else if (key == "protect_cross_modal") c.protect_cross_modal = get_field<bool>(value, key);
    else throw ParameterError("config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

EngineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

namespace {

json config_json(const EngineConfig& c) {
  return json{{"n_text", c.n_text},
              {"n_vision", c.n_vision},
              {"b_q", c.b_q},
              {"b_k", c.b_k},
              {"pool_n", c.pool_n},
              {"d", c.d},
              {"d_model", c.d_model},
              {"heads", c.heads},
              {"tau_q", c.tau_q},
              {"tau_kv", c.tau_kv},
              {"interval_n", c.interval_n},
              {"order_d", c.order_d},
              {"s_q", c.s_q},
              {"steps", c.steps},
              {"warmup", c.warmup},
              {"seed", c.seed},
              {"layers", c.layers},
              {"smoothness", c.smoothness},
              {"workload", workload_name(c.workload)},
              {"protect_cross_modal", c.protect_cross_modal}};
}

}  // namespace

std::string config_to_json(const EngineConfig& config) {
  return config_json(config).dump(2);
}

std::string manifest_json(const EngineConfig& config, const CostReport& report,
                          double wall_time_s) {
  json steps = json::array();
  for (const StepCost& s : report.steps) {
    steps.push_back({{"step", s.step},
                     {"phase", phase_name(s.phase)},
                     {"attn_pairs_total", s.attn_pairs_total},
                     {"attn_pairs_skipped", s.attn_pairs_skipped},
                     {"gemm_q_macs", s.gemm_q_macs},
                     {"gemm_q_macs_dense", s.gemm_q_macs_dense},
                     {"gemm_o_macs", s.gemm_o_macs},
                     {"gemm_o_macs_dense", s.gemm_o_macs_dense},
                     {"gemm_o_bias_macs", s.gemm_o_bias_macs},
                     {"cached_tiles", s.cached_tiles},
                     {"total_tiles", s.total_tiles},
                     {"sparsity", s.sparsity},
                     {"max_rel_err", s.max_rel_err}});
  }
  json aggregate = {
      {"attn_pairs_total", report.attn_pairs_total},
      {"attn_pairs_skipped", report.attn_pairs_skipped},
      {"gemm_q_macs", report.gemm_q_macs},
      {"gemm_q_macs_dense", report.gemm_q_macs_dense},
      {"gemm_o_macs", report.gemm_o_macs},
      {"gemm_o_macs_dense", report.gemm_o_macs_dense},
      {"gemm_o_bias_macs", report.gemm_o_bias_macs},
      {"sparsity", report.sparsity},
      {"dispatch_sparsity", report.dispatch_sparsity},
      {"cache_sparsity", report.cache_sparsity},
      {"mean_rel_err", report.mean_rel_err},
      {"speedup_gemm_o", report.speedup_gemm_o},
      {"speedup_attention", report.speedup_attention
                                ? json(*report.speedup_attention)
                                : json(nullptr)},
  };
  json doc = {{"config", config_json(config)},
              {"seed", config.seed},
              {"steps", steps},
              {"aggregate", aggregate},
              {"max_rel_err", report.max_rel_err},
              {"wall_time_s", wall_time_s}};
  return doc.dump(2) + "\n";
}

std::string manifest_csv(const CostReport& report) {
  std::string out = kCsvHeader;
  out += "\n";
  for (const StepCost& s : report.steps) {
    out += std::to_string(s.step) + "," + phase_name(s.phase) + "," +
           std::to_string(s.attn_pairs_total) + "," +
           std::to_string(s.attn_pairs_skipped) + "," +
           std::to_string(s.gemm_q_macs) + "," + std::to_string(s.gemm_o_macs) +
           "," + fmt_real(s.sparsity) + "," + fmt_real(s.max_rel_err) + "\n";
  }
  return out;
}

}  // namespace omni
