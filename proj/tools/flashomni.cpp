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

// flashomni: run the Update-Dispatch engine on a synthetic workload, verify
// its properties, or print theoretical speedup tables.
//
// Exit codes: 0 success, 1 verification failure, 2 usage/config error,
// 3 internal invariant violation.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "omni/costs.hpp"
#include "omni/error.hpp"
#include "omni/pipeline.hpp"
#include "omni/report.hpp"
#include "omni/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInternal = 3;

std::size_t threads_from_env() {
  const char* env = std::getenv("OMNI_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0') throw omni::ParameterError("OMNI_THREADS must be an integer");
  return v;  // 0 = auto
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw omni::ParameterError("bad sparsity value '" + item + "'");
    }
    if (used != item.size()) throw omni::ParameterError("bad sparsity value '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw omni::ParameterError("empty sparsity list");
  return out;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& report_path, const std::string& format) {
  omni::EngineConfig config = omni::load_config(config_path);
  if (seed) config.seed = *seed;
  omni::RunOptions options;
  options.pipeline.threads = threads_from_env();

  const auto start = std::chrono::steady_clock::now();
  const auto result =
      omni::run(config, omni::synthetic_workload(config.seed, config, config.smoothness),
                options);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::string text = format == "csv"
                               ? omni::manifest_csv(result.report)
                               : omni::manifest_json(config, result.report, wall);
  if (report_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(report_path, std::ios::binary);
    if (!out) throw omni::ParameterError("cannot write report '" + report_path + "'");
    out << text;
  }
  std::cerr << "sparsity " << result.report.sparsity << ", max rel err "
            << result.report.max_rel_err << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& config_path, bool corrupt) {
  const omni::EngineConfig config = omni::load_config(config_path);
  omni::VerifyOptions options;
  options.corrupt_symbols = corrupt;
  bool ok = true;
  for (const auto& r : omni::run_verification(config, options)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name;
    if (!r.passed) {
      std::cout << ": " << r.detail << " (reproduce with seed " << r.seed << ")";
      ok = false;
    }
    std::cout << "\n";
  }
  return ok ? kExitOk : kExitVerifyFailed;
}

int cmd_speedup(std::size_t interval, const std::string& list) {
  if (interval < 1) throw omni::ParameterError("--interval must be >= 1");
  const auto values = parse_list(list);
  // Evaluate everything first so a bad value prints no partial table.
  std::vector<std::string> rows;
  for (double s : values) {
    const double gemm_o = omni::theoretical_speedup_gemm_o(interval, s);
    std::string attn = "inf";
    if (s < 1.0) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4f", omni::theoretical_speedup_attention(s));
      attn = buf;
    }
    char line[96];
    std::snprintf(line, sizeof(line), "%-10.4g %-12.4f %s\n", s, gemm_o, attn.c_str());
    rows.emplace_back(line);
  }
  std::printf("%-10s %-12s %s\n", "sparsity", "gemm_o", "attention");
  for (const auto& row : rows) std::fputs(row.c_str(), stdout);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FlashOmni-style sparse attention engine (CPU reference)"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string report_path;
  std::string format = "json";
  auto* run = app.add_subcommand("run", "Run the pipeline on a synthetic workload");
  run->add_option("--config", config_path, "Path to a JSON EngineConfig")->required();
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--report", report_path, "Write the report here instead of stdout");
  run->add_option("--format", format, "Report format")
      ->check(CLI::IsMember({"json", "csv"}));

  std::string verify_config;
  bool corrupt = false;
  auto* verify = app.add_subcommand("verify", "Run the property suite at the configured shape");
  verify->add_option("--config", verify_config, "Path to a JSON EngineConfig")->required();
  verify->add_flag("--corrupt-symbols", corrupt, "Fault injection: flip a symbol bit")
      ->group("");

  std::size_t interval = 0;
  std::string sparsity_list;
  auto* speedup = app.add_subcommand("speedup", "Print theoretical speedups");
  speedup->add_option("--interval", interval, "Update interval N")->required();
  speedup->add_option("--sparsity", sparsity_list, "Comma-separated sparsities")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) return cmd_run(config_path, seed, report_path, format);
    if (*verify) return cmd_verify(verify_config, corrupt);
    if (*speedup) return cmd_speedup(interval, sparsity_list);
  } catch (const omni::ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const omni::Error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
