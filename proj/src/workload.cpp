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

#include "omni/workload.hpp"

#include <cmath>
#include <random>

#include "omni/error.hpp"

namespace omni {
namespace {

constexpr double kDriftFrequency = 0.15;

}  // namespace

const char* workload_name(WorkloadKind kind) {
  switch (kind) {
    case WorkloadKind::kSmooth: return "smooth";
    case WorkloadKind::kAffine: return "affine";
    case WorkloadKind::kQuadratic: return "quadratic";
  }
  return "smooth";
}

WorkloadKind parse_workload(const std::string& name) {
  if (name == "smooth") return WorkloadKind::kSmooth;
  if (name == "affine") return WorkloadKind::kAffine;
  if (name == "quadratic") return WorkloadKind::kQuadratic;
  throw ParameterError("unknown workload '" + name + "'");
}

Matrix random_normal(std::size_t rows, std::size_t cols, float stddev,
                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> dist(0.0f, stddev);
  std::vector<float> data(rows * cols);
  for (float& v : data) v = dist(rng);
  return Matrix(rows, cols, std::move(data));
}

SyntheticWorkload::SyntheticWorkload(std::uint64_t seed,
                                     const EngineConfig& config,
                                     double smoothness)
    : kind_(config.workload), smoothness_(smoothness) {
  if (!(smoothness >= 0.0)) throw ParameterError("smoothness must be >= 0");
  const std::size_t n = config.tokens();
  base_ = random_normal(n, config.d_model, 1.0f, seed * 3 + 11);
  drift_a_ = random_normal(n, config.d_model, 1.0f, seed * 3 + 12);
  drift_b_ = random_normal(n, config.d_model, 1.0f, seed * 3 + 13);
}

Matrix SyntheticWorkload::features(std::size_t step) const {
  Matrix x = base_;
  if (smoothness_ == 0.0) return x;
  const double t = static_cast<double>(step);
  double ca = 0.0;
  double cb = 0.0;
  switch (kind_) {
    case WorkloadKind::kSmooth:
      ca = std::sin(kDriftFrequency * t);
      cb = 1.0 - std::cos(kDriftFrequency * t);
      break;
    case WorkloadKind::kAffine:
      ca = t;
      break;
    case WorkloadKind::kQuadratic:
      ca = t;
      cb = t * t;
      break;
  }
  const float sa = static_cast<float>(smoothness_ * ca);
  const float sb = static_cast<float>(smoothness_ * cb);
  auto dst = x.data();
  auto a = drift_a_.data();
  auto b = drift_b_.data();
  for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += sa * a[e] + sb * b[e];
  return x;
}

SyntheticWorkload synthetic_workload(std::uint64_t seed,
                                     const EngineConfig& config,
                                     double smoothness) {
  return SyntheticWorkload(seed, config, smoothness);
}

}  // namespace omni
