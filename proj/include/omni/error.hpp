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

#include <stdexcept>
#include <string>

namespace omni {

// Every failure raised by the library derives from Error so the CLI can map
// categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A scalar or configuration parameter is outside its domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// A mask is not uniform across a compressed group.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class BoundsError : public Error {
 public:
  using Error::Error;
};

// Cache or bias state is missing where a reuse path needs it.
class StateError : public Error {
 public:
  using Error::Error;
};

// A mask violates a policy invariant (e.g. an active row with every key
// block skipped).
class PolicyError : public Error {
 public:
  using Error::Error;
};

// Internal bookkeeping disagrees with itself.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace omni
