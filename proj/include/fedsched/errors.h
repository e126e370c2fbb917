/*
 * Copyright 2026 The fedsched Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDSCHED_ERRORS_H_
#define FEDSCHED_ERRORS_H_

#include <stdexcept>
#include <string>
#include <vector>

namespace fedsched {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary op on ParamSets whose layer names/shapes differ.
class StructureError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf in an input or result.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Aggregation weights that sum to <= 0, or an undefined staleness power.
class DegenerateWeightError : public Error {
 public:
  using Error::Error;
};

// Invalid partition/learner/protocol specification.
class SpecError : public Error {
 public:
  using Error::Error;
};

// Config failed validation. Carries every violation, not just the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : Error(Join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string Join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedsched

#endif  // FEDSCHED_ERRORS_H_
