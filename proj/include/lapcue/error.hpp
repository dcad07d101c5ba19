// Copyright 2026 The lapcue Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     https://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace lapcue {

// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
  kDomain = 1,
  kParse = 2,
  kInfeasibleBudget = 3,
  kSingularity = 4,
  kConvergence = 5,
  kOracleGap = 6,
  kInfeasibleSpeed = 7,
  kUnconstrainedTrack = 8,
  kContract = 9,
};

inline const char* ToString(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kInfeasibleBudget: return "infeasible-budget";
    case ErrorKind::kSingularity: return "singularity";
    case ErrorKind::kConvergence: return "convergence";
    case ErrorKind::kOracleGap: return "oracle-gap";
    case ErrorKind::kInfeasibleSpeed: return "infeasible-speed";
    case ErrorKind::kUnconstrainedTrack: return "unconstrained-track";
    case ErrorKind::kContract: return "contract";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(ToString(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace lapcue
