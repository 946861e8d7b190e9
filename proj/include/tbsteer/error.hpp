// Copyright 2026 The tbsteer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace tbsteer {

/// Bad input: out-of-range parameter, malformed set, dimension mismatch.
struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// The interior-point solver stopped without meeting its tolerances.
/// The message carries iteration diagnostics.
struct SolverFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An estimator was asked for a quantity the data cannot support
/// (zero singles, an empty setting bucket).
struct UndefinedEstimate : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CalibrationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct VerdictUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace tbsteer
