// Copyright 2026 The qtwin Authors
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

namespace qtwin {

/// Input outside the mathematical domain of an operation (nonpositive
/// inductance, probability outside [0, 1], resonance poles, ...).
class DomainError : public std::domain_error {
   public:
    using std::domain_error::domain_error;
};

/// Malformed or inconsistent input data (bad CSV, sign-convention violation,
/// missing labels, unknown config keys).
class InputError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to produce a trustworthy answer: iterative
/// solver did not converge, root not bracketed, truncation not converged,
/// singular Jacobian.
class NumericalError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

}  // namespace qtwin
