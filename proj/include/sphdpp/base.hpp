/*
*   Copyright (c) 2026, the sphdpp authors
*
*   Licensed under the Apache License, Version 2.0 (the "License");
*   you may not use this file except in compliance with the License.
*   You may obtain a copy of the License at
*
*       http://www.apache.org/licenses/LICENSE-2.0
*
*   Unless required by applicable law or agreed to in writing, software
*   distributed under the License is distributed on an "AS IS" BASIS,
*   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
*   See the License for the specific language governing permissions and
*   limitations under the License.
*/

#ifndef SPHDPP_BASE_HPP
#define SPHDPP_BASE_HPP

#include <cmath>
#include <stdexcept>
#include <string>

namespace sphdpp {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

// Highest ambient dimension d we ever support; points live in R^{d+1}.
inline constexpr int kMaxD = 5;

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// A size/envelope guard was violated (refuse, don't attempt).
struct GuardError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Wrong limit regime for the requested prediction (constant vs non-constant F).
struct DegeneracyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Rejection sampler exceeded its trial budget.
struct StallError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Surface area of S^d: s_d = 2 pi^{(d+1)/2} / Gamma((d+1)/2).
inline double surface_area(int d) {
    if (d < 1) throw DimensionError("surface_area: d must be >= 1");
    return 2.0 * std::exp(0.5 * (d + 1) * std::log(kPi) - std::lgamma(0.5 * (d + 1)));
}

}  // namespace sphdpp

#endif
