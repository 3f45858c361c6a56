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

#ifndef SPHDPP_RNG_HPP
#define SPHDPP_RNG_HPP

#include <cmath>
#include <cstdint>

namespace sphdpp {

namespace detail {
// splitmix64 finalizer; full-avalanche 64-bit mix.
inline uint64_t mix64(uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Counter-based random stream: the output is a pure function of
/// (seed, stream, counter), so replicate r can use stream (seed, r) and get a
/// reproducible sequence independent of scheduling.
class StreamRng {
   public:
    StreamRng(uint64_t seed, uint64_t stream = 0)
        : key_(detail::mix64(detail::mix64(seed) ^ (stream * 0xD2B74407B1CE6E93ull + 0x9E3779B97F4A7C15ull))) {}

    uint64_t next_u64() { return detail::mix64(key_ ^ (ctr_++ * 0xA0761D6478BD642Full)); }

    /// Uniform in [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in (0,1]; safe as a log() argument.
    double uniform01_open() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (pairs cached).
    double gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u = uniform01_open();
        double v = uniform01();
        double r = std::sqrt(-2.0 * std::log(u));
        double a = 6.28318530717958647692 * v;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    /// Chi-squared with one degree of freedom.
    double chisq1() {
        double g = gaussian();
        return g * g;
    }

   private:
    uint64_t key_;
    uint64_t ctr_ = 0;
    double cached_ = 0;
    bool have_cached_ = false;
};

}  // namespace sphdpp

#endif
