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

#ifndef SPHDPP_KERNEL_HPP
#define SPHDPP_KERNEL_HPP

#include <cmath>
#include <cstdint>

#include "sphdpp/base.hpp"
#include "sphdpp/geometry.hpp"
#include "sphdpp/special_functions.hpp"

namespace sphdpp {

/// dim H_n(S^d) = ((2n+d-1)/(n+d-1)) * binom(n+d-1, d-1), exact integers.
inline int64_t dimension(int d, int n) {
    if (d < 2) throw DimensionError("dimension: d >= 2 required");
    if (n < 0) throw DomainError("dimension: n >= 0 required");
    __int128 binom = 1;
    for (int i = 1; i <= d - 1; ++i) {
        binom = binom * (n + i);  // exact: product of d-1 consecutive / (d-1)!
        binom /= i;
        if (binom > (__int128(1) << 62)) throw NumericalError("dimension: overflow");
    }
    __int128 num = binom * (2 * n + d - 1);
    if (num % (n + d - 1) != 0) throw NumericalError("dimension: divisibility violated");
    __int128 k = num / (n + d - 1);
    if (k > (__int128(1) << 62)) throw NumericalError("dimension: overflow");
    return static_cast<int64_t>(k);
}

/// Identity card of one model: ambient dimension d, level n, and the derived
/// constants k_n (exact), s_d, and the chaos constant C_d = 2^{d-2} Gamma(d/2)^2 / pi.
struct KernelSpec {
    int d = 2;
    int n = 0;
    int64_t k_n = 1;
    double s_d = 0;
    double C_d = 0;

    static KernelSpec make(int d, int n) {
        if (d < 2 || d > kMaxD) throw DimensionError("KernelSpec: need 2 <= d <= 5");
        KernelSpec s;
        s.d = d;
        s.n = n;
        s.k_n = dimension(d, n);
        s.s_d = surface_area(d);
        s.C_d = std::exp((d - 2) * std::log(2.0) + 2.0 * std::lgamma(0.5 * d)) / kPi;
        return s;
    }

    double density() const { return static_cast<double>(k_n) / s_d; }  // K_n(x,x)
};

/// K_n(x,y) = (k_n/s_d) P_n(x . y).  Coincident arguments are routed through
/// t = 1 exactly, so the diagonal is the same bit pattern for every x.
inline double kernel_eval(const KernelSpec& spec, const SpherePoint& x, const SpherePoint& y) {
    if (x.d != spec.d || y.d != spec.d) throw DimensionError("kernel_eval: dimension mismatch");
    bool same = true;
    for (int i = 0; i <= spec.d && same; ++i) same = (x.c[i] == y.c[i]);
    double t = same ? 1.0 : std::clamp(x.dot(y), -1.0, 1.0);
    return spec.density() * legendre(spec.d, spec.n, t);
}

/// Zonal form: K_n between points at geodesic distance theta.
inline double kernel_eval_zonal(const KernelSpec& spec, double cos_theta) {
    return spec.density() * legendre(spec.d, spec.n, std::clamp(cos_theta, -1.0, 1.0));
}

}  // namespace sphdpp

#endif
