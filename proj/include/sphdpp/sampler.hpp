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

#ifndef SPHDPP_SAMPLER_HPP
#define SPHDPP_SAMPLER_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sphdpp/base.hpp"
#include "sphdpp/geometry.hpp"
#include "sphdpp/kernel.hpp"
#include "sphdpp/rng.hpp"

namespace sphdpp {

/// One exact draw of the projection DPP: exactly k_n points.
struct Configuration {
    KernelSpec spec;
    uint64_t seed = 0;
    std::vector<SpherePoint> points;
    long rejection_count = 0;
};

struct SamplerOptions {
    int64_t max_points = 64;      // envelope on k_n
    long trial_budget = 1000000;  // rejection proposals per point
    double jitter_rel = 1e-12;    // diagonal jitter, relative to k_n/s_d
};

/// Mid-sampling state: selected points and the lower-triangular factor of the
/// (jittered) kernel matrix on them.
struct SamplerState {
    KernelSpec spec;
    std::vector<SpherePoint> selected;
    Eigen::MatrixXd gram_factor;  // k_n x k_n, top-left |selected| block valid
    long trials = 0;
    double jitter = 0;

    explicit SamplerState(const KernelSpec& s, double jitter_rel = 1e-12)
        : spec(s),
          gram_factor(Eigen::MatrixXd::Zero(s.k_n, s.k_n)),
          jitter(jitter_rel * s.density()) {}

    int count() const { return static_cast<int>(selected.size()); }
};

namespace detail {

// Schur complement of x against the selected block: K(x,x) - v^T G^{-1} v,
// with z = L^{-1} v returned for the rank-one factor extension.
inline double schur_complement(const SamplerState& st, const SpherePoint& x,
                               Eigen::VectorXd& z) {
    int j = st.count();
    double kxx = st.spec.density();
    if (j == 0) return kxx;
    Eigen::VectorXd v(j);
    for (int i = 0; i < j; ++i) v(i) = kernel_eval(st.spec, x, st.selected[i]);
    z = st.gram_factor.topLeftCorner(j, j).triangularView<Eigen::Lower>().solve(v);
    return kxx - z.squaredNorm();
}

}  // namespace detail

/// Density of the next point given the current state, i.e. the chain-rule
/// conditional [K(x,x) - v^T G^{-1} v] / (k_n - j).  Values slightly below
/// zero (rounding) are clamped; anything below -1e-9 k_n/s_d is an error.
inline double conditional_density(const SamplerState& state, const SpherePoint& x) {
    int j = state.count();
    if (j >= state.spec.k_n) throw GuardError("conditional_density: configuration full");
    Eigen::VectorXd z;
    double s2 = detail::schur_complement(state, x, z);
    double scale = state.spec.density();
    if (s2 < -1e-9 * scale)
        throw NumericalError("conditional_density: negative Schur complement beyond tolerance");
    if (s2 < 0) s2 = 0;
    return s2 / (state.spec.k_n - j);
}

/// Exact sequential sampler.  Proposals are uniform; the acceptance ratio is
/// bounded by the envelope conditional_density <= (k_n/s_d)/(k_n - j).
inline Configuration sample(const KernelSpec& spec, uint64_t seed, const SamplerOptions& opts = {}) {
    if (spec.k_n > opts.max_points)
        throw GuardError("sample: k_n exceeds the sampling envelope (" +
                         std::to_string(spec.k_n) + " > " + std::to_string(opts.max_points) + ")");
    StreamRng rng(seed, 0);
    SamplerState st(spec, opts.jitter_rel);
    Configuration cfg;
    cfg.spec = spec;
    cfg.seed = seed;
    double kxx = spec.density();

    Eigen::VectorXd z;
    for (int64_t j = 0; j < spec.k_n; ++j) {
        long trial = 0;
        for (;; ++trial) {
            if (trial >= opts.trial_budget)
                throw StallError("sample: rejection budget exceeded at point " +
                                 std::to_string(j) + " of " + std::to_string(spec.k_n) +
                                 " (seed " + std::to_string(seed) + ")");
            SpherePoint x = uniform_sample(rng, spec.d);
            double s2 = detail::schur_complement(st, x, z);
            if (s2 < -1e-9 * kxx) continue;  // degenerate proposal; retry fresh
            if (s2 < 0) s2 = 0;
            if (rng.uniform01() < s2 / kxx) {
                int jj = st.count();
                for (int i = 0; i < jj; ++i) st.gram_factor(jj, i) = z(i);
                double diag2 = s2 + st.jitter;
                st.gram_factor(jj, jj) = std::sqrt(diag2);
                st.selected.push_back(x);
                break;
            }
        }
        cfg.rejection_count += trial;
        st.trials += trial;
    }
    cfg.points = std::move(st.selected);
    return cfg;
}

/// Line-oriented text format: header "d n k_n seed", then one point per line
/// as d+1 decimal coordinates with 17 significant digits.
inline void write_configuration(std::ostream& os, const Configuration& cfg) {
    os << cfg.spec.d << ' ' << cfg.spec.n << ' ' << cfg.spec.k_n << ' ' << cfg.seed << '\n';
    char buf[32];
    for (const auto& p : cfg.points) {
        for (int i = 0; i <= p.d; ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", p[i]);
            os << (i ? " " : "") << buf;
        }
        os << '\n';
    }
}

inline Configuration read_configuration(std::istream& is) {
    Configuration cfg;
    int d, n;
    int64_t kn;
    uint64_t seed;
    if (!(is >> d >> n >> kn >> seed)) throw NumericalError("read_configuration: bad header");
    cfg.spec = KernelSpec::make(d, n);
    cfg.seed = seed;
    if (cfg.spec.k_n != kn) throw NumericalError("read_configuration: k_n mismatch in header");
    for (int64_t j = 0; j < kn; ++j) {
        SpherePoint p;
        p.d = d;
        for (int i = 0; i <= d; ++i)
            if (!(is >> p.c[i])) throw NumericalError("read_configuration: truncated point list");
        if (std::abs(p.norm() - 1.0) > 1e-9)
            throw NumericalError("read_configuration: point off the sphere");
        cfg.points.push_back(p);
    }
    return cfg;
}

/// Stream seed for replicate r of a base seed; parallel replicates each own
/// exactly one derived stream.
inline uint64_t derive_seed(uint64_t base, uint64_t replicate) {
    return detail::mix64(base ^ detail::mix64(0x517CC1B727220A95ull + replicate));
}

}  // namespace sphdpp

#endif
