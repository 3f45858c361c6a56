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

#ifndef SPHDPP_GEOMETRY_HPP
#define SPHDPP_GEOMETRY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "sphdpp/base.hpp"
#include "sphdpp/rng.hpp"

namespace sphdpp {

/// A unit vector in R^{d+1}, 2 <= d <= kMaxD.  Inline storage; cheap to copy.
struct SpherePoint {
    std::array<double, kMaxD + 1> c{};
    int d = 0;  // ambient sphere dimension (point has d+1 coordinates)

    int ncoord() const { return d + 1; }
    double operator[](int i) const { return c[static_cast<size_t>(i)]; }
    double& operator[](int i) { return c[static_cast<size_t>(i)]; }

    double dot(const SpherePoint& o) const {
        double s = 0;
        for (int i = 0; i <= d; ++i) s += c[i] * o.c[i];
        return s;
    }
    double norm() const { return std::sqrt(this->dot(*this)); }
};

inline SpherePoint make_point(int d, std::initializer_list<double> coords) {
    if (d < 2 || d > kMaxD) throw DimensionError("make_point: need 2 <= d <= 5");
    if (static_cast<int>(coords.size()) != d + 1)
        throw DimensionError("make_point: expected d+1 coordinates");
    SpherePoint p;
    p.d = d;
    int i = 0;
    for (double v : coords) p.c[i++] = v;
    return p;
}

inline SpherePoint normalized(SpherePoint p) {
    double n = p.norm();
    if (n == 0.0) throw NumericalError("normalized: zero vector");
    for (int i = 0; i <= p.d; ++i) p.c[i] /= n;
    return p;
}

/// North pole (0,...,0,1); the polar axis of all spherical coordinates here.
inline SpherePoint north_pole(int d) {
    if (d < 2 || d > kMaxD) throw DimensionError("north_pole: need 2 <= d <= 5");
    SpherePoint p;
    p.d = d;
    p.c[d] = 1.0;
    return p;
}

/// Geodesic distance = arccos(x.y) in [0, pi], evaluated through the chord
/// length so nearly-coincident and nearly-antipodal pairs keep full accuracy.
inline double geodesic_distance(const SpherePoint& x, const SpherePoint& y) {
    if (x.d != y.d) throw DimensionError("geodesic_distance: ambient dimensions differ");
    double sum2 = 0, diff2 = 0;
    for (int i = 0; i <= x.d; ++i) {
        double s = x.c[i] + y.c[i], df = x.c[i] - y.c[i];
        sum2 += s * s;
        diff2 += df * df;
    }
    if (diff2 <= sum2) return 2.0 * std::asin(std::clamp(0.5 * std::sqrt(diff2), 0.0, 1.0));
    return kPi - 2.0 * std::asin(std::clamp(0.5 * std::sqrt(sum2), 0.0, 1.0));
}

/// Spherical coordinates (theta, phi_1..phi_{d-1}); theta in [0,pi],
/// phi_1..phi_{d-2} in [0,pi], phi_{d-1} in [0,2pi).
struct SphericalCoord {
    double theta = 0;
    std::array<double, kMaxD - 1> phi{};
    int d = 0;
};

// Convention: x_{d+1} = cos theta, and recursively
//   x_{d-j} = sin theta sin phi_1 ... sin phi_j cos phi_{j+1},
// with the last coordinate pair using (cos phi_{d-1}, sin phi_{d-1}).
inline SpherePoint from_spherical(const SphericalCoord& s) {
    if (s.d < 2 || s.d > kMaxD) throw DimensionError("from_spherical: bad d");
    SpherePoint p;
    p.d = s.d;
    double prod = 1.0;
    p.c[s.d] = std::cos(s.theta);
    prod = std::sin(s.theta);
    for (int j = 0; j < s.d - 1; ++j) {
        p.c[s.d - 1 - j] = prod * std::cos(s.phi[j]);
        prod *= std::sin(s.phi[j]);
    }
    p.c[0] = prod;
    return p;
}

inline SphericalCoord to_spherical(const SpherePoint& p) {
    SphericalCoord s;
    s.d = p.d;
    s.theta = std::acos(std::clamp(p.c[p.d], -1.0, 1.0));
    double tail = 0;  // norm of remaining coordinates x_1..x_{d-j}
    for (int i = 0; i < p.d; ++i) tail += p.c[i] * p.c[i];
    for (int j = 0; j < p.d - 2; ++j) {
        double r = std::sqrt(tail);
        s.phi[j] = (r == 0) ? 0.0 : std::acos(std::clamp(p.c[p.d - 1 - j] / r, -1.0, 1.0));
        tail -= p.c[p.d - 1 - j] * p.c[p.d - 1 - j];
        tail = std::max(tail, 0.0);
    }
    // last angle is full-circle
    s.phi[p.d - 2] = std::atan2(p.c[0], p.c[1]);
    if (s.phi[p.d - 2] < 0) s.phi[p.d - 2] += 2 * kPi;
    return s;
}

/// Uniform point on S^d: normalized standard Gaussian vector.
inline SpherePoint uniform_sample(StreamRng& rng, int d) {
    if (d < 2) throw DimensionError("uniform_sample: paper assumption d >= 2");
    if (d > kMaxD) throw DimensionError("uniform_sample: d > 5 unsupported");
    SpherePoint p;
    p.d = d;
    double n2 = 0;
    do {
        n2 = 0;
        for (int i = 0; i <= d; ++i) {
            p.c[i] = rng.gaussian();
            n2 += p.c[i] * p.c[i];
        }
    } while (n2 < 1e-24);
    double inv = 1.0 / std::sqrt(n2);
    for (int i = 0; i <= d; ++i) p.c[i] *= inv;
    return p;
}

/// Householder reflection mapping `pole_of` to the north pole (involutive).
/// Returned as the dense (d+1)x(d+1) matrix applied by rotate_apply.
struct PoleFrame {
    // H = I - 2 v v^T / (v.v); H * pole_of = north pole, H = H^{-1}
    std::array<double, kMaxD + 1> v{};
    double vv = 0;  // v.v; 0 means identity
    int d = 0;

    SpherePoint apply(const SpherePoint& p) const {
        SpherePoint q = p;
        if (vv == 0) return q;
        double s = 0;
        for (int i = 0; i <= d; ++i) s += v[i] * p.c[i];
        double f = 2.0 * s / vv;
        for (int i = 0; i <= d; ++i) q.c[i] = p.c[i] - f * v[i];
        return q;
    }
};

inline PoleFrame frame_to_pole(const SpherePoint& y) {
    PoleFrame f;
    f.d = y.d;
    SpherePoint e = north_pole(y.d);
    // v = y - e (or y + e if y ~ e, to keep v well-conditioned; then H maps
    // y -> -e, fix by composing with sign flip absorbed below)
    double dist2m = 0, dist2p = 0;
    for (int i = 0; i <= y.d; ++i) {
        double dm = y.c[i] - e.c[i], dp = y.c[i] + e.c[i];
        dist2m += dm * dm;
        dist2p += dp * dp;
    }
    if (dist2m >= 1e-24) {
        for (int i = 0; i <= y.d; ++i) f.v[i] = y.c[i] - e.c[i];
        f.vv = dist2m;
    } else {
        f.vv = 0;  // y is already the pole
    }
    (void)dist2p;
    return f;
}

/// Point at colatitude theta from the north pole, in the (e_d, e_{d-1}) plane.
inline SpherePoint point_at_colatitude(int d, double theta) {
    SphericalCoord s;
    s.d = d;
    s.theta = theta;
    return from_spherical(s);
}

}  // namespace sphdpp

#endif
