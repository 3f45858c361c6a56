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

#ifndef SPHDPP_QUADRATURE_HPP
#define SPHDPP_QUADRATURE_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <vector>

#include "sphdpp/base.hpp"
#include "sphdpp/geometry.hpp"

namespace sphdpp {

/// One-dimensional Gauss rule: nodes/weights for a weight function on [-1,1].
struct GaussRule {
    std::vector<double> x;
    std::vector<double> w;
};

/// Gauss rule for weight (1-t^2)^a on [-1,1] (a = 0: Legendre; a = (d-2)/2:
/// the cos-colatitude weight of S^d).  Golub-Welsch on the Jacobi matrix.
inline GaussRule gauss_gegenbauer(int n, double a) {
    if (n < 1) throw DomainError("gauss_gegenbauer: n >= 1 required");
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        double twoka = 2.0 * k + 2.0 * a;
        double beta = k * (k + 2.0 * a) / (twoka * twoka - 1.0);
        J(k, k - 1) = J(k - 1, k) = std::sqrt(beta);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    double mu0 = std::exp(0.5 * std::log(kPi) + std::lgamma(a + 1.0) - std::lgamma(a + 1.5));
    GaussRule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        r.x[i] = es.eigenvalues()(i);
        double v0 = es.eigenvectors()(0, i);
        r.w[i] = mu0 * v0 * v0;
    }
    return r;
}

/// Cached Gauss-Legendre rule on [-1,1].
inline const GaussRule& gauss_legendre(int n) {
    static std::map<int, GaussRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lk(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, gauss_gegenbauer(n, 0.0)).first;
    return it->second;
}

/// Integrate g over [lo,hi] with n-point Gauss-Legendre per smooth piece;
/// `breaks` lists interior points where g loses smoothness.
inline double gl_integrate(const std::function<double(double)>& g, double lo, double hi, int n,
                           std::vector<double> breaks = {}) {
    breaks.push_back(lo);
    breaks.push_back(hi);
    std::sort(breaks.begin(), breaks.end());
    const GaussRule& r = gauss_legendre(n);
    double total = 0;
    for (size_t p = 0; p + 1 < breaks.size(); ++p) {
        double a = std::max(lo, breaks[p]), b = std::min(hi, breaks[p + 1]);
        if (b - a <= 1e-15) continue;
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        double acc = 0;
        for (int i = 0; i < n; ++i) acc += r.w[i] * g(mid + half * r.x[i]);
        total += half * acc;
    }
    return total;
}

/// Integral of g(theta) sin^{d-1}(theta) over [0,pi] (the colatitude factor
/// of the round measure); multiply by s_{d-1} for a zonal sphere integral.
inline double colatitude_integral(int d, const std::function<double(double)>& g, int n,
                                  std::vector<double> breaks = {}) {
    if (breaks.empty()) {
        // Gauss-Gegenbauer in t = cos(theta): exact for polynomials in t.
        GaussRule r = gauss_gegenbauer(n, 0.5 * (d - 2));
        double acc = 0;
        for (int i = 0; i < n; ++i) acc += r.w[i] * g(std::acos(std::clamp(r.x[i], -1.0, 1.0)));
        return acc;
    }
    return gl_integrate([&](double th) { return g(th) * std::pow(std::sin(th), d - 1); }, 0.0, kPi,
                        n, std::move(breaks));
}

/// Node/weight set over S^d.  `w` are surface-measure weights (sum s_d).
/// Rules built about a center also carry `w_sing`, which absorb the factor
/// sin^{-(d-1)}(dist(.,center)) analytically, so Sum w_sing[i]*g(node[i])
/// approximates the singular integral of g without evaluating the
/// singularity.
struct SphereQuadrature {
    int d = 2;
    int resolution = 0;
    std::vector<SpherePoint> nodes;
    std::vector<double> w;
    std::vector<double> w_sing;
    bool centered = false;
    SpherePoint center;

    size_t size() const { return nodes.size(); }

    double total_weight() const {
        double s = 0, comp = 0;
        for (double v : w) {  // Neumaier compensation
            double t = s + v;
            comp += (std::abs(s) >= std::abs(v)) ? (s - t) + v : (v - t) + s;
            s = t;
        }
        return s + comp;
    }

    template <class F>
    double integrate(F&& f) const {
        double s = 0, comp = 0;
        for (size_t i = 0; i < nodes.size(); ++i) {
            double v = w[i] * f(nodes[i]);
            double t = s + v;
            comp += (std::abs(s) >= std::abs(v)) ? (s - t) + v : (v - t) + s;
            s = t;
        }
        return s + comp;
    }

    /// Integral of g(z) * sin^{-(d-1)}(dist(z, center)) dz for bounded g.
    template <class F>
    double integrate_singular(F&& f) const {
        if (!centered) throw DomainError("integrate_singular: rule has no center");
        double s = 0, comp = 0;
        for (size_t i = 0; i < nodes.size(); ++i) {
            double v = w_sing[i] * f(nodes[i]);
            double t = s + v;
            comp += (std::abs(s) >= std::abs(v)) ? (s - t) + v : (v - t) + s;
            s = t;
        }
        return s + comp;
    }
};

namespace detail {

// Azimuthal block shared by product and singular rules: the (d-1)-fold
// tensor rule over (phi_1..phi_{d-1}) with measure J(phi) dphi; returns
// angle tuples and weights (total weight = s_{d-1}).
struct AzimuthGrid {
    std::vector<std::array<double, kMaxD - 1>> phi;
    std::vector<double> w;
};

inline AzimuthGrid azimuth_grid(int d, int res) {
    AzimuthGrid g;
    g.phi.push_back({});
    g.w.push_back(1.0);
    // phi_j for j=1..d-2 has weight sin^{d-1-j}; use Gauss-Gegenbauer in cos.
    for (int j = 1; j <= d - 2; ++j) {
        int e = d - 1 - j;
        GaussRule r = gauss_gegenbauer(res, 0.5 * (e - 1));
        AzimuthGrid next;
        next.phi.reserve(g.phi.size() * res);
        next.w.reserve(g.phi.size() * res);
        for (size_t a = 0; a < g.phi.size(); ++a)
            for (int i = 0; i < res; ++i) {
                auto ph = g.phi[a];
                ph[j - 1] = std::acos(std::clamp(r.x[i], -1.0, 1.0));
                next.phi.push_back(ph);
                next.w.push_back(g.w[a] * r.w[i]);
            }
        g = std::move(next);
    }
    // last angle: uniform on [0, 2pi)
    {
        AzimuthGrid next;
        next.phi.reserve(g.phi.size() * res);
        next.w.reserve(g.phi.size() * res);
        double wu = 2.0 * kPi / res;
        for (size_t a = 0; a < g.phi.size(); ++a)
            for (int i = 0; i < res; ++i) {
                auto ph = g.phi[a];
                ph[d - 2] = (i + 0.5) * wu;
                next.phi.push_back(ph);
                next.w.push_back(g.w[a] * wu);
            }
        g = std::move(next);
    }
    return g;
}

// Colatitude nodes: (theta_i, weight including sin^{d-1} theta).
inline void colatitude_nodes(int d, int res, const std::vector<double>& breaks,
                             std::vector<double>& th, std::vector<double>& wt) {
    if (breaks.empty()) {
        GaussRule r = gauss_gegenbauer(res, 0.5 * (d - 2));
        for (int i = 0; i < res; ++i) {
            th.push_back(std::acos(std::clamp(r.x[i], -1.0, 1.0)));
            wt.push_back(r.w[i]);
        }
        return;
    }
    std::vector<double> pts = breaks;
    pts.push_back(0.0);
    pts.push_back(kPi);
    std::sort(pts.begin(), pts.end());
    const GaussRule& r = gauss_legendre(res);
    for (size_t p = 0; p + 1 < pts.size(); ++p) {
        double a = std::clamp(pts[p], 0.0, kPi), b = std::clamp(pts[p + 1], 0.0, kPi);
        if (b - a <= 1e-14) continue;
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (int i = 0; i < res; ++i) {
            double t = mid + half * r.x[i];
            th.push_back(t);
            wt.push_back(half * r.w[i] * std::pow(std::sin(t), d - 1));
        }
    }
}

}  // namespace detail

/// Tensor rule over S^d about the north pole.  `theta_breaks` (optional)
/// aligns colatitude panels to integrand discontinuities, e.g. a cap radius.
inline SphereQuadrature product_quadrature(int d, int resolution,
                                           std::vector<double> theta_breaks = {}) {
    if (d < 2 || d > kMaxD) throw DimensionError("product_quadrature: need 2 <= d <= 5");
    if (resolution < 4) throw DomainError("product_quadrature: resolution >= 4 required");
    SphereQuadrature q;
    q.d = d;
    q.resolution = resolution;
    std::vector<double> th, wt;
    detail::colatitude_nodes(d, resolution, theta_breaks, th, wt);
    detail::AzimuthGrid az = detail::azimuth_grid(d, resolution);
    q.nodes.reserve(th.size() * az.phi.size());
    q.w.reserve(th.size() * az.phi.size());
    SphericalCoord sc;
    sc.d = d;
    for (size_t i = 0; i < th.size(); ++i) {
        sc.theta = th[i];
        for (size_t a = 0; a < az.phi.size(); ++a) {
            for (int j = 0; j < d - 1; ++j) sc.phi[j] = az.phi[a][j];
            q.nodes.push_back(from_spherical(sc));
            q.w.push_back(wt[i] * az.w[a]);
        }
    }
    return q;
}

/// Rule in spherical coordinates centered at y.  The Jacobian sin^{d-1}
/// cancels against the singular factor exactly, so `w_sing` never involves a
/// division at theta = 0 or pi.
inline SphereQuadrature singular_quadrature_about(const SpherePoint& y, int resolution,
                                                  std::vector<double> theta_breaks = {}) {
    int d = y.d;
    if (d < 2 || d > kMaxD) throw DimensionError("singular_quadrature_about: bad point");
    if (resolution < 4) throw DomainError("singular_quadrature_about: resolution >= 4 required");
    SphereQuadrature q;
    q.d = d;
    q.resolution = resolution;
    q.centered = true;
    q.center = y;

    // plain Gauss-Legendre in theta per panel; weight WITHOUT sin^{d-1}
    std::vector<double> pts = std::move(theta_breaks);
    pts.push_back(0.0);
    pts.push_back(kPi);
    std::sort(pts.begin(), pts.end());
    const GaussRule& r = gauss_legendre(resolution);
    std::vector<double> th, wt;
    for (size_t p = 0; p + 1 < pts.size(); ++p) {
        double a = std::clamp(pts[p], 0.0, kPi), b = std::clamp(pts[p + 1], 0.0, kPi);
        if (b - a <= 1e-14) continue;
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (int i = 0; i < resolution; ++i) {
            th.push_back(mid + half * r.x[i]);
            wt.push_back(half * r.w[i]);
        }
    }

    detail::AzimuthGrid az = detail::azimuth_grid(d, resolution);
    PoleFrame H = frame_to_pole(y);
    SphericalCoord sc;
    sc.d = d;
    q.nodes.reserve(th.size() * az.phi.size());
    for (size_t i = 0; i < th.size(); ++i) {
        sc.theta = th[i];
        double jac = std::pow(std::sin(th[i]), d - 1);
        for (size_t a = 0; a < az.phi.size(); ++a) {
            for (int j = 0; j < d - 1; ++j) sc.phi[j] = az.phi[a][j];
            // H is an involution: it maps y to the pole and the pole to y.
            q.nodes.push_back(H.apply(from_spherical(sc)));
            q.w_sing.push_back(wt[i] * az.w[a]);
            q.w.push_back(wt[i] * az.w[a] * jac);
        }
    }
    return q;
}

}  // namespace sphdpp

#endif
