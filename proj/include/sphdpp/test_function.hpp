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

#ifndef SPHDPP_TEST_FUNCTION_HPP
#define SPHDPP_TEST_FUNCTION_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sphdpp/base.hpp"
#include "sphdpp/geometry.hpp"
#include "sphdpp/quadrature.hpp"
#include "sphdpp/sampler.hpp"

namespace sphdpp {

enum class TFKind { Generic, CapIndicator, PairIndicator, TriangleIndicator, PairwiseZonal };

/// Area of the spherical cap of angular radius delta on S^d.
inline double cap_area(int d, double delta) {
    if (delta <= 0) return 0.0;
    if (delta >= kPi) return surface_area(d);
    return surface_area(d - 1) *
           gl_integrate([&](double t) { return std::pow(std::sin(t), d - 1); }, 0.0, delta, 64);
}

/// Measure of the azimuth set {|phi_1| < u} on the (d-1)-sphere of directions:
/// s_{d-2} * Int_0^u sin^{d-2}.
inline double azimuth_arc_measure(int d, double u) {
    u = std::clamp(u, 0.0, kPi);
    if (d == 2) return 2.0 * u;
    if (d == 3) return 2.0 * kPi * (1.0 - std::cos(u));
    return surface_area(d - 2) *
           gl_integrate([&](double t) { return std::pow(std::sin(t), d - 2); }, 0.0, u, 48);
}

namespace detail {

// Half-opening of the azimuth arc {z : dist(z, y) < delta} at colatitude psi
// from x, when dist(x, y) = theta.
inline double cap_arc_half_angle(double psi, double theta, double delta) {
    double denom = std::sin(psi) * std::sin(theta);
    double num = std::cos(delta) - std::cos(psi) * std::cos(theta);
    if (denom < 1e-300) return (num <= 0) ? kPi : 0.0;
    return std::acos(std::clamp(num / denom, -1.0, 1.0));
}

}  // namespace detail

/// Area of the intersection of two caps of radius delta whose centers are at
/// geodesic distance theta.
inline double lens_area(int d, double theta, double delta) {
    if (theta >= 2.0 * delta) return 0.0;
    if (theta < 1e-12) return cap_area(d, delta);
    // psi-integral over the cap about one center; the arc piece is smooth away
    // from |theta - delta|.
    std::vector<double> breaks;
    double b = std::abs(theta - delta);
    if (b > 1e-12 && b < delta - 1e-12) breaks.push_back(b);
    return gl_integrate(
        [&](double psi) {
            return std::pow(std::sin(psi), d - 1) *
                   azimuth_arc_measure(d, detail::cap_arc_half_angle(psi, theta, delta));
        },
        0.0, delta, 64, breaks);
}

/// A bounded symmetric k-variate test function with declared structure.
/// `offset` is subtracted from the raw value (centering); margins and
/// profiles account for it.
struct TestFunction {
    int d = 2;
    int k = 1;
    TFKind kind = TFKind::Generic;
    double delta = 0;
    double bound = 1;
    bool symmetric = true;
    double offset = 0;
    SpherePoint axis;  // cap center (CapIndicator only)
    std::function<double(const std::vector<SpherePoint>&)> fn;  // Generic
    std::function<double(double)> profile;                      // PairwiseZonal: g(theta)

    double raw(const std::vector<SpherePoint>& pts) const {
        switch (kind) {
            case TFKind::CapIndicator:
                return geodesic_distance(pts[0], axis) < delta ? 1.0 : 0.0;
            case TFKind::PairIndicator:
                return geodesic_distance(pts[0], pts[1]) < delta ? 1.0 : 0.0;
            case TFKind::TriangleIndicator:
                return (geodesic_distance(pts[0], pts[1]) < delta &&
                        geodesic_distance(pts[0], pts[2]) < delta &&
                        geodesic_distance(pts[1], pts[2]) < delta)
                           ? 1.0
                           : 0.0;
            case TFKind::PairwiseZonal:
                return profile(geodesic_distance(pts[0], pts[1]));
            case TFKind::Generic:
                return fn(pts);
        }
        return 0.0;
    }

    double operator()(const std::vector<SpherePoint>& pts) const { return raw(pts) - offset; }

    /// Raw (1,2)-margin as a function of distance, for zonal kinds.
    bool has_zonal_margin() const {
        return kind == TFKind::PairIndicator || kind == TFKind::TriangleIndicator ||
               kind == TFKind::PairwiseZonal;
    }

    /// Total integral of f (with offset applied) over (S^d)^k.
    double total_integral() const;
};

inline TestFunction cap_indicator(int d, double delta) {
    TestFunction f;
    f.d = d;
    f.k = 1;
    f.kind = TFKind::CapIndicator;
    f.delta = delta;
    f.axis = north_pole(d);
    return f;
}

inline TestFunction pair_indicator(int d, double delta) {
    TestFunction f;
    f.d = d;
    f.k = 2;
    f.kind = TFKind::PairIndicator;
    f.delta = delta;
    return f;
}

inline TestFunction triangle_indicator(int d, double delta) {
    TestFunction f;
    f.d = d;
    f.k = 3;
    f.kind = TFKind::TriangleIndicator;
    f.delta = delta;
    return f;
}

inline TestFunction pairwise_zonal(int d, std::function<double(double)> g, double bound) {
    TestFunction f;
    f.d = d;
    f.k = 2;
    f.kind = TFKind::PairwiseZonal;
    f.profile = std::move(g);
    f.bound = bound;
    return f;
}

inline TestFunction generic_function(int d, int k, std::function<double(const std::vector<SpherePoint>&)> fn,
                                     double bound, bool symmetric) {
    if (k < 1 || k > 3) throw GuardError("generic_function: 1 <= k <= 3 required");
    TestFunction f;
    f.d = d;
    f.k = k;
    f.kind = TFKind::Generic;
    f.fn = std::move(fn);
    f.bound = bound;
    f.symmetric = symmetric;
    return f;
}

namespace detail {

// Raw 1-margin constant for zonal kinds (integral over one variable of the
// raw (1,2)-margin profile).
inline double zonal_f1_raw(const TestFunction& f) {
    double sd1 = surface_area(f.d - 1);
    switch (f.kind) {
        case TFKind::PairIndicator:
            return cap_area(f.d, f.delta);
        case TFKind::PairwiseZonal:
            return sd1 * colatitude_integral(f.d, f.profile, 96);
        case TFKind::TriangleIndicator:
            return sd1 * gl_integrate(
                             [&](double th) {
                                 return std::pow(std::sin(th), f.d - 1) *
                                        lens_area(f.d, th, f.delta);
                             },
                             0.0, f.delta, 96, {0.5 * f.delta});
        default:
            throw DomainError("zonal_f1_raw: not a zonal kind");
    }
}

}  // namespace detail

inline double TestFunction::total_integral() const {
    double sd = surface_area(d);
    double raw_total = 0;
    switch (kind) {
        case TFKind::CapIndicator:
            raw_total = cap_area(d, delta);
            break;
        case TFKind::PairIndicator:
        case TFKind::PairwiseZonal:
        case TFKind::TriangleIndicator:
            raw_total = std::pow(sd, k - 1) * detail::zonal_f1_raw(*this);
            break;
        case TFKind::Generic: {
            // tensor quadrature at modest resolution; generic k is capped at 3
            SphereQuadrature q = product_quadrature(d, 24);
            std::vector<SpherePoint> pts(static_cast<size_t>(k));
            std::function<double(int)> rec = [&](int depth) -> double {
                double acc = 0;
                for (size_t i = 0; i < q.size(); ++i) {
                    pts[static_cast<size_t>(depth)] = q.nodes[i];
                    acc += q.w[i] * (depth + 1 == k ? fn(pts) : rec(depth + 1));
                }
                return acc;
            };
            raw_total = rec(0);
            break;
        }
    }
    return raw_total - offset * std::pow(sd, k);
}

/// Copy of f recentered so its total integral vanishes (the degenerate-case
/// normalization: f_1 becomes identically 0 for invariant kinds).
inline TestFunction centered(const TestFunction& f) {
    TestFunction g = f;
    g.offset = 0;
    double total = g.total_integral();
    g.offset = total / std::pow(surface_area(f.d), f.k);
    return g;
}

/// Margins of f: the univariate f_i, the bivariate f_{i,j} (plus its zonal
/// profile when the structure guarantees one), and F = sum_i f_i.
struct MarginSet {
    int d = 2;
    int k = 1;
    std::function<double(const SpherePoint&)> f1;
    std::function<double(const SpherePoint&, const SpherePoint&)> f12;
    std::function<double(double)> f12_profile;  // empty if not structurally zonal
    std::function<double(const SpherePoint&)> F;
    bool F_constant = false;
    double F_value = 0;
};

inline MarginSet compute_margins(const TestFunction& f, int quad_resolution = 48) {
    MarginSet m;
    m.d = f.d;
    m.k = f.k;
    double sd = surface_area(f.d);
    double off = f.offset;
    switch (f.kind) {
        case TFKind::CapIndicator: {
            TestFunction fc = f;
            m.f1 = [fc](const SpherePoint& x) { return fc({x}); };
            m.F = m.f1;
            m.F_constant = false;
            break;
        }
        case TFKind::PairIndicator: {
            double delta = f.delta;
            m.f12_profile = [delta, off](double th) { return (th < delta ? 1.0 : 0.0) - off; };
            double c1 = detail::zonal_f1_raw(f) - off * sd;
            m.f1 = [c1](const SpherePoint&) { return c1; };
            m.F_constant = true;
            m.F_value = 2 * c1;
            break;
        }
        case TFKind::PairwiseZonal: {
            auto g = f.profile;
            m.f12_profile = [g, off](double th) { return g(th) - off; };
            double c1 = detail::zonal_f1_raw(f) - off * sd;
            m.f1 = [c1](const SpherePoint&) { return c1; };
            m.F_constant = true;
            m.F_value = 2 * c1;
            break;
        }
        case TFKind::TriangleIndicator: {
            int d = f.d;
            double delta = f.delta;
            m.f12_profile = [d, delta, off, sd](double th) {
                return (th < delta ? lens_area(d, th, delta) : 0.0) - off * sd;
            };
            double c1 = detail::zonal_f1_raw(f) - off * sd * sd;
            m.f1 = [c1](const SpherePoint&) { return c1; };
            m.F_constant = true;
            m.F_value = 3 * c1;
            break;
        }
        case TFKind::Generic: {
            SphereQuadrature q = product_quadrature(f.d, quad_resolution);
            TestFunction fc = f;
            int k = f.k;
            if (k == 1) {
                m.f1 = [fc](const SpherePoint& x) { return fc({x}); };
            } else if (k == 2) {
                m.f1 = [fc, q](const SpherePoint& x) {
                    return q.integrate([&](const SpherePoint& y) { return fc({x, y}); });
                };
                m.f12 = [fc](const SpherePoint& x, const SpherePoint& y) { return fc({x, y}); };
            } else {
                m.f1 = [fc, q](const SpherePoint& x) {
                    double acc = 0;
                    for (size_t a = 0; a < q.size(); ++a)
                        for (size_t b = 0; b < q.size(); ++b)
                            acc += q.w[a] * q.w[b] * fc({x, q.nodes[a], q.nodes[b]});
                    return acc;
                };
                m.f12 = [fc, q](const SpherePoint& x, const SpherePoint& y) {
                    return q.integrate([&](const SpherePoint& z) { return fc({x, y, z}); });
                };
            }
            break;
        }
    }
    if (!m.f12 && m.f12_profile) {
        auto prof = m.f12_profile;
        m.f12 = [prof](const SpherePoint& x, const SpherePoint& y) {
            return prof(geodesic_distance(x, y));
        };
    }
    if (!m.F) {
        if (m.F_constant) {
            double v = m.F_value;
            m.F = [v](const SpherePoint&) { return v; };
        } else {
            auto f1 = m.f1;
            int k = f.k;
            // symmetric f: all i-margins coincide, so F = k f_1
            m.F = [f1, k](const SpherePoint& x) { return k * f1(x); };
        }
    }
    return m;
}

/// i-margin of f (identical for all i when f is symmetric).
inline std::function<double(const SpherePoint&)> margin_i(const TestFunction& f, int i,
                                                          int quad_resolution = 48) {
    if (i < 1 || i > f.k) throw DomainError("margin_i: index out of range");
    return compute_margins(f, quad_resolution).f1;
}

inline std::function<double(const SpherePoint&, const SpherePoint&)> margin_ij(
    const TestFunction& f, int i, int j, int quad_resolution = 48) {
    if (!(1 <= i && i < j && j <= f.k)) throw DomainError("margin_ij: need 1 <= i < j <= k");
    return compute_margins(f, quad_resolution).f12;
}

inline std::function<double(const SpherePoint&)> F_of(const TestFunction& f,
                                                      int quad_resolution = 48) {
    return compute_margins(f, quad_resolution).F;
}

/// L_nf: sum of f over ordered k-tuples of pairwise-distinct points.
inline double evaluate_L(const Configuration& cfg, const TestFunction& f) {
    const auto& p = cfg.points;
    int n = static_cast<int>(p.size());
    double acc = 0;
    if (f.k == 1) {
        std::vector<SpherePoint> t(1);
        for (int i = 0; i < n; ++i) {
            t[0] = p[i];
            acc += f(t);
        }
        return acc;
    }
    if (f.k == 2) {
        std::vector<SpherePoint> t(2);
        if (f.symmetric) {
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    t[0] = p[i];
                    t[1] = p[j];
                    acc += 2.0 * f(t);
                }
        } else {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    if (j != i) {
                        t[0] = p[i];
                        t[1] = p[j];
                        acc += f(t);
                    }
        }
        return acc;
    }
    if (f.k == 3) {
        std::vector<SpherePoint> t(3);
        if (f.symmetric) {
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j)
                    for (int l = j + 1; l < n; ++l) {
                        t[0] = p[i];
                        t[1] = p[j];
                        t[2] = p[l];
                        acc += 6.0 * f(t);
                    }
        } else {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int l = 0; l < n; ++l)
                        if (i != j && j != l && i != l) {
                            t[0] = p[i];
                            t[1] = p[j];
                            t[2] = p[l];
                            acc += f(t);
                        }
        }
        return acc;
    }
    throw GuardError("evaluate_L: k <= 3 required");
}

}  // namespace sphdpp

#endif
