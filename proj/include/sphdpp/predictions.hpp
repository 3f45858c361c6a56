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

#ifndef SPHDPP_PREDICTIONS_HPP
#define SPHDPP_PREDICTIONS_HPP

#include <cmath>
#include <functional>

#include "sphdpp/chaos.hpp"
#include "sphdpp/kernel.hpp"
#include "sphdpp/quadrature.hpp"
#include "sphdpp/test_function.hpp"

namespace sphdpp {

/// The singular-pairing constant 2^{d-1} Gamma(d/2)^2 / (Gamma(d) pi) that
/// multiplies Int Int g / sin^{d-1}(dist) in the limit statements.
inline double singular_pairing_constant(int d) {
    return std::exp((d - 1) * std::log(2.0) + 2.0 * std::lgamma(0.5 * d) - std::lgamma(d)) / kPi;
}

/// Int Int g(x,y) sin^{-(d-1)}(dist) dx dy for a zonal g: the singular factor
/// cancels in colatitude coordinates, leaving s_d s_{d-1} Int_0^pi g(theta).
inline double singular_pairing_zonal(int d, const ZonalProfile& g, int res = 192) {
    return surface_area(d) * surface_area(d - 1) *
           gl_integrate(g.eval, 0.0, kPi, res, g.breaks);
}

/// Generic route for bounded bivariate f: inner singular rule about each
/// outer node.
inline double singular_pairing_generic(
    int d, const std::function<double(const SpherePoint&, const SpherePoint&)>& f, int res = 32) {
    SphereQuadrature outer = product_quadrature(d, res);
    double acc = 0;
    for (size_t i = 0; i < outer.size(); ++i) {
        auto inner = singular_quadrature_about(outer.nodes[i], res);
        const SpherePoint& x = outer.nodes[i];
        acc += outer.w[i] *
               inner.integrate_singular([&](const SpherePoint& z) { return f(x, z); });
    }
    return acc;
}

/// The limiting value of (1/k_n) Int Int f K_n^2:
///   (2^{d-1}/(Gamma(d) pi)) (Gamma(d/2)/s_d)^2 Int Int f / sin^{d-1}(dist).
inline double lemma_sc_functional(
    int d, const std::function<double(const SpherePoint&, const SpherePoint&)>& f, int res = 32) {
    double sd = surface_area(d);
    return singular_pairing_constant(d) / (sd * sd) * singular_pairing_generic(d, f, res);
}

inline double lemma_sc_functional_zonal(int d, const ZonalProfile& g, int res = 192) {
    double sd = surface_area(d);
    return singular_pairing_constant(d) / (sd * sd) * singular_pairing_zonal(d, g, res);
}

/// Finite-n counterpart (1/k_n) Int Int f K_n^2 for zonal f, by a colatitude
/// integral; used to check the convergence claimed by the limit statement.
inline double kernel_sq_pairing_zonal(const KernelSpec& spec, const ZonalProfile& g,
                                      int res = 256) {
    double v = colatitude_integral(
        spec.d,
        [&](double th) {
            double p = legendre(spec.d, spec.n, std::cos(th));
            return g.eval(th) * p * p;
        },
        res, g.breaks);
    return spec.s_d * surface_area(spec.d - 1) * spec.density() * spec.density() * v /
           static_cast<double>(spec.k_n);
}

/// Two-term mean expansion: (k_n/s_d)^k Int f minus the pair-collision
/// correction over all i < j margins.
inline double predicted_mean(const TestFunction& f, const KernelSpec& spec, int res = 32) {
    double first = std::pow(spec.density(), f.k) * f.total_integral();
    if (f.k < 2) return first;
    double pairing;
    MarginSet m = compute_margins(f);
    if (m.f12_profile) {
        ZonalProfile g;
        g.eval = m.f12_profile;
        if (f.kind == TFKind::PairIndicator || f.kind == TFKind::TriangleIndicator)
            g.breaks = {f.delta};
        pairing = singular_pairing_zonal(spec.d, g);
    } else {
        pairing = singular_pairing_generic(spec.d, m.f12, res);
    }
    double npairs = 0.5 * f.k * (f.k - 1);
    double correction = std::pow(double(spec.k_n), f.k - 1) / std::pow(spec.s_d, f.k) * npairs *
                        singular_pairing_constant(spec.d) * pairing;
    return first - correction;
}

/// Whether F = sum_i f_i is (numerically) constant; degenerate f goes down
/// the chaos route, non-degenerate down the CLT route.
inline bool margins_degenerate(const TestFunction& f, const MarginSet& m, int probes = 60) {
    if (m.F_constant) return true;
    StreamRng rng(0xF0F0F0F0ull, 3);
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i < probes; ++i) {
        double v = m.F(uniform_sample(rng, f.d));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return (hi - lo) <= 1e-6;
}

/// Theorem-scale variance prediction in the non-degenerate regime:
///   k_n^{2k-1} (2^{d-2}/(s_d^{2k} Gamma(d) pi)) Gamma(d/2)^2
///   Int Int (F(x)-F(y))^2 / sin^{d-1}(dist).
inline double predicted_variance_clt(const TestFunction& f, const KernelSpec& spec, int res = 40) {
    MarginSet m = compute_margins(f);
    if (margins_degenerate(f, m))
        throw DegeneracyError("predicted_variance_clt: F is constant; use the chaos prediction");
    int d = spec.d;
    double sd = spec.s_d, sd1 = surface_area(d - 1);

    double pairing;
    if (f.kind == TFKind::CapIndicator) {
        // indicator algebra: (F(x)-F(y))^2 = f(x)+f(y)-2 f(x) f(y), so the
        // pairing reduces to nested colatitude profiles
        double delta = f.delta;
        double area = cap_area(d, delta);
        auto rho = [&](double tau) {  // Int_cap sin^{-(d-1)}(dist(x,.)) at colat(x)=tau
            std::vector<double> psi_breaks;
            for (double cand : {std::abs(tau - delta), tau + delta, 2 * kPi - tau - delta})
                if (cand > 1e-12 && cand < kPi - 1e-12) psi_breaks.push_back(cand);
            return gl_integrate(
                [&](double psi) {
                    return azimuth_arc_measure(d, detail::cap_arc_half_angle(psi, tau, delta));
                },
                0.0, kPi, 96, psi_breaks);
        };
        double cross = sd1 * gl_integrate(
                                 [&](double tau) { return std::pow(std::sin(tau), d - 1) * rho(tau); },
                                 0.0, delta, 96, {0.5 * delta});
        pairing = 2.0 * (area * kPi * sd1 - cross);
    } else {
        SphereQuadrature outer = product_quadrature(d, res);
        std::vector<double> Fv(outer.size());
        for (size_t i = 0; i < outer.size(); ++i) Fv[i] = m.F(outer.nodes[i]);
        double acc = 0;
        for (size_t i = 0; i < outer.size(); ++i) {
            auto inner = singular_quadrature_about(outer.nodes[i], res);
            double Fi = Fv[i];
            acc += outer.w[i] * inner.integrate_singular([&](const SpherePoint& z) {
                double df = Fi - m.F(z);
                return df * df;
            });
        }
        pairing = acc;
    }
    double constant = std::exp((d - 2) * std::log(2.0) + 2.0 * std::lgamma(0.5 * d) -
                               std::lgamma(d)) /
                      kPi / std::pow(sd, 2.0 * f.k);
    return std::pow(double(spec.k_n), 2.0 * f.k - 1.0) * constant * pairing;
}

/// Degenerate-regime variance prediction:
///   k_n^{2k-2} (2 C_d^2 k^2 (k-1)^2 / (Gamma(d)^2 s_d^{2k})) sum z_j^2.
inline double predicted_variance_chaos(const TestFunction& f, const KernelSpec& spec,
                                       const ChaosSpectrum& sp) {
    if (f.k < 2) throw GuardError("predicted_variance_chaos: k >= 2 required");
    MarginSet m = compute_margins(f);
    if (!margins_degenerate(f, m))
        throw DegeneracyError("predicted_variance_chaos: F is not constant; use the CLT prediction");
    int d = spec.d;
    double gd = std::exp(std::lgamma(d));
    double c = 2.0 * spec.C_d * spec.C_d * f.k * f.k * (f.k - 1.0) * (f.k - 1.0) /
               (gd * gd * std::pow(spec.s_d, 2.0 * f.k));
    return std::pow(double(spec.k_n), 2.0 * f.k - 2.0) * c * sp.hs_norm_sq;
}

/// Centering/scaling of the degenerate limit:
///   scale = (k_n/s_d)^k C_d k(k-1) / n^{d-1};  the center is the empirical
///   mean unless a caller supplies the predicted one.
struct StandardizationConstants {
    double center = 0;
    double scale = 1;
};

inline StandardizationConstants standardization_constants(const KernelSpec& spec, int k) {
    if (k < 2) throw GuardError("standardization_constants: k >= 2 required");
    StandardizationConstants s;
    s.scale = std::pow(spec.density(), k) * spec.C_d * k * (k - 1.0) /
              std::pow(double(spec.n), spec.d - 1.0);
    return s;
}

}  // namespace sphdpp

#endif
