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

#ifndef SPHDPP_SPECIAL_FUNCTIONS_HPP
#define SPHDPP_SPECIAL_FUNCTIONS_HPP

#include <cmath>
#include <limits>
#include <vector>

#include "sphdpp/base.hpp"

namespace sphdpp {

/// Legendre polynomial of degree n in d dimensions: the Gegenbauer polynomial
/// with parameter (d-1)/2 normalized so P_n(1) = 1.  Three-term recurrence
///   (n+d-1) P_{n+1}(t) = (2n+d-1) t P_n(t) - n P_{n-1}(t),
/// which reduces to the classical Legendre recurrence at d = 2.
inline double legendre(int d, int n, double t) {
    if (d < 2) throw DimensionError("legendre: d >= 2 required");
    if (n < 0) throw DomainError("legendre: n >= 0 required");
    if (t > 1.0 + 1e-12 || t < -1.0 - 1e-12) throw DomainError("legendre: t outside [-1,1]");
    t = std::clamp(t, -1.0, 1.0);
    if (n == 0) return 1.0;
    double pm1 = 1.0, p = t;
    for (int m = 1; m < n; ++m) {
        double next = ((2.0 * m + d - 1.0) * t * p - m * pm1) / (m + d - 1.0);
        pm1 = p;
        p = next;
    }
    return p;
}

/// All of P_0..P_nmax at t in one recurrence pass.
inline void legendre_all(int d, int nmax, double t, std::vector<double>& out) {
    t = std::clamp(t, -1.0, 1.0);
    out.resize(static_cast<size_t>(nmax) + 1);
    out[0] = 1.0;
    if (nmax == 0) return;
    out[1] = t;
    for (int m = 1; m < nmax; ++m)
        out[m + 1] = ((2.0 * m + d - 1.0) * t * out[m] - m * out[m - 1]) / (m + d - 1.0);
}

/// Fixed (d, max_n) evaluator; immutable, safe to share across threads.
struct LegendreEvaluator {
    int d;
    int max_n;
    LegendreEvaluator(int d_, int max_n_) : d(d_), max_n(max_n_) {
        if (d < 2) throw DimensionError("LegendreEvaluator: d >= 2 required");
    }
    double operator()(int n, double t) const {
        if (n > max_n) throw DomainError("LegendreEvaluator: n > max_n");
        return legendre(d, n, t);
    }
};

/// Large-argument cosine form of the Hilb approximation:
///   p_n(theta) = Gamma(d/2) sqrt(2^{d-1}/pi) (n+(d-1)/2)^{-(d-1)/2}
///                (sin theta)^{-(d-1)/2} cos((n+(d-1)/2) theta - (d-1) pi/4)
/// for theta in (0, pi/2], extended by p_n(theta) = (-1)^n p_n(pi - theta).
/// At the endpoints the sin factor diverges; a signed infinity is returned
/// and the value is outside the approximation's validity window.
inline double hilb_p(int d, int n, double theta) {
    if (n < 1) throw DomainError("hilb_p: n >= 1 required");
    double sign = 1.0;
    if (theta > 0.5 * kPi) {
        theta = kPi - theta;
        if (n % 2 == 1) sign = -1.0;
    }
    double nu = n + 0.5 * (d - 1.0);
    double amp = std::exp(std::lgamma(0.5 * d)) * std::sqrt(std::pow(2.0, d - 1) / kPi) *
                 std::pow(nu, -0.5 * (d - 1.0));
    double osc = std::cos(nu * theta - (d - 1.0) * kPi / 4.0);
    double s = std::sin(theta);
    if (s <= 0.0)
        return std::copysign(std::numeric_limits<double>::infinity(), sign * amp * (osc == 0.0 ? 1.0 : osc));
    return sign * amp * std::pow(s, -0.5 * (d - 1.0)) * osc;
}

namespace detail {

inline double bessel_j_series(double nu, double x) {
    double half = 0.5 * x;
    double term = std::exp(nu * std::log(half) - std::lgamma(nu + 1.0));
    if (x == 0.0) return (nu == 0.0) ? 1.0 : 0.0;
    double sum = term;
    double q = half * half;
    for (int j = 1; j < 400; ++j) {
        term *= -q / (j * (j + nu));
        sum += term;
        if (std::abs(term) < 1e-18 * (std::abs(sum) + 1e-300) && j > 4) break;
    }
    return sum;
}

// Large-x cosine asymptotic with P/Q correction series (three terms each).
inline double bessel_j_asymptotic(double nu, double x) {
    double mu = 4.0 * nu * nu;
    double ix = 1.0 / (8.0 * x);
    double ix2 = ix * ix;
    double m1 = mu - 1, m9 = mu - 9, m25 = mu - 25, m49 = mu - 49, m81 = mu - 81, m121 = mu - 121;
    double P = 1.0 - m1 * m9 * ix2 / 2.0 + m1 * m9 * m25 * m49 * ix2 * ix2 / 24.0 -
               m1 * m9 * m25 * m49 * m81 * m121 * ix2 * ix2 * ix2 / 720.0;
    double Q = m1 * ix - m1 * m9 * m25 * ix * ix2 / 6.0 + m1 * m9 * m25 * m49 * m81 * ix * ix2 * ix2 / 120.0;
    double chi = x - (0.5 * nu + 0.25) * kPi;
    return std::sqrt(2.0 / (kPi * x)) * (P * std::cos(chi) - Q * std::sin(chi));
}

}  // namespace detail

/// Bessel function of the first kind, order nu >= 0, x >= 0.  Ascending
/// series below x = nu + 12, cosine asymptotic with corrections above.
inline double bessel_j(double nu, double x) {
    if (x < 0.0) throw DomainError("bessel_j: x >= 0 required");
    if (nu < 0.0) throw DomainError("bessel_j: nu >= 0 required");
    if (x < nu + 12.0) return detail::bessel_j_series(nu, x);
    return detail::bessel_j_asymptotic(nu, x);
}

/// Least-squares fit of |P_n(cos t) - p_n(t)| ~ C (n min(t, pi-t))^s over a
/// grid, plus the worst ratio against the declared (u^{-d/2} ^ 1) envelope.
struct BoundFit {
    double C = 0;
    double s = 0;
    double max_ratio_vs_bound = 0;  // max err / min(u^{-d/2}, 1)
    double max_abs_err = 0;
    int points_used = 0;
};

inline BoundFit certify_hilb_bound(int d, const std::vector<int>& n_list,
                                   const std::vector<double>& theta_grid,
                                   double validity_c = 1.0) {
    BoundFit fit;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (int n : n_list) {
        if (n < 4) throw DomainError("certify_hilb_bound: n >= 4 required");
        for (double th : theta_grid) {
            if (th <= validity_c / n || th >= kPi - validity_c / n) continue;
            double err = std::abs(legendre(d, n, std::cos(th)) - hilb_p(d, n, th));
            double u = n * std::min(th, kPi - th);
            double bound = std::min(std::pow(u, -0.5 * d), 1.0);
            fit.max_ratio_vs_bound = std::max(fit.max_ratio_vs_bound, err / bound);
            fit.max_abs_err = std::max(fit.max_abs_err, err);
            if (err < 1e-14) continue;  // log of near-zero would skew the fit
            double lx = std::log(u), ly = std::log(err);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            ++cnt;
        }
    }
    if (cnt >= 2) {
        double denom = cnt * sxx - sx * sx;
        fit.s = (cnt * sxy - sx * sy) / denom;
        fit.C = std::exp((sy - fit.s * sx) / cnt);
    }
    fit.points_used = cnt;
    return fit;
}

}  // namespace sphdpp

#endif
