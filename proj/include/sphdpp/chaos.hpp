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

#ifndef SPHDPP_CHAOS_HPP
#define SPHDPP_CHAOS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sphdpp/kernel.hpp"
#include "sphdpp/quadrature.hpp"
#include "sphdpp/rng.hpp"
#include "sphdpp/test_function.hpp"

namespace sphdpp {

/// A zonal bivariate function by its distance profile, with the angles where
/// the profile loses smoothness (indicator edges).
struct ZonalProfile {
    std::function<double(double)> eval;
    std::vector<double> breaks;
};

inline ZonalProfile f12_zonal_profile(const TestFunction& f) {
    MarginSet m = compute_margins(f);
    if (!m.f12_profile)
        throw DomainError("f12_zonal_profile: test function has no structurally zonal margin");
    ZonalProfile p;
    p.eval = m.f12_profile;
    if (f.kind == TFKind::PairIndicator || f.kind == TFKind::TriangleIndicator)
        p.breaks = {f.delta};
    return p;
}

namespace detail {

// Int over the azimuth direction sphere of prof(dist(x, z)) where z sits at
// colatitude psi from the center and x at colatitude theta; d = 2 or 3
// handled with the exact arc measures, higher d via the sin^{d-2} weight.
inline double azimuth_profile_integral(int d, const std::function<double(double)>& prof,
                                       const std::vector<double>& prof_breaks, double theta,
                                       double psi, int res) {
    double ct = std::cos(theta), st = std::sin(theta);
    double cp = std::cos(psi), sp = std::sin(psi);
    auto dist_of = [&](double alpha) {
        return std::acos(std::clamp(ct * cp + st * sp * std::cos(alpha), -1.0, 1.0));
    };
    // the distance sweeps [|theta-psi|, min(theta+psi, 2pi-theta-psi)];
    // profile kinks at delta map to alpha* = cap_arc_half_angle
    std::vector<double> breaks;
    for (double b : prof_breaks) {
        double a = cap_arc_half_angle(psi, theta, b);
        if (a > 1e-12 && a < kPi - 1e-12) breaks.push_back(a);
    }
    double weight_norm = (d == 2) ? 2.0 : surface_area(d - 2);
    return weight_norm * gl_integrate(
                             [&](double a) {
                                 double w = (d == 2) ? 1.0 : std::pow(std::sin(a), d - 2);
                                 return prof(dist_of(a)) * w;
                             },
                             0.0, kPi, res, breaks);
}

}  // namespace detail

/// Distance profile of h-hat: for x, y at distance theta,
///   hhat(theta) = Int (f12(theta) - f12(dist(x,z))) sin^{-(d-1)}(dist(z,y)) dz,
/// the singular factor cancelling against the Jacobian about y.
inline ZonalProfile hhat_profile(int d, const ZonalProfile& f12, int res = 96) {
    ZonalProfile out;
    out.breaks = f12.breaks;
    auto prof = f12.eval;
    auto breaks = f12.breaks;
    out.eval = [d, prof, breaks, res](double theta) {
        double first = kPi * surface_area(d - 1) * prof(theta);
        // psi panels where the azimuth arc structure changes
        std::vector<double> psi_breaks;
        for (double b : breaks) {
            for (double cand : {std::abs(theta - b), theta + b, 2 * kPi - theta - b})
                if (cand > 1e-12 && cand < kPi - 1e-12) psi_breaks.push_back(cand);
        }
        double second = gl_integrate(
            [&](double psi) {
                return detail::azimuth_profile_integral(d, prof, breaks, theta, psi, res);
            },
            0.0, kPi, res, psi_breaks);
        return first - second;
    };
    return out;
}

/// Distance profile of h_n(x,y) = (k_n/s_d)^{-1} f12(x,y)
///                                - Int f12(x,z) P_n^2(y,z) dz.
inline ZonalProfile hn_profile(const KernelSpec& spec, const ZonalProfile& f12, int res = 96) {
    ZonalProfile out;
    out.breaks = f12.breaks;
    auto prof = f12.eval;
    auto breaks = f12.breaks;
    int d = spec.d, n = spec.n;
    double inv_density = spec.s_d / static_cast<double>(spec.k_n);
    out.eval = [d, n, prof, breaks, res, inv_density](double theta) {
        std::vector<double> psi_breaks;
        for (double b : breaks) {
            for (double cand : {std::abs(theta - b), theta + b, 2 * kPi - theta - b})
                if (cand > 1e-12 && cand < kPi - 1e-12) psi_breaks.push_back(cand);
        }
        double second = gl_integrate(
            [&](double psi) {
                double pn = legendre(d, n, std::cos(psi));
                return pn * pn * std::pow(std::sin(psi), d - 1) *
                       detail::azimuth_profile_integral(d, prof, breaks, theta, psi, res);
            },
            0.0, kPi, res, psi_breaks);
        return inv_density * prof(theta) - second;
    };
    return out;
}

/// Pointwise h-hat for a caller-supplied bivariate zonal function; the
/// zonality of f12 is probed numerically before integrating.
inline double h_hat(int d, const std::function<double(const SpherePoint&, const SpherePoint&)>& f12,
                    const SpherePoint& x, const SpherePoint& y, int resolution = 64) {
    StreamRng probe_rng(0x5EED5EEDull, 17);
    for (int probe = 0; probe < 20; ++probe) {
        double th = 0.15 + 0.9 * probe_rng.uniform01() * (kPi - 0.3);
        th = std::min(th, kPi - 0.15);
        auto pair_at = [&](double t) {
            SpherePoint a = uniform_sample(probe_rng, d);
            SpherePoint u = uniform_sample(probe_rng, d);
            double ua = u.dot(a);
            SpherePoint v = u;
            for (int i = 0; i <= d; ++i) v.c[i] -= ua * a.c[i];
            v = normalized(v);
            SpherePoint b = a;
            for (int i = 0; i <= d; ++i) b.c[i] = std::cos(t) * a.c[i] + std::sin(t) * v.c[i];
            return std::make_pair(a, b);
        };
        auto [a1, b1] = pair_at(th);
        auto [a2, b2] = pair_at(th);
        if (std::abs(f12(a1, b1) - f12(a2, b2)) > 1e-6)
            throw DomainError("h_hat: f12 failed the zonality probe");
    }
    auto rule = singular_quadrature_about(y, resolution);
    double fxy = f12(x, y);
    return rule.integrate_singular([&](const SpherePoint& z) { return fxy - f12(x, z); });
}

/// Pointwise finite-n kernel via the second form of its definition.
inline double compute_h_n(const std::function<double(const SpherePoint&, const SpherePoint&)>& f12,
                          const KernelSpec& spec, const SpherePoint& x, const SpherePoint& y,
                          int resolution = 64) {
    auto q = product_quadrature(spec.d, resolution);
    double second = q.integrate([&](const SpherePoint& z) {
        double pn = legendre(spec.d, spec.n, std::clamp(y.dot(z), -1.0, 1.0));
        return f12(x, z) * pn * pn;
    });
    return (spec.s_d / static_cast<double>(spec.k_n)) * f12(x, y) - second;
}

enum class SpectralMethod { FunkHecke, Nystrom };

/// Eigenvalues z_j of the h-hat integral operator, with multiplicity copies
/// expanded, sorted by decreasing |z|, truncated so the dropped tail of
/// sum z^2 stays below epsilon relative.
struct ChaosSpectrum {
    std::vector<double> eigenvalues;  // truncated copies
    double hs_norm_sq = 0;            // sum over all computed copies of z^2
    SpectralMethod method = SpectralMethod::FunkHecke;
    int truncation = 0;   // copies kept
    double tail_sq = 0;   // sum z^2 dropped by the truncation
};

struct SpectrumOptions {
    SpectralMethod method = SpectralMethod::FunkHecke;
    double epsilon = 1e-6;     // relative tail tolerance
    int max_copies = 2000;     // cap on kept eigenvalue copies
    int max_degree = 256;      // Funk-Hecke degree sweep
    int profile_res = 96;      // quadrature for the profile integrals
    int nystrom_res = 64;      // colatitude nodes per azimuthal mode
    int nystrom_modes = 160;   // azimuthal mode sweep bound (d = 2)
};

namespace detail {

// piecewise cubic Hermite interpolant of a profile, split at its breaks
struct ProfileTable {
    std::vector<double> lo, hi;          // piece bounds
    std::vector<std::vector<double>> y;  // samples per piece
    double step(size_t p) const { return (hi[p] - lo[p]) / (y[p].size() - 1.0); }

    ProfileTable(const std::function<double(double)>& f, std::vector<double> breaks, int npts) {
        breaks.push_back(0.0);
        breaks.push_back(kPi);
        std::sort(breaks.begin(), breaks.end());
        for (size_t i = 0; i + 1 < breaks.size(); ++i) {
            if (breaks[i + 1] - breaks[i] < 1e-12) continue;
            lo.push_back(breaks[i]);
            hi.push_back(breaks[i + 1]);
            std::vector<double> vals(static_cast<size_t>(npts));
            for (int j = 0; j < npts; ++j) {
                double t = breaks[i] + (breaks[i + 1] - breaks[i]) * j / (npts - 1.0);
                // sample strictly inside the piece at the edges of a jump
                if (j == 0) t += 1e-9 * (breaks[i + 1] - breaks[i]);
                if (j == npts - 1) t -= 1e-9 * (breaks[i + 1] - breaks[i]);
                vals[static_cast<size_t>(j)] = f(t);
            }
            y.push_back(std::move(vals));
        }
    }

    double operator()(double t) const {
        t = std::clamp(t, lo.front(), hi.back());
        size_t p = 0;
        while (p + 1 < lo.size() && t >= hi[p]) ++p;
        const auto& v = y[p];
        double h = step(p);
        double s = (t - lo[p]) / h;
        long i = std::clamp<long>(static_cast<long>(s), 1, static_cast<long>(v.size()) - 3);
        double u = s - i;
        // cubic through centered finite-difference slopes
        double m0 = 0.5 * (v[i + 1] - v[i - 1]);
        double m1 = 0.5 * (v[i + 2] - v[i]);
        double a = v[i], b = m0, c = 3 * (v[i + 1] - v[i]) - 2 * m0 - m1,
               e = 2 * (v[i] - v[i + 1]) + m0 + m1;
        return a + u * (b + u * (c + u * e));
    }
};

inline ChaosSpectrum assemble_spectrum(std::vector<double> copies, double sum_all,
                                       const SpectrumOptions& opts, SpectralMethod method) {
    std::sort(copies.begin(), copies.end(),
              [](double a, double b) { return std::abs(a) > std::abs(b); });
    double kept = 0;
    size_t n = 0;
    double target = (1.0 - opts.epsilon) * sum_all;
    while (n < copies.size() && (kept < target || n == 0)) {
        kept += copies[n] * copies[n];
        ++n;
        if (static_cast<int>(n) >= opts.max_copies) break;
    }
    if (kept < target)
        throw NumericalError("spectrum: tail bound " + std::to_string(opts.epsilon) +
                             " unattainable within " + std::to_string(opts.max_copies) +
                             " copies (kept " + std::to_string(kept) + " of " +
                             std::to_string(sum_all) + ")");
    ChaosSpectrum s;
    s.method = method;
    s.hs_norm_sq = sum_all;
    s.truncation = static_cast<int>(n);
    s.tail_sq = std::max(0.0, sum_all - kept);
    copies.resize(n);
    s.eigenvalues = std::move(copies);
    return s;
}

}  // namespace detail

/// Hilbert-Schmidt mass of a zonal kernel: Int Int g(dist)^2 over two spheres.
inline double zonal_hs_norm_sq(int d, const ZonalProfile& g, int res = 256) {
    return surface_area(d) * surface_area(d - 1) *
           colatitude_integral(
               d, [&](double th) { return g.eval(th) * g.eval(th); }, res,
               g.breaks.empty() ? std::vector<double>{} : g.breaks);
}

/// Cycle integral Int g(x1,x2) g(x2,x3) ... g(xm,x1) of a zonal kernel via its
/// Funk-Hecke eigenvalues: sum_j k_j lambda_j^m.
inline double zonal_cycle_integral(int d, const ZonalProfile& g, int m, int max_degree = 256,
                                   int res = 256) {
    std::vector<double> pj;
    double total = 0;
    GaussRule rule = gauss_gegenbauer(res, 0.5 * (d - 2));
    // with breaks, fall back to split Gauss-Legendre in theta
    std::vector<double> th, wt;
    detail::colatitude_nodes(d, res, g.breaks, th, wt);
    double sd1 = surface_area(d - 1);
    std::vector<std::vector<double>> legvals(th.size());
    for (size_t i = 0; i < th.size(); ++i) legendre_all(d, max_degree, std::cos(th[i]), legvals[i]);
    for (int j = 0; j <= max_degree; ++j) {
        double lam = 0;
        for (size_t i = 0; i < th.size(); ++i) lam += wt[i] * g.eval(th[i]) * legvals[i][static_cast<size_t>(j)];
        lam *= sd1;
        total += static_cast<double>(dimension(d, j)) * std::pow(lam, m);
    }
    (void)rule;
    return total;
}

/// Spectral decomposition of the h-hat operator for the margin of f.
inline ChaosSpectrum spectrum(const TestFunction& f, const SpectrumOptions& opts = {}) {
    int d = f.d;
    ZonalProfile f12 = f12_zonal_profile(f);
    ZonalProfile hh = hhat_profile(d, f12, opts.profile_res);
    detail::ProfileTable table(hh.eval, hh.breaks, 2049);

    if (opts.method == SpectralMethod::FunkHecke) {
        // z_j = s_{d-1} Int hhat(theta) P_j(cos theta) sin^{d-1} theta dtheta,
        // with multiplicity dim H_j
        std::vector<double> th, wt;
        int res = std::max(192, opts.max_degree + 16);
        detail::colatitude_nodes(d, res, hh.breaks, th, wt);
        double sd1 = surface_area(d - 1);
        std::vector<double> hvals(th.size());
        for (size_t i = 0; i < th.size(); ++i) hvals[i] = table(th[i]);
        std::vector<double> copies;
        double sum_all = 0;
        std::vector<double> leg;
        std::vector<std::vector<double>> legvals(th.size());
        for (size_t i = 0; i < th.size(); ++i)
            legendre_all(d, opts.max_degree, std::cos(th[i]), legvals[i]);
        for (int j = 0; j <= opts.max_degree; ++j) {
            double z = 0;
            for (size_t i = 0; i < th.size(); ++i)
                z += wt[i] * hvals[i] * legvals[i][static_cast<size_t>(j)];
            z *= sd1;
            int64_t mult = dimension(d, j);
            sum_all += mult * z * z;
            for (int64_t c = 0; c < mult; ++c) copies.push_back(z);
        }
        (void)leg;
        return detail::assemble_spectrum(std::move(copies), sum_all, opts,
                                         SpectralMethod::FunkHecke);
    }

    // Nystrom: for d = 2, the zonal operator block-diagonalizes over
    // azimuthal Fourier modes; each mode kernel
    //   K_m(t,t') = 2 Int_0^pi hhat(dist)(cos m psi) dpsi
    // is discretized on colatitude Gauss nodes (weight-symmetrized) and
    // solved densely.  Eigenvalue z_j then shows up once in every |m| <= j,
    // reproducing the 2j+1 multiplicity.
    if (d != 2) throw GuardError("spectrum: Nystrom path implemented for d = 2");
    GaussRule gr = gauss_gegenbauer(opts.nystrom_res, 0.0);
    std::vector<double> th(gr.x.size()), w(gr.x.size());
    for (size_t i = 0; i < gr.x.size(); ++i) {
        th[i] = std::acos(std::clamp(gr.x[i], -1.0, 1.0));
        w[i] = gr.w[i];
    }
    const int N = static_cast<int>(th.size());
    std::vector<double> copies;
    double sum_all = 0;
    double global_top = 0;
    for (int m = 0; m <= opts.nystrom_modes; ++m) {
        Eigen::MatrixXd B(N, N);
        for (int p = 0; p < N; ++p) {
            for (int q = 0; q <= p; ++q) {
                std::vector<double> psi_breaks;
                for (double b : hh.breaks) {
                    double a = detail::cap_arc_half_angle(th[q], th[p], b);
                    if (a > 1e-12 && a < kPi - 1e-12) psi_breaks.push_back(a);
                }
                double ct = std::cos(th[p]) * std::cos(th[q]);
                double st = std::sin(th[p]) * std::sin(th[q]);
                double km = 2.0 * gl_integrate(
                                      [&](double psi) {
                                          double dist = std::acos(
                                              std::clamp(ct + st * std::cos(psi), -1.0, 1.0));
                                          return table(dist) * std::cos(m * psi);
                                      },
                                      0.0, kPi, 48, psi_breaks);
                double v = std::sqrt(w[p] * w[q]) * km;
                B(p, q) = B(q, p) = v;
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
        double mode_top = 0;
        for (int i = 0; i < N; ++i) {
            double z = es.eigenvalues()(i);
            mode_top = std::max(mode_top, std::abs(z));
        }
        global_top = std::max(global_top, mode_top);
        // copies: mode 0 once, modes m >= 1 twice (m and -m)
        int reps = (m == 0) ? 1 : 2;
        for (int i = 0; i < N; ++i) {
            double z = es.eigenvalues()(i);
            if (std::abs(z) < 1e-12 * std::max(global_top, 1e-300)) continue;
            for (int r = 0; r < reps; ++r) {
                copies.push_back(z);
                sum_all += z * z;
            }
        }
        if (mode_top < 1e-9 * global_top && m > 4) break;
    }
    return detail::assemble_spectrum(std::move(copies), sum_all, opts, SpectralMethod::Nystrom);
}

/// Draws of sum_j z_j (chi_j - 1)/2 over the truncated spectrum.
inline std::vector<double> sample_limit_law(const ChaosSpectrum& spec, StreamRng& rng, long count) {
    std::vector<double> out(static_cast<size_t>(count));
    for (long i = 0; i < count; ++i) {
        double acc = 0;
        for (double z : spec.eigenvalues) acc += z * (rng.chisq1() - 1.0) * 0.5;
        out[static_cast<size_t>(i)] = acc;
    }
    return out;
}

/// Q_m of the limit law: (m-1)!/2 sum_j z_j^m.
inline double limit_cumulants(const ChaosSpectrum& spec, int m) {
    if (m < 2) throw DomainError("limit_cumulants: m >= 2 required");
    double fact = 1;
    for (int i = 2; i <= m - 1; ++i) fact *= i;
    double acc = 0;
    for (double z : spec.eigenvalues) acc += std::pow(z, m);
    return 0.5 * fact * acc;
}

}  // namespace sphdpp

#endif
