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

#ifndef SPHDPP_CUMULANT_GRAPHS_HPP
#define SPHDPP_CUMULANT_GRAPHS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <ostream>
#include <vector>

#include "sphdpp/kernel.hpp"
#include "sphdpp/quadrature.hpp"
#include "sphdpp/test_function.hpp"

namespace sphdpp {

// ---------------------------------------------------------------------------
// index assignments T and their canonical (first-use) labeling
// ---------------------------------------------------------------------------

/// m tuples of k pairwise-distinct indices, in canonical form: labels appear
/// in increasing order of first use, reading tuples left to right.  Two
/// assignments differing by a relabeling have the same canonical form.
struct TAssignment {
    int m = 0;
    int k = 0;
    std::vector<std::array<int, 3>> tuples;  // tuples[i][j], j < k, labels 0-based
    int size = 0;                            // |T| = number of distinct labels

    int label(int i, int j) const { return tuples[static_cast<size_t>(i)][static_cast<size_t>(j)]; }
};

/// Canonical relabeling by first use; the representative of T's class.
inline TAssignment canonicalize(const TAssignment& t) {
    TAssignment c = t;
    std::vector<int> map(static_cast<size_t>(t.m) * t.k, -1);
    int next = 0;
    for (int i = 0; i < t.m; ++i)
        for (int j = 0; j < t.k; ++j) {
            int q = t.label(i, j);
            if (map[q] < 0) map[q] = next++;
            c.tuples[i][j] = map[q];
        }
    c.size = next;
    return c;
}

inline void check_class_guard(int m, int k) {
    if (m < 1 || k < 1) throw GuardError("enumerate_classes: m, k >= 1 required");
    if (m > 4 || k > 3)
        throw GuardError("enumerate_classes: size guard m <= 4, k <= 3 (got m=" +
                         std::to_string(m) + ", k=" + std::to_string(k) + ")");
}

/// One canonical representative per equivalence class of M(m,k), built by
/// sequential tuple construction in first-use label order.
inline std::vector<TAssignment> enumerate_classes(int m, int k) {
    check_class_guard(m, k);
    std::vector<TAssignment> out;
    TAssignment t;
    t.m = m;
    t.k = k;
    t.tuples.assign(static_cast<size_t>(m), {});
    std::function<void(int, int, int)> rec = [&](int i, int j, int used) {
        if (i == m) {
            t.size = used;
            out.push_back(t);
            return;
        }
        int ni = (j + 1 == k) ? i + 1 : i;
        int nj = (j + 1 == k) ? 0 : j + 1;
        // any previously used label not already in this tuple, or one new label
        for (int q = 0; q <= used; ++q) {
            bool dup = false;
            for (int jj = 0; jj < j; ++jj) dup |= (t.tuples[i][jj] == q);
            if (dup) continue;
            t.tuples[i][j] = q;
            rec(ni, nj, std::max(used, q + 1));
        }
    };
    rec(0, 0, 0);
    return out;
}

// ---------------------------------------------------------------------------
// (T, sigma) graphs and their classification
// ---------------------------------------------------------------------------

/// A (T, sigma) pair with its classification flags.  sigma permutes the
/// labels 0..|T|-1 (= Range(T) in canonical form).
struct TSigmaGraph {
    TAssignment t;
    std::vector<int> sigma;
    bool connected = false;
    bool reducible = false;
    bool circle_like = false;
    int a_sigma = 0;  // number of non-fixed labels
    int sign = 1;
    std::vector<int> circle_perm;  // row cycle p when circle_like (p[i] = successor row)

    int size() const { return t.size; }
};

namespace detail {

struct UnionFind {
    std::array<int, 16> parent{};
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace detail

/// Populate all flags.  Connectivity is a union-find over the km vertices
/// (i,j) with black tuple edges, solid red equal-label edges, and dotted red
/// sigma edges.
inline TSigmaGraph classify(const TAssignment& t, std::vector<int> sigma) {
    if (static_cast<int>(sigma.size()) != t.size)
        throw DomainError("classify: sigma must permute Range(T)");
    TSigmaGraph g;
    g.t = t;
    g.sigma = std::move(sigma);
    const int m = t.m, k = t.k, nv = m * k;
    auto vid = [k](int i, int j) { return i * k + j; };

    // vertices carrying each label
    std::array<std::vector<int>, 16> verts;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j) verts[t.label(i, j)].push_back(vid(i, j));

    detail::UnionFind uf;
    for (int v = 0; v < nv; ++v) uf.parent[v] = v;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j + 1 < k; ++j) uf.unite(vid(i, j), vid(i, j + 1));  // black
    for (int q = 0; q < t.size; ++q)
        for (size_t a = 1; a < verts[q].size(); ++a) uf.unite(verts[q][0], verts[q][a]);  // solid
    for (int q = 0; q < t.size; ++q)
        if (g.sigma[q] != q)
            uf.unite(verts[q][0], verts[g.sigma[q]][0]);  // dotted
    int comps = 0;
    for (int v = 0; v < nv; ++v) comps += (uf.find(v) == v);
    g.connected = (comps == 1);

    // sign and a(sigma) from the cycle decomposition
    std::array<bool, 8> seen{};
    for (int q = 0; q < t.size; ++q) {
        if (seen[q]) continue;
        int len = 0;
        for (int r = q; !seen[r]; r = g.sigma[r]) {
            seen[r] = true;
            ++len;
        }
        if (len > 1) g.a_sigma += len;
        if (len % 2 == 0) g.sign = -g.sign;
    }

    // connection points: sigma(T_ij) not in T_i, or T_ij shared with another row
    auto in_row = [&](int i, int q) {
        for (int j = 0; j < k; ++j)
            if (t.label(i, j) == q) return true;
        return false;
    };
    auto connection_point = [&](int i, int j) {
        int q = t.label(i, j);
        if (!in_row(i, g.sigma[q])) return true;
        for (int v : verts[q])
            if (v / k != i) return true;
        return false;
    };

    if (g.connected) {
        for (int i = 0; i < m && !g.reducible; ++i) {
            int cp = -1, ncp = 0;
            for (int j = 0; j < k; ++j)
                if (connection_point(i, j)) {
                    cp = j;
                    ++ncp;
                }
            if (ncp != 1) continue;
            bool fixed_rest = true;
            for (int j = 0; j < k; ++j) {
                if (j == cp) continue;
                int q = t.label(i, j);
                fixed_rest &= (g.sigma[q] == q);
            }
            if (fixed_rest) g.reducible = true;  // breaks at (i, cp)
        }

        if (!g.reducible && m >= 2) {
            // red edges as vertex pairs: solid between equal labels, dotted
            // between q and sigma(q)
            std::array<int, 16> red_degree{};
            std::array<int, 16> red_peer{};  // a vertex it connects to (valid if degree==1)
            red_peer.fill(-1);
            auto add_edge = [&](int v, int w) {
                red_degree[v]++;
                red_degree[w]++;
                red_peer[v] = w;
                red_peer[w] = v;
            };
            for (int q = 0; q < t.size; ++q)
                for (size_t a = 0; a < verts[q].size(); ++a)
                    for (size_t b = a + 1; b < verts[q].size(); ++b)
                        add_edge(verts[q][a], verts[q][b]);
            for (int q = 0; q < t.size; ++q) {
                int r = g.sigma[q];
                if (r == q) continue;
                // undirected: count the pair once (also covers sigma(r)==q)
                if (r < q && g.sigma[r] == q) continue;
                for (int va : verts[q])
                    for (int vb : verts[r]) add_edge(va, vb);
            }
            bool ok = true;
            std::vector<std::array<int, 2>> marked(static_cast<size_t>(m), {-1, -1});
            for (int i = 0; i < m && ok; ++i) {
                int cnt = 0;
                for (int j = 0; j < k; ++j) {
                    int v = vid(i, j);
                    if (red_degree[v] == 0) continue;
                    if (red_degree[v] != 1 || red_peer[v] / k == i) {
                        ok = false;
                        break;
                    }
                    if (cnt < 2) marked[i][cnt] = v;
                    ++cnt;
                }
                ok &= (cnt == 2);
            }
            if (ok) {
                // contract rows: walk the red edges from marked vertex to
                // marked vertex; circle-like iff this traces one m-cycle
                std::vector<int> succ(static_cast<size_t>(m), -1);
                std::vector<bool> visited(static_cast<size_t>(m), false);
                bool cyc = true;
                int row = 0, out_slot = 0;
                for (int step = 0; step < m; ++step) {
                    visited[row] = true;
                    int w = red_peer[marked[row][out_slot]];
                    int nrow = w / k;
                    succ[row] = nrow;
                    // leave the next row through its other marked vertex
                    out_slot = (marked[nrow][0] == w) ? 1 : 0;
                    if (marked[nrow][0] != w && marked[nrow][1] != w) {
                        cyc = false;  // edge landed on an unmarked vertex
                        break;
                    }
                    row = nrow;
                    if (step + 1 < m && row == 0) {
                        cyc = false;  // returned early: shorter cycle
                        break;
                    }
                }
                cyc = cyc && (row == 0);
                for (int i = 0; i < m && cyc; ++i) cyc &= visited[i];
                if (cyc) {
                    g.circle_like = true;
                    g.circle_perm = succ;
                }
            }
        }
    }
    return g;
}

inline void check_sigma_guard(int m, int k) {
    check_class_guard(m, k);
    if (m * k > 8)
        throw GuardError("enumerate_connected: |T| <= 8 guard for the sigma sweep requires km <= 8 "
                         "(got km=" + std::to_string(m * k) + ")");
}

/// Visit every (canonical T, sigma) with a connected graph, i.e. C(m).
template <class Fn>
inline void for_each_connected(int m, int k, Fn&& fn) {
    check_sigma_guard(m, k);
    for (const TAssignment& t : enumerate_classes(m, k)) {
        std::vector<int> sigma(static_cast<size_t>(t.size));
        std::iota(sigma.begin(), sigma.end(), 0);
        do {
            TSigmaGraph g = classify(t, sigma);
            if (g.connected) fn(g);
        } while (std::next_permutation(sigma.begin(), sigma.end()));
    }
}

inline std::vector<TSigmaGraph> enumerate_connected(int m, int k) {
    std::vector<TSigmaGraph> out;
    for_each_connected(m, k, [&](const TSigmaGraph& g) { out.push_back(g); });
    return out;
}

/// Audit export: one tab-separated line per (T, sigma) class with the
/// canonical tuples, sigma in cycle notation, flags, |T| and a(sigma).
inline void write_census(std::ostream& os, int m, int k) {
    for_each_connected(m, k, [&](const TSigmaGraph& g) {
        os << "T=";
        for (int i = 0; i < m; ++i) {
            os << '(';
            for (int j = 0; j < k; ++j) os << (j ? "," : "") << g.t.label(i, j) + 1;
            os << ')';
        }
        os << "\tsigma=";
        std::array<bool, 8> seen{};
        bool any = false;
        for (int q = 0; q < g.size(); ++q) {
            if (seen[q] || g.sigma[q] == q) continue;
            os << '(';
            bool first = true;
            for (int r = q; !seen[r]; r = g.sigma[r]) {
                seen[r] = true;
                os << (first ? "" : " ") << r + 1;
                first = false;
            }
            os << ')';
            any = true;
        }
        if (!any) os << "id";
        os << "\tconnected=" << g.connected << "\treducible=" << g.reducible
           << "\tcircle_like=" << g.circle_like << "\t|T|=" << g.size() << "\ta=" << g.a_sigma
           << '\n';
    });
}

// ---------------------------------------------------------------------------
// moment <-> cumulant conversions (partition sums, via the closed recursions)
// ---------------------------------------------------------------------------

inline double binom_coeff(int n, int r) {
    double v = 1;
    for (int i = 1; i <= r; ++i) v = v * (n - r + i) / i;
    return v;
}

/// Raw moments from cumulants: m_r = sum_j C(r-1, j) q_{j+1} m_{r-1-j}.
inline std::vector<double> moments_from_cumulants(const std::vector<double>& q) {
    if (q.size() > 8) throw GuardError("moments_from_cumulants: length <= 8");
    size_t n = q.size();
    std::vector<double> m(n + 1);
    m[0] = 1.0;
    for (size_t r = 1; r <= n; ++r) {
        double acc = 0;
        for (size_t j = 0; j < r; ++j)
            acc += binom_coeff(static_cast<int>(r - 1), static_cast<int>(j)) * q[j] * m[r - 1 - j];
        m[r] = acc;
    }
    return std::vector<double>(m.begin() + 1, m.end());
}

/// Cumulants from raw moments (inverse recursion).
inline std::vector<double> cumulants_from_moments(const std::vector<double>& mom) {
    if (mom.size() > 8) throw GuardError("cumulants_from_moments: length <= 8");
    size_t n = mom.size();
    std::vector<double> m(n + 1), q(n);
    m[0] = 1.0;
    for (size_t r = 1; r <= n; ++r) m[r] = mom[r - 1];
    for (size_t r = 1; r <= n; ++r) {
        double acc = m[r];
        for (size_t j = 1; j < r; ++j)
            acc -= binom_coeff(static_cast<int>(r - 1), static_cast<int>(j - 1)) * q[j - 1] * m[r - j];
        q[r - 1] = acc;
    }
    return q;
}

// ---------------------------------------------------------------------------
// numerical evaluation of single-graph integrals and cumulants
// ---------------------------------------------------------------------------

struct CumulantQuadOptions {
    int trace_resolution = 24;   // grid per angle for the k=1 trace path
    int tensor_resolution = 20;  // grid per angle for <=3 coupled variables
    int qmc_points = 1 << 16;    // Kronecker nodes for 4..5 coupled variables
};

namespace detail {

// Weighted rank factorization of the kernel on a product grid:
// B = W^{1/2} K W^{1/2} ~ C C^T with ~k_n columns (partial pivoted Cholesky).
struct KernelTraceContext {
    SphereQuadrature quad;
    Eigen::MatrixXd C;

    KernelTraceContext(const KernelSpec& spec, int resolution, const std::vector<double>& breaks) {
        quad = product_quadrature(spec.d, resolution, breaks);
        const int N = static_cast<int>(quad.size());
        Eigen::MatrixXd B(N, N);
        std::vector<double> pn;
        for (int i = 0; i < N; ++i) {
            for (int j = 0; j <= i; ++j) {
                double v = kernel_eval(spec, quad.nodes[i], quad.nodes[j]) *
                           std::sqrt(quad.w[i] * quad.w[j]);
                B(i, j) = B(j, i) = v;
            }
        }
        // partial pivoted Cholesky, stopping at numerical rank (~k_n)
        Eigen::VectorXd diag = B.diagonal();
        double tol = 1e-12 * diag.maxCoeff();
        std::vector<int> piv;
        Eigen::MatrixXd L(N, std::min<int>(N, static_cast<int>(spec.k_n) + 16));
        int r = 0;
        while (r < L.cols()) {
            int p = 0;
            double best = -1;
            for (int i = 0; i < N; ++i)
                if (diag(i) > best) {
                    best = diag(i);
                    p = i;
                }
            if (best < tol) break;
            Eigen::VectorXd col = B.col(p);
            for (int a = 0; a < r; ++a) col -= L.col(a) * L(p, a);
            double piv_sqrt = std::sqrt(best);
            L.col(r) = col / piv_sqrt;
            for (int i = 0; i < N; ++i) diag(i) -= L(i, r) * L(i, r);
            diag(p) = 0;
            ++r;
        }
        C = L.leftCols(r);
    }
};

inline const KernelTraceContext& trace_context(const KernelSpec& spec, int resolution,
                                               std::vector<double> breaks) {
    struct Key {
        int d, n, res;
        std::vector<double> breaks;
        bool operator<(const Key& o) const {
            return std::tie(d, n, res, breaks) < std::tie(o.d, o.n, o.res, o.breaks);
        }
    };
    static std::map<Key, std::unique_ptr<KernelTraceContext>> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lk(mtx);
    Key key{spec.d, spec.n, resolution, breaks};
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(std::move(key),
                           std::make_unique<KernelTraceContext>(spec, resolution, breaks)).first;
    return *it->second;
}

inline std::vector<double> trace_breaks(const TestFunction& f) {
    if (f.kind == TFKind::CapIndicator) return {f.delta};
    return {};
}

// trace(D_1 B D_2 B ... D_l B) via the rank factor: trace(Prod C^T D_a C).
inline double cycle_trace(const KernelTraceContext& ctx,
                          const std::vector<const Eigen::VectorXd*>& diags) {
    const auto& C = ctx.C;
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(C.cols(), C.cols());
    for (const Eigen::VectorXd* da : diags)
        M = M * (C.transpose() * da->asDiagonal() * C);
    return M.trace();
}

// grid values of g^p computed on demand from the base values
struct UnivariateGrid {
    Eigen::VectorXd base;
    std::map<int, Eigen::VectorXd> powers;

    const Eigen::VectorXd& power(int p) {
        auto it = powers.find(p);
        if (it == powers.end()) it = powers.emplace(p, base.array().pow(p).matrix()).first;
        return it->second;
    }
};

inline UnivariateGrid univariate_grid(const std::function<double(const SpherePoint&)>& g,
                                      const SphereQuadrature& q) {
    UnivariateGrid u;
    u.base.resize(static_cast<Eigen::Index>(q.size()));
    for (size_t i = 0; i < q.size(); ++i) u.base(static_cast<Eigen::Index>(i)) = g(q.nodes[i]);
    return u;
}

// deterministic Kronecker low-discrepancy sequence on (S^2)^vars
struct KroneckerSphere {
    int dims;
    std::vector<double> alpha;
    explicit KroneckerSphere(int vars) : dims(2 * vars) {
        static const double primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
        alpha.resize(static_cast<size_t>(dims));
        for (int i = 0; i < dims; ++i) {
            double s = std::sqrt(primes[i]);
            alpha[static_cast<size_t>(i)] = s - std::floor(s);
        }
    }
    // point index i -> vars points on S^2 (area-preserving map)
    void point(long i, std::vector<SpherePoint>& out) const {
        for (int v = 0; v < dims / 2; ++v) {
            double u = std::fma(static_cast<double>(i + 1), alpha[static_cast<size_t>(2 * v)], 0.0);
            double w = std::fma(static_cast<double>(i + 1), alpha[static_cast<size_t>(2 * v + 1)], 0.0);
            u -= std::floor(u);
            w -= std::floor(w);
            double z = 2.0 * u - 1.0;
            double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            double phi = 2.0 * kPi * w;
            out[static_cast<size_t>(v)] =
                make_point(2, {r * std::cos(phi), r * std::sin(phi), z});
        }
    }
};

}  // namespace detail

/// Single-graph integral of Eq.-style terms: sgn(sigma) Int f(T)
/// Prod_q K(x_q, x_{sigma(q)}) over (S^d)^{|T|}.  Margin-integrable
/// variables are eliminated analytically (this is what makes reducible terms
/// with centered f vanish identically); the remaining coupled blocks go
/// through a kernel-cycle trace (univariate factors), pinned tensor
/// quadrature (<= 3 variables), or a deterministic low-discrepancy rule
/// (4..5 variables).
class GraphTermEvaluator {
   public:
    GraphTermEvaluator(const TestFunction& f, const KernelSpec& spec,
                       CumulantQuadOptions opts = {})
        : f_(f), spec_(spec), opts_(opts), margins_(compute_margins(f)), total_(f.total_integral()) {
        if (f.k >= 2 && !f.symmetric)
            throw GuardError("GraphTermEvaluator: symmetric f required for margin reduction");
        // structurally constant bivariate margin (e.g. f == const) drops the
        // factor edges entirely
        if (margins_.f12_profile) {
            bool constant = true;
            double v0 = margins_.f12_profile(0.31);
            for (double th : {0.11, 0.92, 1.57, 2.41, 2.93})
                constant &= std::abs(margins_.f12_profile(th) - v0) < 1e-14;
            f12_constant_ = constant;
            f12_constant_value_ = v0;
        }
    }

    const TestFunction& test_function() const { return f_; }
    const KernelSpec& spec() const { return spec_; }

    double evaluate(const TSigmaGraph& g) const;

    /// Exact m-th cumulant by Lemma-of-sums over all connected graphs.
    double cumulant_via_graphs(int m) const {
        double acc = 0, comp = 0;
        for_each_connected(m, f_.k, [&](const TSigmaGraph& g) {
            double v = evaluate(g);
            double t = acc + v;
            comp += (std::abs(acc) >= std::abs(v)) ? (acc - t) + v : (v - t) + acc;
            acc = t;
        });
        return acc + comp;
    }

   private:
    TestFunction f_;
    KernelSpec spec_;
    CumulantQuadOptions opts_;
    MarginSet margins_;
    double total_ = 0;
    bool f12_constant_ = false;
    double f12_constant_value_ = 0;

    struct Factor {
        std::vector<int> vars;  // remaining variable labels
        double coeff = 1.0;     // accumulated scalar from eliminated variables
    };

    double factor_value(const Factor& fac, const std::vector<SpherePoint>& x) const {
        size_t r = fac.vars.size();
        if (r == static_cast<size_t>(f_.k)) {
            std::vector<SpherePoint> pts(r);
            for (size_t a = 0; a < r; ++a) pts[a] = x[static_cast<size_t>(fac.vars[a])];
            return fac.coeff * f_(pts);
        }
        if (r == 2) return fac.coeff * margins_.f12(x[static_cast<size_t>(fac.vars[0])],
                                                    x[static_cast<size_t>(fac.vars[1])]);
        if (r == 1) return fac.coeff * margins_.f1(x[static_cast<size_t>(fac.vars[0])]);
        return fac.coeff;
    }

    bool zonal_factors() const {
        return f_.kind == TFKind::PairIndicator || f_.kind == TFKind::PairwiseZonal ||
               f_.kind == TFKind::TriangleIndicator;
    }

    double tensor_block(const std::vector<int>& vars, const std::vector<Factor>& facs,
                        const std::vector<std::pair<int, int>>& kedges) const;
    double qmc_block(const std::vector<int>& vars, const std::vector<Factor>& facs,
                     const std::vector<std::pair<int, int>>& kedges) const;
    double univariate_block(const std::vector<int>& vars,
                            const std::vector<const Factor*>& facs,
                            const std::vector<int>& sigma_cycle) const;

    friend double univariate_cumulant(const TestFunction&, int, const KernelSpec&,
                                      const CumulantQuadOptions&);
};

inline double GraphTermEvaluator::evaluate(const TSigmaGraph& g) const {
    if (g.t.k != f_.k) throw DomainError("evaluate: graph arity differs from f arity");
    const int S = g.size();

    // working copies
    std::vector<Factor> factors;
    for (int i = 0; i < g.t.m; ++i) {
        Factor fac;
        for (int j = 0; j < f_.k; ++j) fac.vars.push_back(g.t.label(i, j));
        factors.push_back(std::move(fac));
    }
    std::vector<bool> live(static_cast<size_t>(S), true);
    double scalar = g.sign;

    // every sigma-fixed label contributes the constant K(x,x) = k_n/s_d
    int fixed = 0;
    for (int q = 0; q < S; ++q) fixed += (g.sigma[q] == q);
    scalar *= std::pow(spec_.density(), fixed);

    // drop structurally constant pair factors (their value is a scalar and
    // each of their variables then shows up as either a bare integral or a
    // pure kernel variable)
    if (f12_constant_ && f_.k == 2) {
        for (auto& fac : factors) {
            fac.coeff *= f12_constant_value_;
            fac.vars.clear();
        }
    }

    // margin elimination: a variable with no kernel edge appearing in exactly
    // one factor integrates into that factor's margin
    bool changed = true;
    while (changed) {
        changed = false;
        for (int q = 0; q < S; ++q) {
            if (!live[q] || g.sigma[q] != q) continue;
            int hits = 0;
            Factor* owner = nullptr;
            for (auto& fac : factors)
                for (int v : fac.vars)
                    if (v == q) {
                        ++hits;
                        owner = &fac;
                    }
            if (hits == 0) {
                scalar *= spec_.s_d;  // bare integral
                live[q] = false;
                changed = true;
            } else if (hits == 1) {
                if (owner->vars.size() == 1) {
                    // last variable of this factor: Int f_1 = Int f (symmetric)
                    owner->coeff *= total_;
                    owner->vars.clear();
                } else {
                    owner->vars.erase(std::find(owner->vars.begin(), owner->vars.end(), q));
                }
                live[q] = false;
                changed = true;
            }
        }
    }
    for (const auto& fac : factors)
        if (fac.vars.empty()) scalar *= fac.coeff;

    // split remaining variables into coupled components
    detail::UnionFind uf;
    for (int q = 0; q < S; ++q) uf.parent[q] = q;
    for (const auto& fac : factors)
        for (size_t a = 1; a < fac.vars.size(); ++a) uf.unite(fac.vars[0], fac.vars[a]);
    std::vector<std::pair<int, int>> kedges;
    for (int q = 0; q < S; ++q)
        if (g.sigma[q] != q) {
            uf.unite(q, g.sigma[q]);
            kedges.emplace_back(q, g.sigma[q]);
        }

    double value = scalar;
    std::vector<bool> done(static_cast<size_t>(S), false);
    for (int root = 0; root < S; ++root) {
        if (!live[root] || done[root]) continue;
        int rep = uf.find(root);
        std::vector<int> vars;
        for (int q = 0; q < S; ++q)
            if (live[q] && uf.find(q) == rep) {
                vars.push_back(q);
                done[q] = true;
            }
        if (vars.empty()) continue;

        std::vector<Factor> cfacs;
        std::vector<const Factor*> cfac_ptrs;
        for (const auto& fac : factors)
            if (!fac.vars.empty() && uf.find(fac.vars[0]) == rep) {
                cfacs.push_back(fac);
                cfac_ptrs.push_back(&fac);
            }
        std::vector<std::pair<int, int>> cedges;
        for (auto& e : kedges)
            if (uf.find(e.first) == rep) cedges.push_back(e);

        if (cfacs.empty()) {
            // pure kernel cycle: Int K(x1,x2)...K(xl,x1) = k_n exactly by the
            // reproducing property (sigma-fixed constants were taken out above)
            value *= static_cast<double>(spec_.k_n);
            continue;
        }

        bool univariate_only = true;
        for (const auto& fac : cfacs) univariate_only &= (fac.vars.size() <= 1);
        if (univariate_only) {
            // single kernel cycle with diagonal functions
            std::vector<int> cyc;
            int start = vars[0];
            for (int r = start;;) {
                cyc.push_back(r);
                r = g.sigma[r];
                if (r == start) break;
            }
            value *= univariate_block(vars, cfac_ptrs, cyc);
            continue;
        }

        if (vars.size() <= 3)
            value *= tensor_block(vars, cfacs, cedges);
        else if (vars.size() <= 5)
            value *= qmc_block(vars, cfacs, cedges);
        else
            throw GuardError("evaluate: more than 5 coupled variables unsupported");
    }
    return value;
}

inline double GraphTermEvaluator::univariate_block(const std::vector<int>& vars,
                                                   const std::vector<const Factor*>& facs,
                                                   const std::vector<int>& cyc) const {
    const auto& ctx = detail::trace_context(spec_, opts_.trace_resolution, detail::trace_breaks(f_));
    // diagonal per cycle variable: product of unary factors attached to it;
    // an arity-1 factor evaluates f itself at k = 1 and the margin f_1 above
    std::function<double(const SpherePoint&)> unary;
    if (f_.k == 1) {
        const TestFunction& f = f_;
        unary = [&f](const SpherePoint& x) {
            std::vector<SpherePoint> one = {x};
            return f(one);
        };
    } else {
        unary = margins_.f1;
    }
    detail::UnivariateGrid grid = detail::univariate_grid(unary, ctx.quad);
    std::map<int, int> power;
    std::map<int, double> coeff;
    for (int q : vars) {
        power[q] = 0;
        coeff[q] = 1.0;
    }
    for (const Factor* fac : facs) {
        power[fac->vars[0]] += 1;
        coeff[fac->vars[0]] *= fac->coeff;
    }
    if (cyc.size() == 1) {
        // sigma-fixed variable: its K(x,x) constant is already in the global
        // scalar; only the mass Int f^p remains
        int q = cyc[0];
        const Eigen::VectorXd& fp = grid.power(power[q]);
        double mass = 0;
        for (size_t i = 0; i < ctx.quad.size(); ++i)
            mass += ctx.quad.w[i] * fp(static_cast<Eigen::Index>(i));
        return coeff[q] * mass;
    }
    std::vector<Eigen::VectorXd> diags;
    diags.reserve(cyc.size());
    for (int q : cyc) {
        Eigen::VectorXd dvec = coeff[q] * grid.power(power[q]);
        diags.push_back(std::move(dvec));
    }
    std::vector<const Eigen::VectorXd*> ptrs;
    for (auto& v : diags) ptrs.push_back(&v);
    return detail::cycle_trace(ctx, ptrs);
}

inline double GraphTermEvaluator::tensor_block(const std::vector<int>& vars,
                                               const std::vector<Factor>& facs,
                                               const std::vector<std::pair<int, int>>& kedges) const {
    const size_t p = vars.size();
    std::map<int, size_t> slot;
    for (size_t a = 0; a < p; ++a) slot[vars[a]] = a;
    std::vector<SpherePoint> x(static_cast<size_t>(*std::max_element(vars.begin(), vars.end())) + 1);

    auto integrand = [&]() {
        double v = 1.0;
        for (const auto& fac : facs) v *= factor_value(fac, x);
        for (const auto& e : kedges) {
            double kk = kernel_eval(spec_, x[static_cast<size_t>(e.first)],
                                    x[static_cast<size_t>(e.second)]);
            v *= kk;
        }
        return v;
    };

    bool pin = zonal_factors() && p >= 2;
    SphereQuadrature q = product_quadrature(spec_.d, opts_.tensor_resolution);
    double total = 0;
    if (p == 1) {
        for (size_t i = 0; i < q.size(); ++i) {
            x[static_cast<size_t>(vars[0])] = q.nodes[i];
            total += q.w[i] * integrand();
        }
        return total;
    }
    size_t free0 = pin ? 1 : 0;
    if (!pin && p > 2) throw GuardError("tensor_block: 3 non-zonal variables unsupported");
    if (pin) x[static_cast<size_t>(vars[0])] = north_pole(spec_.d);
    // nested loops over up to 3 free variables
    std::function<double(size_t)> rec = [&](size_t a) -> double {
        double acc = 0;
        for (size_t i = 0; i < q.size(); ++i) {
            x[static_cast<size_t>(vars[a])] = q.nodes[i];
            acc += q.w[i] * (a + 1 == p ? integrand() : rec(a + 1));
        }
        return acc;
    };
    total = rec(free0);
    if (pin) total *= spec_.s_d;
    return total;
}

inline double GraphTermEvaluator::qmc_block(const std::vector<int>& vars,
                                            const std::vector<Factor>& facs,
                                            const std::vector<std::pair<int, int>>& kedges) const {
    if (spec_.d != 2) throw GuardError("qmc_block: 4+ coupled variables supported for d=2 only");
    const size_t p = vars.size();
    std::vector<SpherePoint> x(static_cast<size_t>(*std::max_element(vars.begin(), vars.end())) + 1);
    bool pin = zonal_factors();
    size_t free0 = pin ? 1 : 0;
    if (pin) x[static_cast<size_t>(vars[0])] = north_pole(spec_.d);
    detail::KroneckerSphere seq(static_cast<int>(p - free0));
    std::vector<SpherePoint> pts(p - free0);
    double acc = 0, comp = 0;
    for (long i = 0; i < opts_.qmc_points; ++i) {
        seq.point(i, pts);
        for (size_t a = free0; a < p; ++a) x[static_cast<size_t>(vars[a])] = pts[a - free0];
        double v = 1.0;
        for (const auto& fac : facs) v *= factor_value(fac, x);
        for (const auto& e : kedges)
            v *= kernel_eval(spec_, x[static_cast<size_t>(e.first)],
                             x[static_cast<size_t>(e.second)]);
        double t = acc + v;
        comp += (std::abs(acc) >= std::abs(v)) ? (acc - t) + v : (v - t) + acc;
        acc = t;
    }
    double mean = (acc + comp) / static_cast<double>(opts_.qmc_points);
    double vol = std::pow(spec_.s_d, static_cast<double>(p - free0)) * (pin ? spec_.s_d : 1.0);
    return mean * vol;
}

/// Exact m-th cumulant via the connected-graph sum.
inline double cumulant_via_graphs(const TestFunction& f, int m, const KernelSpec& spec,
                                  const CumulantQuadOptions& opts = {}) {
    GraphTermEvaluator ev(f, spec, opts);
    return ev.cumulant_via_graphs(m);
}

/// Univariate cumulant by the classical composition formula
///   Q_m = sum_l sum_{n_1+..+n_l=m} ((-1)^{l-1}/l) m!/(n_1!..n_l!)
///         Int f^{n_1}(x_1)..f^{n_l}(x_l) K(x_1,x_2)..K(x_l,x_1) dx.
inline double univariate_cumulant(const TestFunction& f, int m, const KernelSpec& spec,
                                  const CumulantQuadOptions& opts = {}) {
    if (f.k != 1) throw GuardError("univariate_cumulant: k = 1 required");
    if (m < 1 || m > 5) throw GuardError("univariate_cumulant: m <= 5 required");
    const auto& ctx = detail::trace_context(spec, opts.trace_resolution, detail::trace_breaks(f));
    detail::UnivariateGrid grid = detail::univariate_grid(
        [&f](const SpherePoint& x) {
            std::vector<SpherePoint> one = {x};
            return f(one);
        },
        ctx.quad);

    double mfact = 1;
    for (int i = 2; i <= m; ++i) mfact *= i;

    double total = 0;
    std::vector<int> comp;
    std::function<void(int)> rec = [&](int rem) {
        if (rem == 0) {
            int l = static_cast<int>(comp.size());
            double coeff = ((l % 2) ? 1.0 : -1.0) / l * mfact;
            for (int nj : comp)
                for (int i = 2; i <= nj; ++i) coeff /= i;
            double integral;
            if (l == 1) {
                // Int f^m(x) K(x,x) dx
                double mass = 0;
                const Eigen::VectorXd& fp = grid.power(comp[0]);
                for (size_t i = 0; i < ctx.quad.size(); ++i)
                    mass += ctx.quad.w[i] * fp(static_cast<Eigen::Index>(i));
                integral = spec.density() * mass;
            } else {
                std::vector<const Eigen::VectorXd*> diags;
                std::vector<Eigen::VectorXd> hold;
                hold.reserve(comp.size());
                for (int nj : comp) hold.push_back(grid.power(nj));
                for (auto& h : hold) diags.push_back(&h);
                integral = detail::cycle_trace(ctx, diags);
            }
            total += coeff * integral;
            return;
        }
        for (int nj = 1; nj <= rem; ++nj) {
            comp.push_back(nj);
            rec(rem - nj);
            comp.pop_back();
        }
    };
    rec(m);
    return total;
}

}  // namespace sphdpp

#endif
