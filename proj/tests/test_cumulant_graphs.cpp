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

#include <catch2/catch_amalgamated.hpp>
#include <functional>
#include <set>
#include <sstream>

#include "sphdpp/cumulant_graphs.hpp"

using namespace sphdpp;

namespace {

std::string key_of(const TAssignment& t) {
    std::string s;
    for (int i = 0; i < t.m; ++i)
        for (int j = 0; j < t.k; ++j) s += char('a' + t.label(i, j));
    return s;
}

// brute force: enumerate all of M(m,k) over [km], reduce by canonical form
std::set<std::string> brute_classes(int m, int k) {
    int km = m * k;
    std::set<std::string> out;
    TAssignment t;
    t.m = m;
    t.k = k;
    t.tuples.assign(static_cast<size_t>(m), {});
    std::function<void(int, int)> rec = [&](int i, int j) {
        if (i == m) {
            out.insert(key_of(canonicalize(t)));
            return;
        }
        int ni = (j + 1 == k) ? i + 1 : i;
        int nj = (j + 1 == k) ? 0 : j + 1;
        for (int q = 0; q < km; ++q) {
            bool dup = false;
            for (int jj = 0; jj < j; ++jj) dup |= (t.tuples[i][jj] == q);
            if (dup) continue;
            t.tuples[i][j] = q;
            rec(ni, nj);
        }
    };
    rec(0, 0);
    return out;
}

TAssignment make_T(int m, int k, std::vector<std::vector<int>> rows) {
    TAssignment t;
    t.m = m;
    t.k = k;
    t.tuples.assign(static_cast<size_t>(m), {});
    int mx = 0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j) {
            t.tuples[i][j] = rows[i][j];
            mx = std::max(mx, rows[i][j] + 1);
        }
    t.size = mx;
    return t;
}

}  // namespace

TEST_CASE("canonical enumeration matches brute force for m <= 3, k <= 2") {
    for (int m = 1; m <= 3; ++m)
        for (int k = 1; k <= 2; ++k) {
            auto classes = enumerate_classes(m, k);
            std::set<std::string> mine;
            for (auto& t : classes) mine.insert(key_of(t));
            REQUIRE(mine.size() == classes.size());  // no duplicates
            CHECK(mine == brute_classes(m, k));
        }
    CHECK(enumerate_classes(1, 1).size() == 1);
    CHECK(enumerate_classes(1, 2).size() == 1);
    CHECK(enumerate_classes(1, 3).size() == 1);
    CHECK(enumerate_classes(2, 1).size() == 2);
    CHECK_THROWS_AS(enumerate_classes(5, 1), GuardError);
    CHECK_THROWS_AS(enumerate_classes(2, 4), GuardError);
}

TEST_CASE("the worked example assignments are equivalent") {
    // T: (1,2)(1,4)(2,4)  T': (1,3)(1,6)(3,6)  T'': (1,2)(1,4)(5,6), 1-based
    auto T = make_T(3, 2, {{0, 1}, {0, 3}, {1, 3}});
    auto Tp = make_T(3, 2, {{0, 2}, {0, 5}, {2, 5}});
    auto Tpp = make_T(3, 2, {{0, 1}, {0, 3}, {4, 5}});
    CHECK(key_of(canonicalize(T)) == key_of(canonicalize(Tp)));
    CHECK(key_of(canonicalize(T)) != key_of(canonicalize(Tpp)));
    CHECK(canonicalize(T).size == 3);
}

TEST_CASE("classification of the worked graphs") {
    // canonical T'' = (0,1)(0,2)(3,4), |T| = 5
    auto Tpp = canonicalize(make_T(3, 2, {{0, 1}, {0, 3}, {4, 5}}));
    REQUIRE(Tpp.size == 5);
    std::vector<int> id = {0, 1, 2, 3, 4};
    auto g_id = classify(Tpp, id);
    CHECK_FALSE(g_id.connected);  // two components

    // sigma = (15) in the paper's labels = swap canonical labels 0 and 3
    std::vector<int> swap03 = {3, 1, 2, 0, 4};
    auto g_sw = classify(Tpp, swap03);
    CHECK(g_sw.connected);
    CHECK(g_sw.reducible);

    // canonical T = (0,1)(0,2)(1,2), sigma = id: connected, irreducible
    auto T = canonicalize(make_T(3, 2, {{0, 1}, {0, 3}, {1, 3}}));
    auto gT = classify(T, {0, 1, 2});
    CHECK(gT.connected);
    CHECK_FALSE(gT.reducible);
    CHECK(gT.circle_like);  // left panel of the worked figure
    CHECK(gT.a_sigma == 0);
    CHECK(gT.sign == 1);

    CHECK_THROWS_AS(classify(T, std::vector<int>{0, 1}), DomainError);
}

TEST_CASE("connected census for (2,1)") {
    auto cs = enumerate_connected(2, 1);
    REQUIRE(cs.size() == 2);
    int with_size1 = 0, with_size2 = 0;
    for (auto& g : cs) {
        if (g.size() == 1) {
            ++with_size1;
            CHECK(g.a_sigma == 0);
        }
        if (g.size() == 2) {
            ++with_size2;
            CHECK(g.a_sigma == 2);  // sigma = (12)
            CHECK(g.sign == -1);
        }
    }
    CHECK(with_size1 == 1);
    CHECK(with_size2 == 1);
    CHECK_THROWS_AS(enumerate_connected(4, 3), GuardError);  // km > 8
}

TEST_CASE("tree and irreducibility inequalities over guarded sweeps") {
    long circle22 = 0, circle32 = 0;
    for (int m = 1; m <= 3; ++m)
        for (int k = 1; k <= 3; ++k) {
            if (m * k > 6) continue;  // the full guarded sweep runs in acceptance
            long count = 0;
            for_each_connected(m, k, [&](const TSigmaGraph& g) {
                ++count;
                int lhs_tree = k * m - g.size() + g.a_sigma;
                CHECK(lhs_tree >= m - 1 + (g.a_sigma > 0 ? 1 : 0));
                if (!g.reducible && m >= 2) {
                    double lhs = k * m - g.size() + 0.5 * g.a_sigma;
                    CHECK(lhs >= double(m));
                    if (g.circle_like) {
                        CHECK(lhs == double(m));  // equality case
                        CHECK(int(g.circle_perm.size()) == g.t.m);
                    }
                }
                if (g.t.m == 2 && g.t.k == 2 && g.circle_like) ++circle22;
                if (g.t.m == 3 && g.t.k == 2 && g.circle_like) ++circle32;
            });
            CHECK(count > 0);
        }
    // (m-1)! (k(k-1))^m 2^m / 2 circle-like graphs at k = 2
    CHECK(circle22 == 8);
    CHECK(circle32 == 64);
}

TEST_CASE("census export format") {
    std::stringstream ss;
    write_census(ss, 2, 1);
    std::string line;
    int lines = 0;
    while (std::getline(ss, line)) {
        ++lines;
        CHECK(line.find("T=(") == 0);
        CHECK(line.find("\tsigma=") != std::string::npos);
        CHECK(line.find("\t|T|=") != std::string::npos);
        CHECK(line.find("\ta=") != std::string::npos);
    }
    CHECK(lines == 2);
}

TEST_CASE("moment and cumulant conversions") {
    // Gaussian(mu, sigma^2)
    double mu = 0.7, s2 = 1.3;
    auto m = moments_from_cumulants({mu, s2, 0, 0});
    CHECK(m[0] == Catch::Approx(mu));
    CHECK(m[1] == Catch::Approx(s2 + mu * mu));
    CHECK(m[2] == Catch::Approx(mu * mu * mu + 3 * mu * s2));
    CHECK(m[3] == Catch::Approx(std::pow(mu, 4) + 6 * mu * mu * s2 + 3 * s2 * s2));

    // chi-square(1): Q_m = 2^{m-1} (m-1)!
    auto mc = moments_from_cumulants({1, 2, 8, 48});
    CHECK(mc[0] == Catch::Approx(1.0));
    CHECK(mc[1] == Catch::Approx(3.0));
    CHECK(mc[2] == Catch::Approx(15.0));

    // round trip
    std::vector<double> q = {0.3, 1.7, -0.4, 2.2, 0.9};
    auto back = cumulants_from_moments(moments_from_cumulants(q));
    for (size_t i = 0; i < q.size(); ++i) CHECK(back[i] == Catch::Approx(q[i]).margin(1e-12));

    CHECK_THROWS_AS(moments_from_cumulants(std::vector<double>(9, 1.0)), GuardError);
}

TEST_CASE("single-graph integrals for k=1 against direct quadrature") {
    auto spec = KernelSpec::make(2, 4);
    auto f = cap_indicator(2, 1.0);
    GraphTermEvaluator ev(f, spec);

    // |T|=1, sigma=id: Int f^2 K(x,x) = (k_n/s_d) * cap area
    auto t1 = make_T(2, 1, {{0}, {0}});
    auto g1 = classify(t1, {0});
    REQUIRE(g1.connected);
    double expect1 = spec.density() * cap_area(2, 1.0);
    CHECK(ev.evaluate(g1) == Catch::Approx(expect1).epsilon(1e-10));

    // |T|=2, sigma=(12): -Int Int f(x)f(y) K(x,y)^2, against an independent
    // double node sum
    auto t2 = make_T(2, 1, {{0}, {1}});
    auto g2 = classify(t2, {1, 0});
    REQUIRE(g2.connected);
    auto q = product_quadrature(2, 48, {1.0});
    auto pole = north_pole(2);
    double direct = 0;
    for (size_t i = 0; i < q.size(); ++i) {
        if (geodesic_distance(q.nodes[i], pole) >= 1.0) continue;
        double acc = 0;
        for (size_t j = 0; j < q.size(); ++j) {
            if (geodesic_distance(q.nodes[j], pole) >= 1.0) continue;
            double kk = kernel_eval(spec, q.nodes[i], q.nodes[j]);
            acc += q.w[j] * kk * kk;
        }
        direct += q.w[i] * acc;
    }
    CHECK(ev.evaluate(g2) == Catch::Approx(-direct).epsilon(1e-6));

    // m=1: Q_1 = (k_n/s_d) Int f
    CHECK(ev.cumulant_via_graphs(1) ==
          Catch::Approx(spec.density() * cap_area(2, 1.0)).epsilon(1e-10));
}

TEST_CASE("graph cumulants equal the univariate composition formula") {
    auto spec = KernelSpec::make(2, 4);
    auto f = cap_indicator(2, 1.0);
    GraphTermEvaluator ev(f, spec);
    for (int m = 1; m <= 4; ++m) {
        double a = ev.cumulant_via_graphs(m);
        double b = univariate_cumulant(f, m, spec);
        INFO("m=" << m << " graphs=" << a << " univariate=" << b);
        CHECK(a == Catch::Approx(b).epsilon(1e-8));
    }
}

TEST_CASE("variance via graphs matches the one-half difference formula") {
    auto spec = KernelSpec::make(2, 4);
    auto f = cap_indicator(2, 1.0);
    // Var = 1/2 Int Int (f(x)-f(y))^2 K^2 = (k_n/s_d) Int f^2 - Int Int f f K^2
    const auto& ctx = sphdpp::detail::trace_context(spec, 24, {1.0});
    double t1 = 0, t2 = 0;
    std::vector<SpherePoint> one(1);
    std::vector<double> fv(ctx.quad.size());
    for (size_t i = 0; i < ctx.quad.size(); ++i) {
        one[0] = ctx.quad.nodes[i];
        fv[i] = f(one);
        t1 += ctx.quad.w[i] * fv[i] * fv[i];
    }
    for (size_t i = 0; i < ctx.quad.size(); ++i) {
        if (fv[i] == 0) continue;
        for (size_t j = 0; j < ctx.quad.size(); ++j) {
            if (fv[j] == 0) continue;
            double kk = kernel_eval(spec, ctx.quad.nodes[i], ctx.quad.nodes[j]);
            t2 += ctx.quad.w[i] * ctx.quad.w[j] * fv[i] * fv[j] * kk * kk;
        }
    }
    double var_direct = spec.density() * t1 - t2;
    CHECK(cumulant_via_graphs(f, 2, spec) == Catch::Approx(var_direct).epsilon(1e-8));
}

TEST_CASE("reducible terms with centered pair indicator vanish") {
    auto spec = KernelSpec::make(2, 4);
    auto f = centered(pair_indicator(2, 0.8));
    GraphTermEvaluator ev(f, spec);
    int reducible_seen = 0;
    for_each_connected(2, 2, [&](const TSigmaGraph& g) {
        if (!g.reducible) return;
        ++reducible_seen;
        double v = ev.evaluate(g);
        double tol = 1e-6 * std::pow(spec.density(), double(g.size()));
        INFO("|T|=" << g.size() << " a=" << g.a_sigma << " value=" << v);
        CHECK(std::abs(v) < tol);
    });
    CHECK(reducible_seen > 0);
}

TEST_CASE("constant pair function has zero variance through the graph sum") {
    auto spec = KernelSpec::make(2, 5);
    auto f = pairwise_zonal(2, [](double) { return 1.0; }, 1.0);
    double q2 = cumulant_via_graphs(f, 2, spec);
    CHECK(std::abs(q2) < 1e-6 * double(spec.k_n) * double(spec.k_n));
}
