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
#include <cmath>

#include "sphdpp/geometry.hpp"

using namespace sphdpp;

TEST_CASE("geodesic distance basics") {
    auto x = make_point(2, {1.0, 0.0, 0.0});
    auto mx = make_point(2, {-1.0, 0.0, 0.0});
    auto pole = north_pole(2);

    CHECK(geodesic_distance(x, x) == 0.0);
    CHECK(geodesic_distance(x, mx) == Catch::Approx(kPi));
    CHECK(geodesic_distance(pole, x) == Catch::Approx(kPi / 2));
    CHECK(geodesic_distance(x, pole) == geodesic_distance(pole, x));
}

TEST_CASE("geodesic distance dimension mismatch") {
    auto x = north_pole(2);
    auto y = north_pole(3);
    CHECK_THROWS_AS(geodesic_distance(x, y), DimensionError);
}

TEST_CASE("uniform samples have unit norm and triangle inequality holds") {
    StreamRng rng(7, 0);
    for (int d : {2, 3}) {
        for (int i = 0; i < 200; ++i) {
            auto a = uniform_sample(rng, d);
            auto b = uniform_sample(rng, d);
            auto c = uniform_sample(rng, d);
            CHECK(std::abs(a.norm() - 1.0) < 1e-12);
            CHECK(geodesic_distance(a, c) <=
                  geodesic_distance(a, b) + geodesic_distance(b, c) + 1e-10);
        }
    }
    CHECK_THROWS_AS(uniform_sample(rng, 1), DimensionError);
}

TEST_CASE("coordinate round trip", "") {
    StreamRng rng(11, 0);
    for (int d : {2, 3, 4}) {
        for (int i = 0; i < 300; ++i) {
            auto p = uniform_sample(rng, d);
            auto s = to_spherical(p);
            if (s.theta < 1e-6 || s.theta > kPi - 1e-6) continue;
            auto q = from_spherical(s);
            CHECK(geodesic_distance(p, q) < 1e-10);
            CHECK(s.theta >= 0.0);
            CHECK(s.theta <= kPi);
            for (int j = 0; j < d - 2; ++j) {
                CHECK(s.phi[j] >= 0.0);
                CHECK(s.phi[j] <= kPi);
            }
            CHECK(s.phi[d - 2] >= 0.0);
            CHECK(s.phi[d - 2] < 2 * kPi);
        }
    }
}

TEST_CASE("uniform sample coordinate means vanish", "[slow]") {
    StreamRng rng(3, 0);
    const int N = 100000;
    double mean[4] = {0, 0, 0, 0};
    for (int i = 0; i < N; ++i) {
        auto p = uniform_sample(rng, 2);
        for (int j = 0; j < 3; ++j) mean[j] += p[j];
    }
    for (int j = 0; j < 3; ++j) CHECK(std::abs(mean[j] / N) < 4.0 / std::sqrt(double(N)));
}

TEST_CASE("distance histogram matches sin^{d-1} law", "[slow]") {
    // push-forward of the uniform measure: colatitude density sin^{d-1}/c
    StreamRng rng(6, 0);
    const int N = 100000, bins = 50;
    auto pole = north_pole(2);
    // equal-probability bin edges for density sin(theta)/2: theta_i = acos(1-2i/bins)
    std::vector<int> count(bins, 0);
    for (int i = 0; i < N; ++i) {
        double th = geodesic_distance(uniform_sample(rng, 2), pole);
        double u = 0.5 * (1.0 - std::cos(th));
        int b = std::min(bins - 1, static_cast<int>(u * bins));
        count[b]++;
    }
    double expect = double(N) / bins, stat = 0;
    for (int b = 0; b < bins; ++b) stat += (count[b] - expect) * (count[b] - expect) / expect;
    // chi^2 0.99 quantile at df = 49
    CHECK(stat < 74.91947430847816);
}

TEST_CASE("pole frame sends y to the pole and is an involution") {
    StreamRng rng(13, 0);
    for (int i = 0; i < 50; ++i) {
        auto y = uniform_sample(rng, 2);
        auto H = frame_to_pole(y);
        auto p = H.apply(y);
        CHECK(geodesic_distance(p, north_pole(2)) < 1e-12);
        // distances are preserved
        auto z = uniform_sample(rng, 2);
        CHECK(std::abs(geodesic_distance(H.apply(z), p) - geodesic_distance(z, y)) < 1e-12);
    }
}
