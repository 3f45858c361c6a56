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

#ifndef SPHDPP_HARNESS_HPP
#define SPHDPP_HARNESS_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sphdpp/chaos.hpp"
#include "sphdpp/predictions.hpp"
#include "sphdpp/sampler.hpp"
#include "sphdpp/test_function.hpp"

namespace sphdpp {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Plug-in cumulant estimate of one order with a delete-one jackknife
/// standard error.
struct CumulantEstimate {
    int order = 1;
    double value = 0;
    double se = 0;
    long replicates = 0;
    bool degenerate = false;  // constant input
};

namespace detail {

struct PowerSums {
    long double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    long n = 0;
    void add(double x) {
        long double v = x;
        s1 += v;
        s2 += v * v;
        s3 += v * v * v;
        s4 += v * v * v * v;
        ++n;
    }
    // plug-in central-moment cumulants of orders 1..4
    std::array<double, 4> cumulants() const {
        long double mu = s1 / n;
        long double m2 = s2 / n - mu * mu;
        long double m3 = s3 / n - 3 * mu * s2 / n + 2 * mu * mu * mu;
        long double m4 = s4 / n - 4 * mu * s3 / n + 6 * mu * mu * s2 / n - 3 * mu * mu * mu * mu;
        return {static_cast<double>(mu), static_cast<double>(m2), static_cast<double>(m3),
                static_cast<double>(m4 - 3 * m2 * m2)};
    }
    PowerSums without(double x) const {
        PowerSums p = *this;
        long double v = x;
        p.s1 -= v;
        p.s2 -= v * v;
        p.s3 -= v * v * v;
        p.s4 -= v * v * v * v;
        p.n -= 1;
        return p;
    }
};

}  // namespace detail

/// Moment-based cumulant estimates of orders 1..max_order with jackknife SEs.
inline std::vector<CumulantEstimate> empirical_cumulants(const std::vector<double>& x,
                                                         int max_order = 4) {
    if (x.size() < 2) throw GuardError("empirical_cumulants: need at least 2 samples");
    if (max_order < 1 || max_order > 4) throw GuardError("empirical_cumulants: order <= 4");
    detail::PowerSums ps;
    for (double v : x) ps.add(v);
    auto full = ps.cumulants();
    bool constant = true;
    for (double v : x) constant &= (v == x[0]);

    const long n = ps.n;
    std::vector<CumulantEstimate> out;
    std::array<long double, 4> jk_mean{}, jk_sq{};
    if (!constant) {
        for (double v : x) {
            auto c = ps.without(v).cumulants();
            for (int o = 0; o < 4; ++o) {
                jk_mean[o] += c[o];
                jk_sq[o] += static_cast<long double>(c[o]) * c[o];
            }
        }
    }
    for (int o = 1; o <= max_order; ++o) {
        CumulantEstimate e;
        e.order = o;
        e.replicates = n;
        e.value = constant && o >= 2 ? 0.0 : full[o - 1];
        e.degenerate = constant;
        if (!constant) {
            long double mean = jk_mean[o - 1] / n;
            long double var = jk_sq[o - 1] / n - mean * mean;
            e.se = static_cast<double>(std::sqrt(std::max(0.0L, var * (n - 1))));
        }
        out.push_back(e);
    }
    return out;
}

/// Sup distance between the empirical CDF of samples and a target CDF.
inline double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.size() < 10) throw GuardError("ks_distance: need at least 10 samples");
    std::sort(samples.begin(), samples.end());
    double n = static_cast<double>(samples.size());
    double d = 0;
    for (size_t i = 0; i < samples.size(); ++i) {
        double F = cdf(samples[i]);
        d = std::max(d, std::abs((i + 1) / n - F));
        d = std::max(d, std::abs(F - i / n));
    }
    return d;
}

/// Two-sample sup distance (target given as a reference sample).
inline double ks_distance_two_sample(std::vector<double> samples, std::vector<double> reference) {
    if (samples.size() < 10 || reference.size() < 10)
        throw GuardError("ks_distance_two_sample: need at least 10 samples");
    std::sort(samples.begin(), samples.end());
    std::sort(reference.begin(), reference.end());
    size_t i = 0, j = 0;
    double d = 0, n1 = double(samples.size()), n2 = double(reference.size());
    while (i < samples.size() && j < reference.size()) {
        if (samples[i] <= reference[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::abs(i / n1 - j / n2));
    }
    return d;
}

// ---------------------------------------------------------------------------
// experiment configuration and reports
// ---------------------------------------------------------------------------

enum class CompareMode { MeanOnly, Clt, Chaos };

struct ExperimentConfig {
    std::string name = "run";
    int d = 2;
    std::vector<int> n_list;
    std::string kind = "cap";  // cap | pair | triangle | constant-pair
    double delta = 1.0;
    long replicates = 100;
    uint64_t seed = 1;
    int resolution = 48;
    CompareMode mode = CompareMode::MeanOnly;
    long target_draws = 200000;  // limit-law reference sample (chaos mode)
    int jobs = 0;                // 0: hardware concurrency
    std::string out_csv;
    std::string out_meta;
};

inline TestFunction make_test_function(const ExperimentConfig& c) {
    if (c.kind == "cap") return cap_indicator(c.d, c.delta);
    if (c.kind == "pair") return pair_indicator(c.d, c.delta);
    if (c.kind == "triangle") return triangle_indicator(c.d, c.delta);
    if (c.kind == "constant-pair") return pairwise_zonal(c.d, [](double) { return 1.0; }, 1.0);
    throw GuardError("unknown test-function kind '" + c.kind + "'");
}

/// Key = value sections, one [name] block per run.
inline std::vector<ExperimentConfig> parse_experiment_config(std::istream& is) {
    std::vector<ExperimentConfig> runs;
    ExperimentConfig cur;
    bool have = false;
    std::string line;
    auto push = [&]() {
        if (have) {
            if (cur.n_list.empty()) throw GuardError("config: n_list missing in [" + cur.name + "]");
            if (cur.replicates < 100) throw GuardError("config: replicates >= 100 required");
            runs.push_back(cur);
        }
    };
    while (std::getline(is, line)) {
        size_t h = line.find('#');
        if (h != std::string::npos) line = line.substr(0, h);
        auto l = line.find_first_not_of(" \t\r");
        if (l == std::string::npos) continue;
        auto r = line.find_last_not_of(" \t\r");
        line = line.substr(l, r - l + 1);
        if (line.front() == '[') {
            push();
            cur = ExperimentConfig{};
            cur.name = line.substr(1, line.size() - 2);
            have = true;
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw GuardError("config: expected key = value: " + line);
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t");
            size_t b = s.find_last_not_of(" \t");
            return (a == std::string::npos) ? std::string() : s.substr(a, b - a + 1);
        };
        key = trim(key);
        val = trim(val);
        have = true;
        if (key == "d") cur.d = std::stoi(val);
        else if (key == "n_list") {
            std::stringstream ss(val);
            std::string tok;
            while (std::getline(ss, tok, ',')) cur.n_list.push_back(std::stoi(tok));
        } else if (key == "kind") cur.kind = val;
        else if (key == "delta") cur.delta = std::stod(val);
        else if (key == "replicates") cur.replicates = std::stol(val);
        else if (key == "seed") cur.seed = std::stoull(val);
        else if (key == "resolution") cur.resolution = std::stoi(val);
        else if (key == "mode") {
            if (val == "mean-only") cur.mode = CompareMode::MeanOnly;
            else if (val == "clt") cur.mode = CompareMode::Clt;
            else if (val == "chaos") cur.mode = CompareMode::Chaos;
            else throw GuardError("config: unknown mode '" + val + "'");
        } else if (key == "target_draws") cur.target_draws = std::stol(val);
        else if (key == "jobs") cur.jobs = std::stoi(val);
        else if (key == "out_csv") cur.out_csv = val;
        else if (key == "out_meta") cur.out_meta = val;
        else throw GuardError("config: unknown key '" + key + "'");
    }
    push();
    return runs;
}

struct ReportRow {
    int n = 0;
    int64_t k_n = 0;
    long replicates = 0;
    double mean = 0, mean_se = 0;
    double q2 = 0, q2_se = 0, q3 = 0, q3_se = 0, q4 = 0, q4_se = 0;
    double pred_mean = 0;
    double pred_var = 0;
    double ks = 0;
    std::string ks_target = "none";
    uint64_t seed = 0;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<ReportRow> rows;
    double variance_scaling_exponent = 0;  // log-log fit of q2 vs n
    double wall_seconds = 0;
};

inline void write_report_csv(std::ostream& os, const ExperimentReport& rep) {
    os << "n,k_n,replicates,mean,mean_se,q2,q2_se,q3,q3_se,q4,q4_se,pred_mean,pred_var,ks,"
          "ks_target,seed\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (const auto& r : rep.rows) {
        os << r.n << ',' << r.k_n << ',' << r.replicates << ',' << num(r.mean) << ','
           << num(r.mean_se) << ',' << num(r.q2) << ',' << num(r.q2_se) << ',' << num(r.q3) << ','
           << num(r.q3_se) << ',' << num(r.q4) << ',' << num(r.q4_se) << ',' << num(r.pred_mean)
           << ',' << num(r.pred_var) << ',' << num(r.ks) << ',' << r.ks_target << ',' << r.seed
           << '\n';
    }
}

void write_report_meta(std::ostream& os, const ExperimentReport& rep);  // json sidecar, below

/// Monte Carlo sweep over n: sample replicates, evaluate L_nf, estimate
/// cumulants, standardize per mode, compare against the mode's target law.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    TestFunction f = make_test_function(cfg);
    ExperimentReport rep;
    rep.config = cfg;

    MarginSet margins = compute_margins(f);
    bool degenerate = margins_degenerate(f, margins);
    if (cfg.mode == CompareMode::Clt && degenerate)
        throw DegeneracyError("run_experiment: clt mode needs non-constant F; use chaos mode");
    if (cfg.mode == CompareMode::Chaos && !degenerate)
        throw DegeneracyError("run_experiment: chaos mode needs constant F; use clt mode");

    ChaosSpectrum chaos_spec;
    std::vector<double> chaos_reference;
    if (cfg.mode == CompareMode::Chaos) {
        chaos_spec = spectrum(f);
        StreamRng ref_rng(cfg.seed, 0xC0FFEEull);
        chaos_reference = sample_limit_law(chaos_spec, ref_rng, cfg.target_draws);
        std::sort(chaos_reference.begin(), chaos_reference.end());
    }

    int jobs = cfg.jobs > 0 ? cfg.jobs : static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;

    for (int n : cfg.n_list) {
        KernelSpec spec = KernelSpec::make(cfg.d, n);
        std::vector<double> L(static_cast<size_t>(cfg.replicates));
        uint64_t run_seed = detail::mix64(cfg.seed ^ detail::mix64(static_cast<uint64_t>(n)));
        auto worker = [&](long lo, long hi) {
            for (long r = lo; r < hi; ++r) {
                Configuration c = sample(spec, derive_seed(run_seed, static_cast<uint64_t>(r)));
                L[static_cast<size_t>(r)] = evaluate_L(c, f);
            }
        };
        if (jobs == 1) {
            worker(0, cfg.replicates);
        } else {
            std::vector<std::thread> pool;
            long chunk = (cfg.replicates + jobs - 1) / jobs;
            for (int t = 0; t < jobs; ++t) {
                long lo = t * chunk, hi = std::min<long>(cfg.replicates, lo + chunk);
                if (lo < hi) pool.emplace_back(worker, lo, hi);
            }
            for (auto& th : pool) th.join();
        }

        auto est = empirical_cumulants(L, 4);
        ReportRow row;
        row.n = n;
        row.k_n = spec.k_n;
        row.replicates = cfg.replicates;
        row.seed = cfg.seed;
        row.mean = est[0].value;
        row.mean_se = est[0].se;
        row.q2 = est[1].value;
        row.q2_se = est[1].se;
        row.q3 = est[2].value;
        row.q3_se = est[2].se;
        row.q4 = est[3].value;
        row.q4_se = est[3].se;
        row.pred_mean = predicted_mean(f, spec);

        if (cfg.mode == CompareMode::Clt) {
            row.pred_var = predicted_variance_clt(f, spec);
            row.ks_target = "normal";
            double sd = std::sqrt(std::max(row.q2, 1e-300));
            std::vector<double> z(L.size());
            for (size_t i = 0; i < L.size(); ++i) z[i] = (L[i] - row.mean) / sd;
            row.ks = ks_distance(std::move(z), normal_cdf);
        } else if (cfg.mode == CompareMode::Chaos) {
            row.pred_var = predicted_variance_chaos(f, spec, chaos_spec);
            row.ks_target = "chaos";
            double scale = standardization_constants(spec, f.k).scale;
            std::vector<double> z(L.size());
            for (size_t i = 0; i < L.size(); ++i) z[i] = (L[i] - row.mean) / scale;
            row.ks = ks_distance_two_sample(std::move(z), chaos_reference);
        }
        rep.rows.push_back(row);
    }

    // variance scaling: slope of log q2 against log n
    if (rep.rows.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int cnt = 0;
        for (const auto& r : rep.rows) {
            if (r.q2 <= 0) continue;
            double lx = std::log(double(r.n)), ly = std::log(r.q2);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            ++cnt;
        }
        if (cnt >= 2) rep.variance_scaling_exponent = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    }

    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!cfg.out_csv.empty()) {
        std::ofstream os(cfg.out_csv);
        if (!os) throw NumericalError("run_experiment: cannot open " + cfg.out_csv);
        write_report_csv(os, rep);
    }
    if (!cfg.out_meta.empty()) {
        std::ofstream os(cfg.out_meta);
        if (!os) throw NumericalError("run_experiment: cannot open " + cfg.out_meta);
        write_report_meta(os, rep);
    }
    return rep;
}

inline const char* mode_name(CompareMode m) {
    switch (m) {
        case CompareMode::MeanOnly: return "mean-only";
        case CompareMode::Clt: return "clt";
        case CompareMode::Chaos: return "chaos";
    }
    return "?";
}

}  // namespace sphdpp

#include <json.hpp>

namespace sphdpp {

/// Machine-readable sidecar: config echo, per-row values, scaling fit.
inline void write_report_meta(std::ostream& os, const ExperimentReport& rep) {
    nlohmann::json j;
    j["tool"] = "sphdpp";
    j["version"] = "0.1.0";
    const auto& c = rep.config;
    j["config"] = {{"name", c.name},
                   {"d", c.d},
                   {"n_list", c.n_list},
                   {"kind", c.kind},
                   {"delta", c.delta},
                   {"replicates", c.replicates},
                   {"seed", c.seed},
                   {"resolution", c.resolution},
                   {"mode", mode_name(c.mode)},
                   {"target_draws", c.target_draws},
                   {"jobs", c.jobs}};
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rep.rows) {
        double z = (r.mean_se > 0) ? (r.mean - r.pred_mean) / r.mean_se : 0.0;
        j["rows"].push_back({{"n", r.n},
                             {"k_n", r.k_n},
                             {"replicates", r.replicates},
                             {"mean", r.mean},
                             {"mean_se", r.mean_se},
                             {"q2", r.q2},
                             {"q2_se", r.q2_se},
                             {"q3", r.q3},
                             {"q3_se", r.q3_se},
                             {"q4", r.q4},
                             {"q4_se", r.q4_se},
                             {"pred_mean", r.pred_mean},
                             {"pred_var", r.pred_var},
                             {"ks", r.ks},
                             {"ks_target", r.ks_target},
                             {"seed", r.seed},
                             {"mean_vs_pred_z", z}});
    }
    j["variance_scaling_exponent"] = rep.variance_scaling_exponent;
    j["wall_seconds"] = rep.wall_seconds;
    os << j.dump(2) << '\n';
}

}  // namespace sphdpp

#endif
