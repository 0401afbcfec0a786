#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "model.hpp"
#include "rng.hpp"
#include "solvers.hpp"
#include "special_functions.hpp"

namespace plar {

/// Ground-truth generator: coefficients, series length, and base seed.
struct TrueModel {
    ModelParams params;
    long long n = 0;
    std::uint64_t seed = 0;
};

/// Random missingness and outlier contamination rates.
struct CorruptionSpec {
    double observed_fraction = 1.0;       // in (0, 1]
    double contamination_fraction = 0.0;  // in [0, 1)
    double outlier_value = 20.0;
    std::uint64_t seed = 0;
};

struct BoxStats {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

struct RunFailure {
    int run = 0;
    std::string error;
};

/// Per-coefficient estimates across runs (a0 first, then a_1..a_p, then
/// b_1..b_q) with box statistics over the successful runs. Failed runs are
/// recorded and hold NaN estimates.
struct ExperimentSummary {
    std::vector<std::vector<double>> estimates;  // [coefficient][run]
    std::vector<BoxStats> stats;                 // per coefficient
    std::vector<int> iterations;                 // per run, 0 when failed
    std::vector<double> final_objectives;        // per run, NaN when failed
    std::vector<char> converged;                 // per run, 0 when failed
    std::vector<RunFailure> failures;
};

/// Exact Poisson draw: inversion by sequential search below mean 10,
/// transformed rejection (PTRS) above. Mean 0 returns 0 without consuming
/// randomness, so a zero-mean prefix stays deterministic.
inline long long poisson_sample(double mean, Rng& rng) {
    if (!(mean >= 0.0) || !std::isfinite(mean))
        throw std::invalid_argument("poisson_sample: mean must be finite and >= 0");
    if (mean == 0.0) return 0;
    if (mean < 10.0) {
        const double x = rng.uniform();
        double p = std::exp(-mean);
        double f = p;
        long long k = 0;
        while (x > f) {
            ++k;
            p *= mean / static_cast<double>(k);
            f += p;
            if (p <= 0.0 || k > 2000) break;  // pmf tail exhausted in double
        }
        return k;
    }
    // Hormann's PTRS, exact for mean >= 10.
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mean = std::log(mean);
    for (;;) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform();
        const double us = 0.5 - std::abs(u);
        const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= v_r) return static_cast<long long>(kf);
        if (kf < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            kf * log_mean - mean - log_gamma(kf + 1.0))
            return static_cast<long long>(kf);
    }
}

namespace detail {

inline void check_corruption(const CorruptionSpec& spec) {
    if (!(spec.observed_fraction > 0.0 && spec.observed_fraction <= 1.0))
        throw std::invalid_argument("corruption: observed_fraction must be in (0, 1]");
    if (!(spec.contamination_fraction >= 0.0 && spec.contamination_fraction < 1.0))
        throw std::invalid_argument("corruption: contamination_fraction must be in [0, 1)");
    if (!(spec.outlier_value >= 0.0))
        throw std::invalid_argument("corruption: outlier_value must be >= 0");
}

// Iterative generation: u_i from the recursion on the already drawn
// history, then y_i ~ Poisson(u_i). Shares the recursion helpers with
// forward_means, so replaying the true params on the output reproduces the
// generated u exactly.
inline SeriesSample simulate_series(const ModelParams& params, long long n, Rng& rng,
                                    MeanSeries* mean_out) {
    const std::size_t len = static_cast<std::size_t>(n);
    SeriesSample out;
    out.y.resize(len);
    std::vector<double> logy1(len), logu1(len);
    if (mean_out) mean_out->u.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
        const double v = mean_log_argument(params, logy1, logu1, i);
        check_mean_overflow(v, i, "simulate");
        const double ui = mean_from_log_argument(v);
        logu1[i] = std::log1p(ui);
        if (mean_out) mean_out->u[i] = ui;
        out.y[i] = static_cast<double>(poisson_sample(ui, rng));
        logy1[i] = std::log1p(out.y[i]);
    }
    return out;
}

}  // namespace detail

/// Deterministic simulation from (params, N, seed); equals experiment run 0.
inline SeriesSample simulate(const TrueModel& model, const HyperParams& hyper) {
    detail::check_hyper(hyper);
    detail::check_dims(model.params, hyper);
    if (model.n < 1) throw std::invalid_argument("simulate: N must be >= 1");
    Rng rng = Rng::stream(model.seed, 0);
    return detail::simulate_series(model.params, model.n, rng, nullptr);
}

/// Uniformly random observed subset D of size round(observed_fraction * N);
/// values copied from y on D.
inline ObservationSet inject_missing(const SeriesSample& y, const CorruptionSpec& spec,
                                     Rng& rng) {
    detail::check_corruption(spec);
    const std::size_t n = y.y.size();
    const auto dn = static_cast<std::size_t>(
        std::llround(spec.observed_fraction * static_cast<double>(n)));
    if (dn < 1) throw std::invalid_argument("inject_missing: observed subset is empty");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    // Partial Fisher-Yates: the first dn slots are a uniform subset.
    for (std::size_t i = 0; i < dn; ++i)
        std::swap(idx[i], idx[i + rng.below(n - i)]);
    ObservationSet obs;
    obs.mask.assign(n, false);
    obs.values.assign(n, 0.0);
    for (std::size_t i = 0; i < dn; ++i) obs.mask[idx[i]] = true;
    for (std::size_t i = 0; i < n; ++i)
        if (obs.mask[i]) obs.values[i] = y.y[i];
    return obs;
}

/// Replaces a uniformly random subset of D of size
/// round(contamination_fraction * |D|) with outlier_value. The modified
/// indices are reported in ascending order through `contaminated`.
inline ObservationSet inject_outliers(const ObservationSet& obs, const CorruptionSpec& spec,
                                      Rng& rng, std::vector<std::size_t>* contaminated = nullptr) {
    detail::check_corruption(spec);
    std::vector<std::size_t> d;
    for (std::size_t i = 0; i < obs.mask.size(); ++i)
        if (obs.mask[i]) d.push_back(i);
    const auto c = static_cast<std::size_t>(
        std::llround(spec.contamination_fraction * static_cast<double>(d.size())));
    for (std::size_t i = 0; i < c; ++i)
        std::swap(d[i], d[i + rng.below(d.size() - i)]);
    d.resize(c);
    std::sort(d.begin(), d.end());
    ObservationSet out = obs;
    for (std::size_t i : d) out.values[i] = spec.outlier_value;
    if (contaminated) *contaminated = std::move(d);
    return out;
}

/// Box statistics with linearly interpolated quartiles (the interpolation
/// convention is pinned so emitted summaries are reproducible).
inline BoxStats box_stats(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("box_stats: empty sample");
    std::sort(v.begin(), v.end());
    const auto quantile = [&v](double f) {
        const double h = f * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(h);
        if (lo + 1 >= v.size()) return v.back();
        return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
    };
    return BoxStats{v.front(), quantile(0.25), quantile(0.5), quantile(0.75), v.back()};
}

namespace detail {

struct RunResult {
    bool ok = false;
    std::string error;
    ModelParams params;
    int iterations = 0;
    bool converged = false;
    double objective = std::numeric_limits<double>::quiet_NaN();
};

// Streams for run j: simulation uses (model.seed, 3j), missingness
// (spec.seed, 3j+1), outliers (spec.seed, 3j+2). Disjoint indices mod 3
// keep the streams independent even when the two seeds coincide, and run 0
// matches the standalone simulate/corrupt pipeline.
inline RunResult run_one(const TrueModel& model, const CorruptionSpec& spec,
                         const HyperParams& hyper, Solver solver, std::uint64_t j) {
    RunResult res;
    try {
        Rng sim_rng = Rng::stream(model.seed, 3 * j);
        const SeriesSample y = simulate_series(model.params, model.n, sim_rng, nullptr);
        Rng miss_rng = Rng::stream(spec.seed, 3 * j + 1);
        ObservationSet obs = inject_missing(y, spec, miss_rng);
        Rng out_rng = Rng::stream(spec.seed, 3 * j + 2);
        obs = inject_outliers(obs, spec, out_rng);
        const FitReport rep = fit(obs, hyper, default_init(obs, hyper), solver);
        res.ok = true;
        res.params = rep.params;
        res.iterations = rep.iterations;
        res.converged = rep.converged;
        res.objective = rep.objective_trace.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                    : rep.objective_trace.back();
    } catch (const std::exception& e) {
        res.ok = false;
        res.error = e.what();
    }
    return res;
}

}  // namespace detail

/// M independent simulate -> corrupt -> fit pipelines. Each run owns RNG
/// streams derived from (seed, run index), results are keyed by run index,
/// and statistics are assembled after all runs join, so serial and parallel
/// execution produce identical summaries. threads <= 0 picks the hardware
/// count.
inline ExperimentSummary run_experiment(const TrueModel& model, const CorruptionSpec& spec,
                                        const HyperParams& hyper, int m, Solver solver,
                                        int threads = 0) {
    if (m < 1) throw std::invalid_argument("run_experiment: M must be >= 1");
    detail::check_hyper(hyper);
    detail::check_dims(model.params, hyper);
    detail::check_corruption(spec);
    if (model.n < 1) throw std::invalid_argument("run_experiment: N must be >= 1");

    std::vector<detail::RunResult> results(static_cast<std::size_t>(m));
    int nthreads = threads <= 0 ? static_cast<int>(std::thread::hardware_concurrency()) : threads;
    nthreads = std::max(1, std::min(nthreads, m));
    if (nthreads == 1) {
        for (int j = 0; j < m; ++j)
            results[static_cast<std::size_t>(j)] =
                detail::run_one(model, spec, hyper, solver, static_cast<std::uint64_t>(j));
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nthreads));
        for (int t = 0; t < nthreads; ++t)
            pool.emplace_back([&] {
                for (int j = next.fetch_add(1); j < m; j = next.fetch_add(1))
                    results[static_cast<std::size_t>(j)] =
                        detail::run_one(model, spec, hyper, solver, static_cast<std::uint64_t>(j));
            });
        for (std::thread& t : pool) t.join();
    }

    const std::size_t ncoef = 1 + model.params.a.size() + model.params.b.size();
    ExperimentSummary summary;
    summary.estimates.assign(ncoef, std::vector<double>(static_cast<std::size_t>(m),
                                                        std::numeric_limits<double>::quiet_NaN()));
    summary.iterations.assign(static_cast<std::size_t>(m), 0);
    summary.final_objectives.assign(static_cast<std::size_t>(m),
                                    std::numeric_limits<double>::quiet_NaN());
    summary.converged.assign(static_cast<std::size_t>(m), 0);
    for (std::size_t j = 0; j < results.size(); ++j) {
        const detail::RunResult& res = results[j];
        if (!res.ok) {
            summary.failures.push_back({static_cast<int>(j), res.error});
            continue;
        }
        std::size_t k = 0;
        summary.estimates[k++][j] = res.params.a0;
        for (double ak : res.params.a) summary.estimates[k++][j] = ak;
        for (double bk : res.params.b) summary.estimates[k++][j] = bk;
        summary.iterations[j] = res.iterations;
        summary.final_objectives[j] = res.objective;
        summary.converged[j] = res.converged ? 1 : 0;
    }
    summary.stats.resize(ncoef);
    for (std::size_t k = 0; k < ncoef; ++k) {
        std::vector<double> ok_values;
        for (std::size_t j = 0; j < results.size(); ++j)
            if (results[j].ok) ok_values.push_back(summary.estimates[k][j]);
        if (!ok_values.empty()) {
            summary.stats[k] = box_stats(std::move(ok_values));
        } else {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            summary.stats[k] = BoxStats{nan, nan, nan, nan, nan};
        }
    }
    return summary;
}

}  // namespace plar
