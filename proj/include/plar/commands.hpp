#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "io.hpp"
#include "model.hpp"
#include "prox.hpp"
#include "sim.hpp"
#include "solvers.hpp"

namespace plar {

namespace detail {

inline std::string out_path(const RunConfig& cfg, const char* name) {
    std::filesystem::create_directories(cfg.out);
    return (std::filesystem::path(cfg.out) / name).string();
}

inline ModelParams true_params(const RunConfig& cfg) {
    ModelParams params;
    params.a0 = cfg.true_a0;
    params.a = cfg.true_a;
    params.a.resize(static_cast<std::size_t>(cfg.hyper.p), 0.0);
    params.b = cfg.true_b;
    params.b.resize(static_cast<std::size_t>(cfg.hyper.q), 0.0);
    return params;
}

inline void require_n(const RunConfig& cfg, const char* cmd) {
    if (cfg.n < 1)
        throw std::runtime_error(std::string(cmd) + ": config key 'n' is required");
}

inline std::string json_double_array(const std::vector<double>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += json_number(v[i]);
    }
    return out + "]";
}

inline std::vector<std::string> coef_names(const HyperParams& hyper) {
    std::vector<std::string> names{"a0"};
    for (int k = 1; k <= hyper.p; ++k) names.push_back("a" + std::to_string(k));
    for (int k = 1; k <= hyper.q; ++k) names.push_back("b" + std::to_string(k));
    return names;
}

}  // namespace detail

/// Fits the series at cfg.input and writes report.json plus fitted.csv to
/// cfg.out. Returns 0 on convergence, 2 when the iteration cap is hit.
inline int cmd_fit(const RunConfig& cfg) {
    if (cfg.input.empty()) throw std::runtime_error("fit: config key 'input' is required");
    const ObservationSet obs = read_series_csv(cfg.input);
    const FitReport rep = fit(obs, cfg.hyper, default_init(obs, cfg.hyper), cfg.solver);

    std::string report;
    report += "{\n";
    report += "  \"solver\": \"" + std::string(solver_name(cfg.solver)) + "\",\n";
    report += "  \"a0\": " + json_number(rep.params.a0) + ",\n";
    report += "  \"a\": " + detail::json_double_array(rep.params.a) + ",\n";
    report += "  \"b\": " + detail::json_double_array(rep.params.b) + ",\n";
    report += "  \"iterations\": " + std::to_string(rep.iterations) + ",\n";
    const double objective =
        rep.objective_trace.empty() ? std::numeric_limits<double>::quiet_NaN()
                                    : rep.objective_trace.back();
    report += "  \"objective\": " + json_number(objective) + ",\n";
    report += std::string("  \"converged\": ") + (rep.converged ? "true" : "false") + ",\n";
    // The likelihood normalization needs mu > 0; reported as null otherwise.
    const std::string nll =
        cfg.hyper.mu > 0.0
            ? json_number(neg_log_likelihood(rep.params, rep.y_hat, obs, cfg.hyper))
            : "null";
    report += "  \"neg_log_likelihood\": " + nll + "\n";
    report += "}\n";
    write_text_file(detail::out_path(cfg, "report.json"), report);

    std::string fitted = "t,y_hat,u_hat,observed,y_tilde,residual\n";
    for (std::size_t i = 0; i < rep.y_hat.y.size(); ++i) {
        fitted += std::to_string(i + 1);
        fitted += ',';
        fitted += format_g17(rep.y_hat.y[i]);
        fitted += ',';
        fitted += format_g17(rep.u_hat.u[i]);
        fitted += obs.mask[i] ? ",1," : ",0,";
        if (obs.mask[i]) {
            fitted += format_g17(obs.values[i]);
            fitted += ',';
            fitted += format_g17(rep.y_hat.y[i] - obs.values[i]);
        } else {
            fitted += ',';
        }
        fitted += '\n';
    }
    write_text_file(detail::out_path(cfg, "fitted.csv"), fitted);
    return rep.converged ? 0 : 2;
}

/// Simulates one corrupted series (the same pipeline as experiment run 0)
/// and writes series.csv, truth.csv, and contaminated.csv to cfg.out.
inline int cmd_simulate(const RunConfig& cfg) {
    detail::require_n(cfg, "simulate");
    const ModelParams params = detail::true_params(cfg);
    detail::check_hyper(cfg.hyper);
    detail::check_dims(params, cfg.hyper);

    Rng sim_rng = Rng::stream(cfg.resolved_sim_seed(), 0);
    MeanSeries means;
    const SeriesSample y = detail::simulate_series(params, cfg.n, sim_rng, &means);

    CorruptionSpec spec;
    spec.observed_fraction = cfg.observed_fraction;
    spec.contamination_fraction = cfg.contamination_fraction;
    spec.outlier_value = cfg.outlier_value;
    spec.seed = cfg.resolved_corrupt_seed();
    Rng miss_rng = Rng::stream(spec.seed, 1);
    ObservationSet obs = inject_missing(y, spec, miss_rng);
    Rng out_rng = Rng::stream(spec.seed, 2);
    std::vector<std::size_t> contaminated;
    obs = inject_outliers(obs, spec, out_rng, &contaminated);

    std::string series = "t,y,observed\n";
    for (std::size_t i = 0; i < obs.mask.size(); ++i) {
        series += std::to_string(i + 1);
        series += ',';
        if (obs.mask[i]) series += format_g17(obs.values[i]);
        series += obs.mask[i] ? ",1\n" : ",0\n";
    }
    write_text_file(detail::out_path(cfg, "series.csv"), series);

    std::string truth = "t,y_true,u_true\n";
    for (std::size_t i = 0; i < y.y.size(); ++i) {
        truth += std::to_string(i + 1);
        truth += ',';
        truth += format_g17(y.y[i]);
        truth += ',';
        truth += format_g17(means.u[i]);
        truth += '\n';
    }
    write_text_file(detail::out_path(cfg, "truth.csv"), truth);

    std::string contam = "t\n";
    for (std::size_t i : contaminated) contam += std::to_string(i + 1) + "\n";
    write_text_file(detail::out_path(cfg, "contaminated.csv"), contam);
    return 0;
}

/// Runs M simulate -> corrupt -> fit replicates and writes estimates.csv
/// plus summary.json to cfg.out. Returns 0 when every run converged, 2
/// otherwise; run numbers in the outputs are 1-based.
inline int cmd_experiment(const RunConfig& cfg) {
    detail::require_n(cfg, "experiment");
    const ModelParams params = detail::true_params(cfg);
    TrueModel model{params, cfg.n, cfg.resolved_sim_seed()};
    CorruptionSpec spec;
    spec.observed_fraction = cfg.observed_fraction;
    spec.contamination_fraction = cfg.contamination_fraction;
    spec.outlier_value = cfg.outlier_value;
    spec.seed = cfg.resolved_corrupt_seed();

    const ExperimentSummary summary =
        run_experiment(model, spec, cfg.hyper, cfg.runs, cfg.solver, cfg.threads);
    const std::vector<std::string> names = detail::coef_names(cfg.hyper);

    std::set<int> failed;
    for (const RunFailure& f : summary.failures) failed.insert(f.run);

    std::string estimates = "run,coef,value\n";
    for (int j = 0; j < cfg.runs; ++j) {
        if (failed.count(j)) continue;
        for (std::size_t k = 0; k < names.size(); ++k) {
            estimates += std::to_string(j + 1);
            estimates += ',';
            estimates += names[k];
            estimates += ',';
            estimates += format_g17(summary.estimates[k][static_cast<std::size_t>(j)]);
            estimates += '\n';
        }
    }
    write_text_file(detail::out_path(cfg, "estimates.csv"), estimates);

    std::string json;
    json += "{\n";
    json += "  \"solver\": \"" + std::string(solver_name(cfg.solver)) + "\",\n";
    json += "  \"runs\": " + std::to_string(cfg.runs) + ",\n";
    json += "  \"coefficients\": [\n";
    for (std::size_t k = 0; k < names.size(); ++k) {
        const BoxStats& st = summary.stats[k];
        json += "    {\"name\": \"" + names[k] + "\", \"min\": " + json_number(st.min) +
                ", \"q1\": " + json_number(st.q1) + ", \"median\": " + json_number(st.median) +
                ", \"q3\": " + json_number(st.q3) + ", \"max\": " + json_number(st.max) + "}";
        json += k + 1 < names.size() ? ",\n" : "\n";
    }
    json += "  ],\n";
    json += "  \"iterations\": [";
    for (std::size_t j = 0; j < summary.iterations.size(); ++j) {
        if (j) json += ", ";
        json += std::to_string(summary.iterations[j]);
    }
    json += "],\n";
    json += "  \"final_objectives\": " + detail::json_double_array(summary.final_objectives) +
            ",\n";
    json += "  \"converged\": [";
    for (std::size_t j = 0; j < summary.converged.size(); ++j) {
        if (j) json += ", ";
        json += summary.converged[j] ? "true" : "false";
    }
    json += "],\n";
    json += "  \"failed_runs\": [";
    for (std::size_t i = 0; i < summary.failures.size(); ++i) {
        if (i) json += ", ";
        json += "{\"run\": " + std::to_string(summary.failures[i].run + 1) + ", \"error\": \"" +
                json_escape(summary.failures[i].error) + "\"}";
    }
    json += "]\n";
    json += "}\n";
    write_text_file(detail::out_path(cfg, "summary.json"), json);

    bool all_converged = summary.failures.empty();
    for (char c : summary.converged) all_converged = all_converged && c;
    return all_converged ? 0 : 2;
}

/// Tabulates the scalar shrinkage problem: energy and g curves at the four
/// reference penalty weights derived from mu0, plus threshold curves over
/// t'. Writes energy.csv, shrink.csv, and meta.json to cfg.out.
inline int cmd_prox_curve(const RunConfig& cfg) {
    const double r = cfg.hyper.r;
    if (!(r > 0.0 && r < 1.0))
        throw std::runtime_error("prox-curve: r must be in (0, 1)");

    // mu0 is the weight where the nonzero local minimum of E_r first
    // appears: g_r(t0) = 0 at mu0 = (t' - t0) t0^(1-r) / r.
    const auto mu0_of = [r](double tp) {
        if (!(tp > 0.0)) return 0.0;
        const double t0 = detail::g_min_location(tp, r);
        return (tp - t0) * detail::pos_pow(t0, 1.0 - r) / r;
    };
    const double tp = cfg.prox_t_prime;
    const double mu0 = mu0_of(tp);
    const double mu_list[4] = {2.0 * mu0, mu0, 0.75 * mu0, 0.25 * mu0};

    const auto count = static_cast<long long>(std::llround(cfg.prox_grid_max / cfg.prox_grid_step));
    if (count < 1) throw std::runtime_error("prox-curve: grid must contain at least two points");
    std::string energy = "t,E0,g0,E1,g1,E2,g2,E3,g3\n";
    for (long long k = 0; k <= count; ++k) {
        const double t = cfg.prox_grid_max * static_cast<double>(k) / static_cast<double>(count);
        energy += format_g17(t);
        for (double mu : mu_list) {
            const ShrinkageProblem prob{tp, mu, r};
            energy += ',';
            energy += format_g17(prox_energy(t, prob));
            energy += ',';
            energy += format_g17(t > 0.0 ? eval_g(t, prob) : mu * r);  // g_r(0+) = mu r
        }
        energy += '\n';
    }
    write_text_file(detail::out_path(cfg, "energy.csv"), energy);

    std::string curves = "t_prime,soft,hard,frac,frac_2mu0\n";
    for (int k = 0; k <= 800; ++k) {
        const double t = -10.0 + 20.0 * static_cast<double>(k) / 800.0;
        curves += format_g17(t);
        curves += ',';
        curves += format_g17(shrink({t, cfg.prox_mu, 1.0}));
        curves += ',';
        curves += format_g17(shrink({t, cfg.prox_mu, 0.0}));
        curves += ',';
        curves += format_g17(shrink({t, cfg.prox_mu, r}));
        curves += ',';
        curves += format_g17(shrink({t, 2.0 * mu0_of(std::abs(t)), r}));
        curves += '\n';
    }
    write_text_file(detail::out_path(cfg, "shrink.csv"), curves);

    std::string meta;
    meta += "{\n";
    meta += "  \"r\": " + json_number(r) + ",\n";
    meta += "  \"t_prime\": " + json_number(tp) + ",\n";
    meta += "  \"mu0\": " + json_number(mu0) + ",\n";
    meta += "  \"mu_list\": " +
            detail::json_double_array({mu_list[0], mu_list[1], mu_list[2], mu_list[3]}) + ",\n";
    meta += "  \"grid_max\": " + json_number(cfg.prox_grid_max) + ",\n";
    meta += "  \"grid_step\": " + json_number(cfg.prox_grid_step) + ",\n";
    meta += "  \"prox_mu\": " + json_number(cfg.prox_mu) + ",\n";
    meta += "  \"points_energy\": " + std::to_string(count + 1) + ",\n";
    meta += "  \"points_shrink\": 801\n";
    meta += "}\n";
    write_text_file(detail::out_path(cfg, "meta.json"), meta);
    return 0;
}

}  // namespace plar
