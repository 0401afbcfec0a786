#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "io.hpp"
#include "model.hpp"
#include "solvers.hpp"

namespace plar {

/// Flat key=value run configuration shared by all subcommands. Hyper
/// defaults follow the documented table (r=0.5, s=1, tau=1e-4, eps=1e-6,
/// solver=hybrid); p, q, lambda, mu are required.
struct RunConfig {
    HyperParams hyper;
    Solver solver = Solver::hybrid;

    // simulate / experiment
    double true_a0 = 0.0;
    std::vector<double> true_a;
    std::vector<double> true_b;
    long long n = 0;
    double observed_fraction = 1.0;
    double contamination_fraction = 0.0;
    double outlier_value = 20.0;
    int runs = 1;
    int threads = 0;  // 0 = hardware count

    // seeds: explicit sim_seed / corrupt_seed win over the base seed
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> sim_seed;
    std::optional<std::uint64_t> corrupt_seed;

    // paths
    std::string input;
    std::string out = ".";

    // prox-curve
    double prox_t_prime = 5.0;
    double prox_grid_max = 6.0;
    double prox_grid_step = 0.01;
    double prox_mu = 2.0;

    std::uint64_t resolved_sim_seed() const { return sim_seed ? *sim_seed : seed; }
    std::uint64_t resolved_corrupt_seed() const { return corrupt_seed ? *corrupt_seed : seed; }
};

namespace detail {

[[noreturn]] inline void config_fail(std::size_t line, const std::string& msg) {
    throw std::runtime_error("config: line " + std::to_string(line) + ": " + msg);
}

inline double config_double(const std::string& key, const std::string& value, std::size_t line) {
    double x = 0.0;
    if (!parse_double_token(value, x) || !std::isfinite(x))
        config_fail(line, "key '" + key + "' needs a finite number, got '" + value + "'");
    return x;
}

inline long long config_int(const std::string& key, const std::string& value, std::size_t line) {
    long long x = 0;
    if (!parse_int_token(value, x))
        config_fail(line, "key '" + key + "' needs an integer, got '" + value + "'");
    return x;
}

inline std::uint64_t config_uint(const std::string& key, const std::string& value,
                                 std::size_t line) {
    unsigned long long x = 0;
    if (!parse_uint_token(value, x))
        config_fail(line, "key '" + key + "' needs an unsigned integer, got '" + value + "'");
    return x;
}

inline std::vector<double> config_double_list(const std::string& key, const std::string& value,
                                              std::size_t line) {
    std::vector<double> out;
    for (const std::string& tok : split(value, ',')) {
        double x = 0.0;
        if (!parse_double_token(trim(tok), x) || !std::isfinite(x))
            config_fail(line, "key '" + key + "' needs comma-separated finite numbers, got '" +
                                  value + "'");
        out.push_back(x);
    }
    return out;
}

}  // namespace detail

/// Parses and validates the key=value format ('#' starts a comment).
/// Unknown keys, duplicate keys, and out-of-range values are rejected with
/// the offending line number.
inline RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::map<std::string, std::size_t> seen;
    const std::vector<std::string> lines = detail::split(text, '\n');
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::size_t lineno = li + 1;
        std::string line = lines[li];
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) detail::config_fail(lineno, "expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) detail::config_fail(lineno, "empty key");
        if (value.empty()) detail::config_fail(lineno, "key '" + key + "' has empty value");
        const auto [it, inserted] = seen.emplace(key, lineno);
        if (!inserted)
            throw std::runtime_error("config: duplicate key '" + key + "' at lines " +
                                     std::to_string(it->second) + " and " +
                                     std::to_string(lineno));

        if (key == "p" || key == "q") {
            const long long v = detail::config_int(key, value, lineno);
            if (v < 0 || v > 1000000)
                detail::config_fail(lineno, "key '" + key + "' must be in [0, 1000000]");
            (key == "p" ? cfg.hyper.p : cfg.hyper.q) = static_cast<int>(v);
        } else if (key == "r" || key == "s") {
            const double v = detail::config_double(key, value, lineno);
            if (!(v > 0.0 && v <= 1.0))
                detail::config_fail(lineno, "key '" + key + "' must be in (0, 1], got " + value);
            (key == "r" ? cfg.hyper.r : cfg.hyper.s) = v;
        } else if (key == "lambda") {
            const double v = detail::config_double(key, value, lineno);
            if (!(v > 0.0)) detail::config_fail(lineno, "key 'lambda' must be > 0, got " + value);
            cfg.hyper.lambda = v;
        } else if (key == "mu") {
            const double v = detail::config_double(key, value, lineno);
            if (!(v >= 0.0)) detail::config_fail(lineno, "key 'mu' must be >= 0, got " + value);
            cfg.hyper.mu = v;
        } else if (key == "tau") {
            const double v = detail::config_double(key, value, lineno);
            if (!(v > 0.0)) detail::config_fail(lineno, "key 'tau' must be > 0, got " + value);
            cfg.hyper.tau = v;
        } else if (key == "eps") {
            const double v = detail::config_double(key, value, lineno);
            if (!(v > 0.0)) detail::config_fail(lineno, "key 'eps' must be > 0, got " + value);
            cfg.hyper.eps = v;
        } else if (key == "max_iters") {
            const long long v = detail::config_int(key, value, lineno);
            if (v < 1 || v > 1000000000)
                detail::config_fail(lineno, "key 'max_iters' must be in [1, 1e9]");
            cfg.hyper.max_iters = static_cast<int>(v);
        } else if (key == "solver") {
            if (value == "palm") cfg.solver = Solver::palm;
            else if (value == "fista") cfg.solver = Solver::fista;
            else if (value == "hybrid") cfg.solver = Solver::hybrid;
            else detail::config_fail(lineno, "key 'solver' must be palm, fista, or hybrid");
        } else if (key == "true_a0") {
            cfg.true_a0 = detail::config_double(key, value, lineno);
        } else if (key == "true_a") {
            cfg.true_a = detail::config_double_list(key, value, lineno);
        } else if (key == "true_b") {
            cfg.true_b = detail::config_double_list(key, value, lineno);
        } else if (key == "n") {
            const long long v = detail::config_int(key, value, lineno);
            if (v < 1) detail::config_fail(lineno, "key 'n' must be >= 1");
            cfg.n = v;
        } else if (key == "observed_fraction") {
            const double v = detail::config_double(key, value, lineno);
            if (!(v > 0.0 && v <= 1.0))
                detail::config_fail(lineno, "key 'observed_fraction' must be in (0, 1]");
            cfg.observed_fraction = v;
        } else if (key == "contamination_fraction") {
            const double v = detail::config_double(key, value, lineno);
            if (!(v >= 0.0 && v < 1.0))
                detail::config_fail(lineno, "key 'contamination_fraction' must be in [0, 1)");
            cfg.contamination_fraction = v;
        } else if (key == "outlier_value") {
            const double v = detail::config_double(key, value, lineno);
            if (!(v >= 0.0)) detail::config_fail(lineno, "key 'outlier_value' must be >= 0");
            cfg.outlier_value = v;
        } else if (key == "runs") {
            const long long v = detail::config_int(key, value, lineno);
            if (v < 1 || v > 1000000) detail::config_fail(lineno, "key 'runs' must be in [1, 1e6]");
            cfg.runs = static_cast<int>(v);
        } else if (key == "threads") {
            const long long v = detail::config_int(key, value, lineno);
            if (v < 0 || v > 4096) detail::config_fail(lineno, "key 'threads' must be in [0, 4096]");
            cfg.threads = static_cast<int>(v);
        } else if (key == "seed") {
            cfg.seed = detail::config_uint(key, value, lineno);
        } else if (key == "sim_seed") {
            cfg.sim_seed = detail::config_uint(key, value, lineno);
        } else if (key == "corrupt_seed") {
            cfg.corrupt_seed = detail::config_uint(key, value, lineno);
        } else if (key == "input") {
            cfg.input = value;
        } else if (key == "out") {
            cfg.out = value;
        } else if (key == "prox_t_prime") {
            const double v = detail::config_double(key, value, lineno);
            if (!(v > 0.0)) detail::config_fail(lineno, "key 'prox_t_prime' must be > 0");
            cfg.prox_t_prime = v;
        } else if (key == "prox_grid_max") {
            const double v = detail::config_double(key, value, lineno);
            if (!(v > 0.0)) detail::config_fail(lineno, "key 'prox_grid_max' must be > 0");
            cfg.prox_grid_max = v;
        } else if (key == "prox_grid_step") {
            const double v = detail::config_double(key, value, lineno);
            if (!(v > 0.0)) detail::config_fail(lineno, "key 'prox_grid_step' must be > 0");
            cfg.prox_grid_step = v;
        } else if (key == "prox_mu") {
            const double v = detail::config_double(key, value, lineno);
            if (!(v > 0.0)) detail::config_fail(lineno, "key 'prox_mu' must be > 0");
            cfg.prox_mu = v;
        } else {
            detail::config_fail(lineno, "unknown key '" + key + "'");
        }
    }

    for (const char* req : {"p", "q", "lambda", "mu"})
        if (seen.find(req) == seen.end())
            throw std::runtime_error(std::string("config: required key '") + req + "' is missing");
    if (seen.count("true_a") && cfg.true_a.size() != static_cast<std::size_t>(cfg.hyper.p))
        throw std::runtime_error("config: true_a must have exactly p entries");
    if (seen.count("true_b") && cfg.true_b.size() != static_cast<std::size_t>(cfg.hyper.q))
        throw std::runtime_error("config: true_b must have exactly q entries");
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
    return parse_config(read_text_file(path));
}

}  // namespace plar
