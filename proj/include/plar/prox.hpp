#pragma once

#include <cmath>
#include <stdexcept>

namespace plar {

/// Scalar shrinkage problem: minimize E_r(t) = mu*|t|^r + (t - t_prime)^2 / 2
/// over t, for a penalty exponent r in [0, 1].
struct ShrinkageProblem {
    double t_prime = 0.0;
    double mu = 0.0;   // >= 0
    double r = 1.0;    // in [0, 1]
};

namespace detail {

// t^e for t > 0, evaluated as exp(e * log t). Callers guarantee t > 0.
inline double pos_pow(double t, double e) {
    return std::exp(e * std::log(t));
}

inline void validate(const ShrinkageProblem& prob) {
    if (!(prob.mu >= 0.0)) throw std::invalid_argument("shrinkage: mu must be >= 0");
    if (!(prob.r >= 0.0 && prob.r <= 1.0)) throw std::invalid_argument("shrinkage: r must be in [0, 1]");
}

// Location of the minimum of g_r on (0, inf), for anchor t' >= 0.
inline double g_min_location(double t_abs, double r) {
    return (1.0 - r) / (2.0 - r) * t_abs;
}

}  // namespace detail

/// E_r(t). For r = 0 the penalty counts support: E_0(0) = t'^2/2 and
/// E_0(t) = mu + (t - t')^2/2 for t != 0.
inline double prox_energy(double t, const ShrinkageProblem& prob) {
    detail::validate(prob);
    const double quad = 0.5 * (t - prob.t_prime) * (t - prob.t_prime);
    if (prob.r == 0.0) return t == 0.0 ? 0.5 * prob.t_prime * prob.t_prime : prob.mu + quad;
    if (t == 0.0) return quad;
    if (prob.r == 1.0) return prob.mu * std::abs(t) + quad;
    return prob.mu * detail::pos_pow(std::abs(t), prob.r) + quad;
}

/// g_r(t) = mu*r - t'*t^(1-r) + t^(2-r), for t > 0 and 0 < r < 1.
/// g_r(t) = t^(1-r) * dE_r/dt, so its zeros are the stationary points of
/// E_r on (0, inf).
inline double eval_g(double t, const ShrinkageProblem& prob) {
    detail::validate(prob);
    if (!(prob.r > 0.0 && prob.r < 1.0)) throw std::invalid_argument("eval_g: r must be in (0, 1)");
    if (!(t > 0.0)) throw std::domain_error("eval_g: t must be > 0");
    return prob.mu * prob.r - prob.t_prime * detail::pos_pow(t, 1.0 - prob.r)
           + detail::pos_pow(t, 2.0 - prob.r);
}

struct NewtonResult {
    double root = 0.0;
    int iterations = 0;         // Newton updates taken
    bool used_bisection = false;
};

/// Second (larger) zero t2 of g_r, assuming g_r(t0) < 0 at the minimum
/// location t0 = (1-r)/(2-r) * t'. Newton from t' descends monotonically
/// onto t2 because g_r is strictly convex and increasing there; a bisection
/// fallback on [t0, t'] guarantees termination.
inline NewtonResult newton_second_zero_info(const ShrinkageProblem& prob, double eps) {
    detail::validate(prob);
    if (!(prob.r > 0.0 && prob.r < 1.0)) throw std::invalid_argument("newton_second_zero: r must be in (0, 1)");
    if (!(prob.t_prime >= 0.0)) throw std::invalid_argument("newton_second_zero: t_prime must be >= 0");
    if (!(eps > 0.0)) throw std::invalid_argument("newton_second_zero: eps must be > 0");

    const double r = prob.r;
    const double tp = prob.t_prime;
    const double t0 = detail::g_min_location(tp, r);
    if (t0 <= 0.0 || !(eval_g(t0, prob) < 0.0))
        throw std::invalid_argument("newton_second_zero: g_r(t0) must be < 0 (two-zero case)");

    const auto g = [&](double t) { return eval_g(t, prob); };
    const auto dg = [&](double t) {
        return -(1.0 - r) * tp * detail::pos_pow(t, -r) + (2.0 - r) * detail::pos_pow(t, 1.0 - r);
    };

    constexpr int kMaxNewton = 50;
    NewtonResult res;
    double t_prev = tp;
    double t_cur = t_prev - g(t_prev) / dg(t_prev);
    res.iterations = 1;
    while (std::abs(t_cur - t_prev) > eps && res.iterations < kMaxNewton) {
        t_prev = t_cur;
        t_cur = t_prev - g(t_prev) / dg(t_prev);
        ++res.iterations;
    }
    if (std::abs(t_cur - t_prev) > eps) {
        // Bisection on [t0, t']: g < 0 at t0 and g(t') = mu*r > 0.
        res.used_bisection = true;
        double lo = t0, hi = tp;
        while (hi - lo > eps) {
            const double mid = 0.5 * (lo + hi);
            (g(mid) < 0.0 ? lo : hi) = mid;
        }
        t_cur = hi;
    }
    res.root = t_cur;
    return res;
}

inline double newton_second_zero(const ShrinkageProblem& prob, double eps) {
    return newton_second_zero_info(prob, eps).root;
}

/// Global minimizer of E_r. r = 1 is the soft threshold
/// sign(t')(|t'| - mu)+, r = 0 the hard threshold, and 0 < r < 1
/// thresholds through the second zero of g_r. Odd in t', and at an energy
/// tie between 0 and the nonzero candidate the nonzero one is returned.
inline double shrink(const ShrinkageProblem& prob) {
    detail::validate(prob);
    if (prob.mu == 0.0) return prob.t_prime;
    if (prob.t_prime == 0.0) return 0.0;

    const double sign = prob.t_prime > 0.0 ? 1.0 : -1.0;
    const double tp = std::abs(prob.t_prime);

    if (prob.r == 1.0) {
        const double mag = tp - prob.mu;
        return mag > 0.0 ? sign * mag : 0.0;
    }
    if (prob.r == 0.0) return 0.5 * tp * tp < prob.mu ? 0.0 : prob.t_prime;

    const ShrinkageProblem folded{tp, prob.mu, prob.r};
    const double t0 = detail::g_min_location(tp, prob.r);
    if (eval_g(t0, folded) >= 0.0) return 0.0;  // E_r increases on [0, inf)
    const double t2 = newton_second_zero(folded, 1e-12);
    return prox_energy(t2, folded) <= prox_energy(0.0, folded) ? sign * t2 : 0.0;
}

}  // namespace plar
