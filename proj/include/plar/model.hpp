#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "special_functions.hpp"

namespace plar {

/// Coefficients of the log-linear mean recursion
/// log(u_i + 1) = a0 + sum_k a_k log(y_{i-k} + 1) + sum_k b_k log(u_{i-k} + 1).
struct ModelParams {
    double a0 = 0.0;
    std::vector<double> a;  // length p
    std::vector<double> b;  // length q
};

/// Full-length nonnegative series y (observed entries plus imputed ones).
struct SeriesSample {
    std::vector<double> y;
};

/// Observed index set D and the observed values. `values` has full length N;
/// entries where mask is false are ignored (kept at zero by producers).
struct ObservationSet {
    std::vector<bool> mask;
    std::vector<double> values;
};

/// Penalty exponents, weights, model orders, and solver knobs.
struct HyperParams {
    int p = 0;
    int q = 0;
    double r = 0.5;      // residual exponent, in (0, 1]
    double s = 1.0;      // coefficient exponent, in (0, 1]
    double lambda = 1.0; // residual weight
    double mu = 0.0;     // coefficient weight
    double tau = 1e-4;   // step size
    double eps = 1e-6;   // objective-change stopping tolerance
    int max_iters = 50000;
};

/// Conditional mean series u, u_i >= 0 by the clamp in the recursion.
struct MeanSeries {
    std::vector<double> u;
};

// Floor for log(u_i) and the division by u_i: the clamp produces exact
// zeros, where the Poisson term would otherwise be infinite.
inline constexpr double kMeanFloor = 1e-8;

// exp(v) overflows double just above this; the recursion reports it
// instead of propagating infinities.
inline constexpr double kLogMeanOverflow = 709.0;

inline std::size_t observed_count(const ObservationSet& obs) {
    std::size_t n = 0;
    for (bool m : obs.mask) n += m ? 1 : 0;
    return n;
}

namespace detail {

inline void check_hyper(const HyperParams& h) {
    if (h.p < 0 || h.q < 0) throw std::invalid_argument("hyper: p and q must be >= 0");
    if (!(h.r > 0.0 && h.r <= 1.0)) throw std::invalid_argument("hyper: r must be in (0, 1]");
    if (!(h.s > 0.0 && h.s <= 1.0)) throw std::invalid_argument("hyper: s must be in (0, 1]");
    if (!(h.lambda >= 0.0)) throw std::invalid_argument("hyper: lambda must be >= 0");
    if (!(h.mu >= 0.0)) throw std::invalid_argument("hyper: mu must be >= 0");
}

inline void check_dims(const ModelParams& params, const HyperParams& h) {
    if (params.a.size() != static_cast<std::size_t>(h.p) ||
        params.b.size() != static_cast<std::size_t>(h.q))
        throw std::invalid_argument("params: coefficient lengths must match p and q");
}

inline void check_obs(const ObservationSet& obs, std::size_t n) {
    if (obs.mask.size() != n || obs.values.size() != n)
        throw std::invalid_argument("observation set: mask and values must have series length");
}

// |t|^e for e in (0, 1], with |0|^e = 0. Evaluated as exp(e log|t|).
inline double abs_pow(double t, double e) {
    if (t == 0.0) return 0.0;
    const double a = std::abs(t);
    if (e == 1.0) return a;
    return std::exp(e * std::log(a));
}

// log argument v_i of the mean recursion with zero boundary: terms with
// i - k < 0 are dropped. logy1 and logu1 hold log(y_j + 1), log(u_j + 1)
// for j < i; the simulator and forward_means share this exact summation
// order so their u sequences agree bit for bit.
inline double mean_log_argument(const ModelParams& params, const std::vector<double>& logy1,
                                const std::vector<double>& logu1, std::size_t i) {
    double v = params.a0;
    for (std::size_t k = 1; k <= params.a.size(); ++k)
        if (i >= k) v += params.a[k - 1] * logy1[i - k];
    for (std::size_t k = 1; k <= params.b.size(); ++k)
        if (i >= k) v += params.b[k - 1] * logu1[i - k];
    return v;
}

// u_i = max(exp(v_i) - 1, 0); the clamp triggers exactly when v_i <= 0.
inline double mean_from_log_argument(double v) {
    return v > 0.0 ? std::expm1(v) : 0.0;
}

inline void check_mean_overflow(double v, std::size_t i, const char* where) {
    if (v > kLogMeanOverflow)
        throw std::range_error(std::string(where) + ": mean recursion overflow at index " +
                               std::to_string(i + 1));
}

}  // namespace detail

/// Conditional means u_i computed left to right from the recursion, with
/// the clamped u feeding back into the log(u_{i-k} + 1) terms.
inline MeanSeries forward_means(const ModelParams& params, const SeriesSample& y,
                                const HyperParams& hyper) {
    detail::check_hyper(hyper);
    detail::check_dims(params, hyper);
    const std::size_t n = y.y.size();
    MeanSeries mean;
    mean.u.resize(n);
    std::vector<double> logy1(n), logu1(n);
    for (std::size_t i = 0; i < n; ++i) {
        logy1[i] = std::log1p(y.y[i]);
        const double v = detail::mean_log_argument(params, logy1, logu1, i);
        detail::check_mean_overflow(v, i, "forward_means");
        mean.u[i] = detail::mean_from_log_argument(v);
        logu1[i] = std::log1p(mean.u[i]);
    }
    return mean;
}

/// H = sum_i [u_i - y_i log(u_i) + log Gamma(y_i + 1)], with log(u_i)
/// evaluated at max(u_i, kMeanFloor).
inline double smooth_part(const ModelParams& params, const SeriesSample& y,
                          const HyperParams& hyper) {
    const MeanSeries mean = forward_means(params, y, hyper);
    double h = 0.0;
    for (std::size_t i = 0; i < y.y.size(); ++i)
        h += mean.u[i] - y.y[i] * std::log(std::max(mean.u[i], kMeanFloor)) +
             log_gamma(y.y[i] + 1.0);
    return h;
}

/// J = H + lambda sum_{i in D} |y_i - ytilde_i|^r + mu (sum |a_k|^s + sum |b_k|^s).
inline double objective(const ModelParams& params, const SeriesSample& y,
                        const ObservationSet& obs, const HyperParams& hyper) {
    detail::check_obs(obs, y.y.size());
    const double h = smooth_part(params, y, hyper);
    double resid = 0.0;
    for (std::size_t i = 0; i < y.y.size(); ++i)
        if (obs.mask[i]) resid += detail::abs_pow(y.y[i] - obs.values[i], hyper.r);
    double coef = 0.0;
    for (double ak : params.a) coef += detail::abs_pow(ak, hyper.s);
    for (double bk : params.b) coef += detail::abs_pow(bk, hyper.s);
    return h + hyper.lambda * resid + hyper.mu * coef;
}

/// Exact gradient of smooth_part under the clamp conventions: the chain
/// contribution through u_i is zero on the flat branch of max(exp(v)-1, 0),
/// and divisions by u_i use the kMeanFloor floor.
struct SmoothGradient {
    double a0 = 0.0;
    std::vector<double> a;  // length p
    std::vector<double> b;  // length q
    std::vector<double> y;  // length N
};

namespace detail {

// Forward-pass quantities shared by every gradient block. factor_i is the
// paper's (u_i - y_i)/u_i with the floored denominator; active_i marks the
// unclamped branch v_i > 0, where d u_i / d v_i = u_i + 1.
struct GradContext {
    std::vector<double> u;      // clamped means
    std::vector<double> w;      // log(u_i + 1)
    std::vector<double> logy1;  // log(y_i + 1)
    std::vector<double> factor;
    std::vector<char> active;
};

inline GradContext make_grad_context(const ModelParams& params, const SeriesSample& y,
                                     const HyperParams& hyper) {
    check_hyper(hyper);
    check_dims(params, hyper);
    const std::size_t n = y.y.size();
    GradContext ctx;
    ctx.u.resize(n);
    ctx.w.resize(n);
    ctx.logy1.resize(n);
    ctx.factor.resize(n);
    ctx.active.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        ctx.logy1[i] = std::log1p(y.y[i]);
        const double v = mean_log_argument(params, ctx.logy1, ctx.w, i);
        check_mean_overflow(v, i, "grad_smooth");
        const double ui = mean_from_log_argument(v);
        ctx.u[i] = ui;
        ctx.w[i] = std::log1p(ui);
        ctx.active[i] = v > 0.0 ? 1 : 0;
        ctx.factor[i] = (ui - y.y[i]) / std::max(ui, kMeanFloor);
    }
    return ctx;
}

// dH/dtheta = sum_i factor_i (u_i + 1) s_i for a coefficient block theta,
// where the sensitivity s_i = d log(u_i + 1)/d theta obeys the forward
// recursion s_i = active_i (base_i + sum_l b_l s_{i-l}) with zero boundary.
template <class BaseFn>
double sensitivity_sum(const ModelParams& params, const GradContext& ctx, BaseFn base) {
    const std::size_t n = ctx.u.size();
    const std::size_t q = params.b.size();
    std::vector<double> s;
    if (q > 0) s.resize(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double acc = base(i);
        for (std::size_t l = 1; l <= q; ++l)
            if (i >= l) acc += params.b[l - 1] * s[i - l];
        const double si = ctx.active[i] ? acc : 0.0;
        if (q > 0) s[i] = si;
        total += ctx.factor[i] * (ctx.u[i] + 1.0) * si;
    }
    return total;
}

inline double grad_a0(const ModelParams& params, const GradContext& ctx) {
    return sensitivity_sum(params, ctx, [](std::size_t) { return 1.0; });
}

inline std::vector<double> grad_a(const ModelParams& params, const GradContext& ctx) {
    std::vector<double> g(params.a.size());
    for (std::size_t k = 1; k <= params.a.size(); ++k)
        g[k - 1] = sensitivity_sum(
            params, ctx, [&ctx, k](std::size_t i) { return i >= k ? ctx.logy1[i - k] : 0.0; });
    return g;
}

inline std::vector<double> grad_b(const ModelParams& params, const GradContext& ctx) {
    std::vector<double> g(params.b.size());
    for (std::size_t k = 1; k <= params.b.size(); ++k)
        g[k - 1] = sensitivity_sum(
            params, ctx, [&ctx, k](std::size_t i) { return i >= k ? ctx.w[i - k] : 0.0; });
    return g;
}

// dH/dy_i = -log(u_i) + psi(y_i + 1) + sum_{j > i} factor_j (u_j + 1) s_j,
// where s_j = d log(u_j + 1)/d y_i has direct term a_{j-i}/(y_i + 1) for
// 1 <= j - i <= p and threads through the b recursion. For q = 0 the
// recursion collapses to the direct term, giving the O(N p) path; the
// general path must match it bit for bit on q = 0 inputs.
inline std::vector<double> grad_y(const ModelParams& params, const SeriesSample& y,
                                  const GradContext& ctx, bool force_general = false) {
    const std::size_t n = y.y.size();
    const std::size_t p = params.a.size();
    const std::size_t q = params.b.size();
    std::vector<double> g(n);
    std::vector<double> s;
    if (q > 0 || force_general) s.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double gi = -std::log(std::max(ctx.u[i], kMeanFloor)) + digamma(y.y[i] + 1.0);
        const double yi1 = y.y[i] + 1.0;
        if (q == 0 && !force_general) {
            const std::size_t jmax = std::min(n - 1, i + p);
            for (std::size_t j = i + 1; j <= jmax; ++j) {
                const double sj = ctx.active[j] ? params.a[j - i - 1] / yi1 : 0.0;
                gi += ctx.factor[j] * (ctx.u[j] + 1.0) * sj;
            }
        } else {
            for (std::size_t j = i + 1; j < n; ++j) {
                double acc = j - i <= p ? params.a[j - i - 1] / yi1 : 0.0;
                // s entries at or below i belong to earlier blocks; w_j with
                // j <= i does not depend on y_i, so those terms are zero.
                for (std::size_t l = 1; l <= q; ++l)
                    if (j >= i + 1 + l) acc += params.b[l - 1] * s[j - l];
                const double sj = ctx.active[j] ? acc : 0.0;
                s[j] = sj;
                gi += ctx.factor[j] * (ctx.u[j] + 1.0) * sj;
            }
        }
        g[i] = gi;
    }
    return g;
}

}  // namespace detail

inline SmoothGradient grad_smooth(const ModelParams& params, const SeriesSample& y,
                                  const HyperParams& hyper) {
    const detail::GradContext ctx = detail::make_grad_context(params, y, hyper);
    SmoothGradient g;
    g.a0 = detail::grad_a0(params, ctx);
    g.a = detail::grad_a(params, ctx);
    g.b = detail::grad_b(params, ctx);
    g.y = detail::grad_y(params, y, ctx);
    return g;
}

/// Negative log-likelihood diagnostic: J plus the normalization blocks
/// -|D| log(C_r) - (|D|/r) log(lambda) - (p+q) log(C_s) - ((p+q)/s) log(mu)
/// with C_e = e / (2 Gamma(1/e)). Constant in (params, y) for fixed hyper.
inline double neg_log_likelihood(const ModelParams& params, const SeriesSample& y,
                                 const ObservationSet& obs, const HyperParams& hyper) {
    if (!(hyper.lambda > 0.0 && hyper.mu > 0.0))
        throw std::invalid_argument("neg_log_likelihood: lambda and mu must be > 0");
    const double j = objective(params, y, obs, hyper);
    const double log_cr = std::log(hyper.r) - std::log(2.0) - log_gamma(1.0 / hyper.r);
    const double log_cs = std::log(hyper.s) - std::log(2.0) - log_gamma(1.0 / hyper.s);
    const double dn = static_cast<double>(observed_count(obs));
    const double pq = static_cast<double>(hyper.p + hyper.q);
    return j - dn * log_cr - dn / hyper.r * std::log(hyper.lambda) - pq * log_cs -
           pq / hyper.s * std::log(hyper.mu);
}

}  // namespace plar
