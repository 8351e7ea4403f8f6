#pragma once

#include <optional>
#include <utility>

#include "fdrelay/bfgs.hpp"
#include "fdrelay/likelihood.hpp"
#include "fdrelay/model.hpp"

namespace fdrelay {

/// Everything one estimation run needs. The colored-noise gain uses the
/// expected |d|^2 = alpha^2 sigma_rd^2 (the realization of d is a nuisance
/// parameter that was integrated out).
struct LikelihoodContext {
    TrainingSequence x;
    cvec y;
    SystemParams params;
    double alpha = 1.0;

    double noise_scale() const { return alpha * alpha * params.var_rd * params.var_nr; }

    void validate() const {
        if (x.size() != params.N || y.size() != params.N)
            throw domain_error("LikelihoodContext: dimension mismatch");
    }
};

/// C(theta) = alpha^2 sigma_rd^2 sigma_r^2 H_theta H_theta^H + sigma_d^2 I.
inline BandedHermitian covariance(cplx theta, double alpha, const SystemParams& p,
                                  Eigen::Index N, Eigen::Index L) {
    if (std::abs(theta) >= 1.0) throw domain_error("covariance: |theta| >= 1");
    return BandedHermitian::gram_covariance(theta_taps(theta, L, p.m),
                                            alpha * alpha * p.var_rd * p.var_nr, p.var_nd, N);
}

namespace detail {
inline ProfiledLikelihood eval_point(cplx theta, const LikelihoodContext& ctx,
                                     bool interior_only = true) {
    if (interior_only && std::abs(theta) >= 1.0) throw domain_error("objective: |theta| >= 1");
    return ProfiledLikelihood(theta_taps(theta, ctx.params.L, ctx.params.m), ctx.x.samples,
                              ctx.y, ctx.noise_scale(), ctx.params.var_nd);
}
} // namespace detail

/// Closed-form minimizer of f over h at fixed theta:
/// (x^H H^H C^{-1} H x)^{-1} x^H H^H C^{-1} y. Valid for any theta with C
/// positive definite, including the unit circle the final projection maps to.
inline cplx profile_h(cplx theta, const LikelihoodContext& ctx) {
    return detail::eval_point(theta, ctx, false).profiled_gain();
}

/// f(theta) = log|C| + (y - mu)^H C^{-1} (y - mu) at the profiled h.
inline double objective(cplx theta, const LikelihoodContext& ctx) {
    return detail::eval_point(theta, ctx).objective();
}

/// (df/dtheta_x, df/dtheta_y) with h held at its profiled value.
inline std::pair<double, double> gradient(cplx theta, const LikelihoodContext& ctx) {
    const ProfiledLikelihood pt = detail::eval_point(theta, ctx);
    const cvec b = theta_derivative_taps(theta, ctx.params.L, ctx.params.m);
    return {pt.gradient_component(b), pt.gradient_component(j1i * b)};
}

/// Linear MMSE initializer from the second and third received samples
/// (paper indexing y_d[2], y_d[3]): h0 from y[1], then theta0 from y[2] with
/// the h0 x[2] contribution removed. Needs N >= 3 and known statistics.
inline std::pair<cplx, cplx> mmse_init(const cvec& y, const TrainingSequence& x,
                                       const SystemParams& p, double alpha) {
    if (y.size() < 3 || x.size() < 3) throw domain_error("mmse_init: N >= 3 required");
    const double a2 = alpha * alpha;
    const double prior_h = a2 * p.var_sr * p.var_rd;
    const double noise_h = a2 * p.var_rd * p.var_nr + p.var_nd;
    const cplx x1 = x.samples[1];
    const cplx h0 = prior_h * std::conj(x1) * y[1] / (prior_h * std::norm(x1) + noise_h);
    const double var_res = prior_h * noise_h / (prior_h * std::norm(x1) + noise_h);

    const cplx x2 = x.samples[2];
    const cplx y3 = y[2] - h0 * x2;
    const double prior_t = a2 * p.var_rr;
    const double denom = std::norm(h0) * prior_t * std::norm(x1) + var_res * std::norm(x2) +
                         var_res * prior_t * std::norm(x1) +
                         a2 * a2 * p.var_sr * p.var_rd * p.var_rd * p.var_nr +
                         a2 * p.var_rd * p.var_nr + p.var_nd;
    const cplx theta0 = std::conj(h0) * prior_t * std::conj(x1) * y3 / denom;
    return {h0, theta0};
}

struct EstimateResult {
    cplx h_hat{0.0};
    cplx theta_hat{0.0};
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_trace;
    bool projected = false;
    int iterations_to_ftol = 0;
};

struct EstimatorOptions {
    BfgsOptions bfgs{};
    double init_clip_radius = 0.95;  ///< initializers outside the disk are pulled here
};

/// BFGS over (theta_x, theta_y) on the profiled objective, MMSE-initialized
/// by default; the returned theta is Euclidean-projected onto the closed unit
/// disk (the interior line search keeps iterates strictly inside, so the
/// projection can only trigger for a pathological initializer).
inline EstimateResult bfgs_estimate(const LikelihoodContext& ctx,
                                    std::optional<std::pair<cplx, cplx>> init = {},
                                    const EstimatorOptions& opt = {}) {
    ctx.validate();
    cplx theta0 = init ? init->second : mmse_init(ctx.y, ctx.x, ctx.params, ctx.alpha).second;
    if (std::abs(theta0) >= 1.0) theta0 *= opt.init_clip_radius / std::abs(theta0);

    auto f = [&](const rvec& z) { return objective(cplx(z[0], z[1]), ctx); };
    auto g = [&](const rvec& z) {
        auto [gx, gy] = gradient(cplx(z[0], z[1]), ctx);
        rvec out(2);
        out << gx, gy;
        return out;
    };
    auto feasible = [](const rvec& z) { return z[0] * z[0] + z[1] * z[1] < 1.0; };

    rvec z0(2);
    z0 << theta0.real(), theta0.imag();
    const BfgsResult r = minimize_bfgs(f, g, z0, feasible, opt.bfgs);

    EstimateResult out;
    out.theta_hat = cplx(r.z[0], r.z[1]);
    if (std::abs(out.theta_hat) > 1.0) {
        out.theta_hat /= std::abs(out.theta_hat);
        out.projected = true;
    }
    out.h_hat = profile_h(out.theta_hat, ctx);
    out.iterations = r.iterations;
    out.converged = r.converged;
    out.objective_trace = r.trace;
    out.iterations_to_ftol = r.iterations_to_ftol;
    return out;
}

/// Random-initialization baseline of the convergence experiment: theta0
/// uniform on the disk of radius 0.9, h0 unused (profiled anyway).
inline std::pair<cplx, cplx> random_init_disk(Rng& rng) {
    return {cplx(0.0), rng.uniform_disk(0.9)};
}

} // namespace fdrelay
