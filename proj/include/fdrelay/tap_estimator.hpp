#pragma once

#include <functional>

#include "fdrelay/banded.hpp"
#include "fdrelay/bfgs.hpp"
#include "fdrelay/model.hpp"

namespace fdrelay::detail {

/// Ridge least squares on the convolution matrix of x: init for the tap
/// estimators.
inline cvec ridge_ls_taps(const cvec& y, const cvec& x, Eigen::Index L_f, double ridge = 1e-8) {
    cmat G = cmat::Zero(L_f, L_f);
    cvec b = cvec::Zero(L_f);
    const Eigen::Index n = x.size();
    for (Eigen::Index i = 0; i < L_f; ++i) {
        for (Eigen::Index k = i; k < n; ++k) b[i] += std::conj(x[k - i]) * y[k];
        for (Eigen::Index j = 0; j <= i; ++j) {
            cplx acc(0.0);
            for (Eigen::Index k = i; k < n; ++k) acc += std::conj(x[k - i]) * x[k - j];
            G(i, j) = std::conj(acc);
            G(j, i) = acc;
        }
    }
    G.diagonal().array() += ridge * G.diagonal().real().maxCoeff();
    return G.ldlt().solve(b);
}

struct TapEstimate {
    cvec taps;
    int iterations = 0;
    bool converged = false;
};

/// Shared machinery of the overall-tap estimators (frequency-selective and
/// multi-relay): BFGS over the monic tap ratios with the leading tap profiled
/// out linearly, under a covariance frozen per pass and rebuilt from the
/// current tap estimate between passes.
inline TapEstimate estimate_taps_gls(
    const cvec& y, const cvec& x, Eigen::Index L_f,
    const std::function<BandedCholesky(const cvec& current)>& covariance, int passes,
    const BfgsOptions& opt = {}) {
    const Eigen::Index N = x.size();
    cvec current = ridge_ls_taps(y, x, L_f);
    if (std::abs(current[0]) < 1e-12) current[0] = cplx(1e-12);

    auto taps_of = [&](const rvec& z) {
        cvec taps(L_f);
        taps[0] = 1.0;
        for (Eigen::Index k = 1; k < L_f; ++k) taps[k] = cplx(z[2 * (k - 1)], z[2 * k - 1]);
        return taps;
    };

    TapEstimate out;
    for (int pass = 0; pass < passes; ++pass) {
        const BandedCholesky chol = covariance(current);
        auto profiled_fit = [&](const cvec& taps) -> std::pair<double, cplx> {
            const BandedToeplitz H = BandedToeplitz::lower(taps, N);
            const cvec u = H.apply(x);
            const double den = u.dot(chol.solve(u)).real();
            const cplx gain = u.dot(chol.solve(y)) / den;
            const cvec res = y - gain * u;
            return {res.dot(chol.solve(res)).real(), gain};
        };
        auto objective = [&](const rvec& z) { return profiled_fit(taps_of(z)).first; };
        auto gradient = [&](const rvec& z) {
            rvec g(z.size());
            const double step = 1e-6;
            for (Eigen::Index i = 0; i < z.size(); ++i) {
                rvec zp = z, zm = z;
                zp[i] += step;
                zm[i] -= step;
                g[i] = (objective(zp) - objective(zm)) / (2.0 * step);
            }
            return g;
        };

        rvec z0(2 * (L_f - 1));
        for (Eigen::Index k = 1; k < L_f; ++k) {
            const cplx rho = current[k] / current[0];
            z0[2 * (k - 1)] = rho.real();
            z0[2 * k - 1] = rho.imag();
        }
        const BfgsResult res =
            minimize_bfgs(objective, gradient, z0, [](const rvec&) { return true; }, opt);
        const cvec taps = taps_of(res.z);
        current = profiled_fit(taps).second * taps;
        out.iterations += res.iterations;
        out.converged = res.converged;
    }
    out.taps = current;
    return out;
}

} // namespace fdrelay::detail
