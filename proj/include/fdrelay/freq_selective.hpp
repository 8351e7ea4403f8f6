#pragma once

#include <optional>

#include "fdrelay/bfgs.hpp"
#include "fdrelay/crb.hpp"
#include "fdrelay/likelihood.hpp"
#include "fdrelay/model.hpp"
#include "fdrelay/quadrature.hpp"

namespace fdrelay {

/// Multipath links: source-relay taps with variances var_sr_taps (length L1),
/// relay-destination taps with var_rd_taps (length L2); the RSI loop stays
/// single-tap. Overall channel length L_f = L1 + L2 + L - 2.
struct FreqSelParams {
    SystemParams base;
    rvec var_sr_taps;
    rvec var_rd_taps;

    Eigen::Index L1() const { return var_sr_taps.size(); }
    Eigen::Index L2() const { return var_rd_taps.size(); }
    Eigen::Index L_f() const { return L1() + L2() + base.L - 2; }
    double sum_var_sr() const { return var_sr_taps.sum(); }

    void validate() const {
        base.validate();
        if (L1() < 1 || L2() < 1) throw domain_error("FreqSelParams: L1, L2 >= 1");
        if ((var_sr_taps.array() <= 0).any() || (var_rd_taps.array() <= 0).any())
            throw domain_error("FreqSelParams: tap variances must be positive");
        if (L_f() >= base.N) throw domain_error("FreqSelParams: L_f < N required");
    }
};

/// alpha_f^2 = P_r / (P_s sum_i sigma_sri^2 + P_r sigma_rr^2 + sigma_r^2).
inline double alpha_f(const FreqSelParams& fp) {
    const double denom =
        fp.base.P_s * fp.sum_var_sr() + fp.base.P_r * fp.base.var_rr + fp.base.var_nr;
    if (denom <= 0 || fp.base.P_r <= 0) throw domain_error("alpha_f: invalid parameters");
    return std::sqrt(fp.base.P_r / denom);
}

struct FsRealization {
    cvec h_sr;  ///< L1 taps
    cvec h_rd;  ///< L2 taps
    cplx h_rr{0.0};
    double alpha = 1.0;
    cplx theta{0.0};  ///< alpha_f * h_rr

    bool stable() const { return std::abs(theta) < 1.0; }
};

inline FsRealization draw_fs_realization(const FreqSelParams& fp, Rng& rng,
                                         std::uint64_t* rejections = nullptr) {
    const double af = alpha_f(fp);
    for (;;) {
        FsRealization r;
        r.alpha = af;
        r.h_sr.resize(fp.L1());
        for (Eigen::Index i = 0; i < fp.L1(); ++i) r.h_sr[i] = rng.gaussian_c(fp.var_sr_taps[i]);
        r.h_rd.resize(fp.L2());
        for (Eigen::Index i = 0; i < fp.L2(); ++i) r.h_rd[i] = rng.gaussian_c(fp.var_rd_taps[i]);
        r.h_rr = fp.base.var_rr > 0 ? rng.gaussian_c(fp.base.var_rr) : cplx(0.0);
        r.theta = af * r.h_rr;
        if (r.stable()) return r;
        if (rejections) ++(*rejections);
    }
}

/// y = alpha_f H_rd H_theta H_sr x + alpha_f H_rd H_theta n_r + n_d with
/// exact banded Toeplitz products (no asymptotic approximation here). The
/// flat-fading case delegates to the core simulator so the reduction is
/// bit-identical.
inline ReceivedBlock simulate_block_fs(const FreqSelParams& fp, const FsRealization& r,
                                       const TrainingSequence& x, Rng& rng) {
    fp.validate();
    x.validate();
    if (x.size() != fp.base.N) throw domain_error("simulate_block_fs: training length != N");
    if (!r.stable()) throw domain_error("simulate_block_fs: unstable realization");
    if (fp.L1() == 1 && fp.L2() == 1) {
        SystemParams p = fp.base;
        p.var_sr = fp.var_sr_taps[0];
        p.var_rd = fp.var_rd_taps[0];
        return simulate_block(p, ChannelRealization::from_links(r.h_sr[0], r.h_rd[0], r.h_rr,
                                                                r.alpha),
                              x, rng);
    }
    const Eigen::Index N = fp.base.N;
    const BandedToeplitz Hsr = BandedToeplitz::lower(r.h_sr, N);
    const BandedToeplitz Ht = build_h_theta(r.theta, fp.base.L, N, fp.base.m);
    const BandedToeplitz Hrd = BandedToeplitz::lower(r.h_rd, N);

    const cvec n_r = rng.gaussian_cvec(N, fp.base.var_nr);
    ReceivedBlock blk;
    blk.y = r.alpha * Hrd.apply(Ht.apply(Hsr.apply(x.samples))) +
            r.alpha * Hrd.apply(Ht.apply(n_r));
    for (Eigen::Index i = 0; i < N; ++i) blk.y[i] += rng.gaussian_c(fp.base.var_nd);
    return blk;
}

struct OverallTaps {
    cvec h_f;
    double alpha_f = 1.0;
};

/// Overall channel taps by spectral inversion: h_f[k] = alpha_f (1/2pi)
/// int p_rd(lambda) t(lambda) q(lambda) e^{-jk lambda} dlambda with the
/// truncated-geometric t, so the integrand is a trig polynomial and the
/// quadrature equals the exact triple convolution to roundoff.
inline OverallTaps overall_taps(const FreqSelParams& fp, const FsRealization& r) {
    if (!r.stable()) throw domain_error("overall_taps: |theta| >= 1");
    OverallTaps out;
    out.alpha_f = r.alpha;
    out.h_f.resize(fp.L_f());
    const cvec t_taps = theta_taps(r.theta, fp.base.L);
    auto poly = [](const cvec& taps, double lambda) {
        cplx acc(0.0);
        for (Eigen::Index k = 0; k < taps.size(); ++k)
            acc += taps[k] * std::exp(j1i * (lambda * static_cast<double>(k)));
        return acc;
    };
    for (Eigen::Index k = 0; k < fp.L_f(); ++k) {
        out.h_f[k] = r.alpha * integrate_periodic_c([&](double lam) {
            return poly(r.h_sr, lam) * poly(t_taps, lam) * poly(r.h_rd, lam) *
                   std::exp(-j1i * (lam * static_cast<double>(k)));
        });
    }
    return out;
}

/// Exact triple convolution of the three tap sequences (test oracle and the
/// MSE reference channel for the experiments).
inline cvec exact_overall_taps(const FreqSelParams& fp, const FsRealization& r) {
    const cvec conv = convolve(convolve(r.h_sr, theta_taps(r.theta, fp.base.L)), r.h_rd);
    return r.alpha * conv.head(fp.L_f());
}

struct FsEstimate {
    cvec taps;  ///< estimated overall taps, length L_f
    int iterations = 0;
    bool converged = false;
};

enum class FsCovariance { model, genie };

namespace detail {

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

} // namespace detail

/// Profiled marginal likelihood over the overall taps: the leading tap plays
/// the role of h and is profiled out linearly; BFGS runs over the 2(L_f - 1)
/// real coordinates of the monic tap ratios with central-difference
/// gradients. The covariance model follows the destination's knowledge:
///   model: C = (sigma_r^2 / sum var_sr) H[xi_c] H[xi_c]^H + sigma_d^2 I,
///          with xi_c the current tap estimate (ridge LS at first, then the
///          previous pass's estimate); C is held fixed within each BFGS pass
///          so the leading-tap profiling stays exactly linear and the
///          covariance cannot absorb the data-fit residual.
///   genie: C built from the true noise path alpha_f^2 sigma_r^2
///          (H_rd H_theta)(.)^H + sigma_d^2 I (for validation only).
inline FsEstimate ml_estimate_taps(const cvec& y, const TrainingSequence& x,
                                   const FreqSelParams& fp,
                                   FsCovariance cov = FsCovariance::model,
                                   const FsRealization* genie = nullptr,
                                   const BfgsOptions& opt = {}, int covariance_passes = 2) {
    fp.validate();
    const Eigen::Index L_f = fp.L_f();
    const Eigen::Index N = fp.base.N;
    cvec current = detail::ridge_ls_taps(y, x.samples, L_f);
    if (std::abs(current[0]) < 1e-12) current[0] = cplx(1e-12);

    auto taps_of = [&](const rvec& z) {
        cvec taps(L_f);
        taps[0] = 1.0;
        for (Eigen::Index k = 1; k < L_f; ++k) taps[k] = cplx(z[2 * (k - 1)], z[2 * k - 1]);
        return taps;
    };

    std::optional<BandedCholesky> chol;
    auto rebuild_covariance = [&]() {
        if (cov == FsCovariance::genie) {
            if (!genie)
                throw domain_error("ml_estimate_taps: genie covariance needs a realization");
            const cvec noise_taps = convolve(theta_taps(genie->theta, fp.base.L), genie->h_rd);
            chol.emplace(BandedHermitian::gram_covariance(
                noise_taps, genie->alpha * genie->alpha * fp.base.var_nr, fp.base.var_nd, N));
        } else {
            chol.emplace(BandedHermitian::gram_covariance(
                current, fp.base.var_nr / fp.sum_var_sr(), fp.base.var_nd, N));
        }
    };

    auto profiled_fit = [&](const cvec& taps) -> std::pair<double, cplx> {
        const BandedToeplitz H = BandedToeplitz::lower(taps, N);
        const cvec u = H.apply(x.samples);
        const cvec ciu = chol->solve(u);
        const double den = u.dot(ciu).real();
        const cplx gain = u.dot(chol->solve(y)) / den;
        const cvec res = y - gain * u;
        return {res.dot(chol->solve(res)).real(), gain};
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

    FsEstimate out;
    const int passes = cov == FsCovariance::genie ? 1 : std::max(1, covariance_passes);
    for (int pass = 0; pass < passes; ++pass) {
        rebuild_covariance();
        rvec z0(2 * (L_f - 1));
        for (Eigen::Index k = 1; k < L_f; ++k) {
            const cplx rho = current[k] / current[0];
            z0[2 * (k - 1)] = rho.real();
            z0[2 * k - 1] = rho.imag();
        }
        const BfgsResult res = minimize_bfgs(objective, gradient, z0,
                                             [](const rvec&) { return true; }, opt);
        const cvec taps = taps_of(res.z);
        current = profiled_fit(taps).second * taps;
        out.iterations += res.iterations;
        out.converged = res.converged;
    }
    out.taps = current;
    return out;
}

/// Fisher information of the overall taps under the estimator's own model
/// y ~ CN(H[xi] x, C(xi)), C(xi) = (sigma_r^2 / sum var_sr) H[xi] H[xi]^H
/// + sigma_d^2 I; entries per the generic Gaussian FIM with Wirtinger
/// derivatives. Dense evaluation (analysis-scale N).
inline FisherMatrix fim_freq(const cvec& taps, const TrainingSequence& x,
                             const FreqSelParams& fp) {
    const Eigen::Index N = fp.base.N;
    const Eigen::Index L_f = taps.size();
    const double scale = fp.base.var_nr / fp.sum_var_sr();

    cmat H = cmat::Zero(N, N);
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = std::max<Eigen::Index>(0, i - L_f + 1); j <= i; ++j)
            H(i, j) = taps[i - j];
    const cmat C = scale * H * H.adjoint() + fp.base.var_nd * cmat::Identity(N, N);
    const cmat Ci = C.inverse();

    std::vector<cvec> u(L_f);
    for (Eigen::Index k = 0; k < L_f; ++k) {
        u[k] = cvec::Zero(N);
        for (Eigen::Index i = k; i < N; ++i) u[k][i] = x.samples[i - k];
    }
    // shift operators S^k as dense for the trace terms
    std::vector<cmat> shift(L_f);
    for (Eigen::Index k = 0; k < L_f; ++k) {
        shift[k] = cmat::Zero(N, N);
        for (Eigen::Index i = k; i < N; ++i) shift[k](i, i - k) = 1.0;
    }

    FisherMatrix fim;
    fim.gamma = cmat(L_f, L_f);
    const cmat CiH = Ci * H;
    for (Eigen::Index m = 0; m < L_f; ++m) {
        for (Eigen::Index n2 = 0; n2 < L_f; ++n2) {
            const cplx mean = u[m].dot(Ci * u[n2]);
            // tr(C^{-1} dC/dxi_m^* C^{-1} dC/dxi_n) with dC/dxi_n = scale S_n H^H
            const cplx tr = scale * scale *
                            (CiH * shift[m].adjoint() * Ci * shift[n2] * H.adjoint()).trace();
            fim.gamma(m, n2) = mean + tr;
        }
    }
    return fim;
}

} // namespace fdrelay
