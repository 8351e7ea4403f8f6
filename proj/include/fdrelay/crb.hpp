#pragma once

#include "fdrelay/banded.hpp"
#include "fdrelay/model.hpp"
#include "fdrelay/quadrature.hpp"

namespace fdrelay {

/// Complex Fisher information E[s s^H] of the Wirtinger score; Hermitian PSD.
struct FisherMatrix {
    cmat gamma;

    void require_hermitian(double tol = 1e-8) const {
        if ((gamma - gamma.adjoint()).norm() > tol * std::max(1.0, gamma.norm()))
            throw numerical_error("FisherMatrix: not Hermitian");
    }
};

struct CrbResult {
    double crb_h = 0.0;
    double crb_theta = 0.0;
    double trace = 0.0;
};

/// Exact 2x2 Fisher information of (h, theta) for a given training sequence:
///   G11 = x^H H^H C^{-1} H x
///   G22 = |h|^2 x^H B^H C^{-1} B x + a^4 tr(C^{-1} H B^H C^{-1} B H^H)
///   G12 = h x^H H^H C^{-1} B x,  G21 = conj(G12)
/// with a^2 = alpha^2 sigma_rd^2 sigma_r^2 the colored-noise gain.
inline FisherMatrix fim_exact(cplx h, cplx theta, const TrainingSequence& x,
                              const SystemParams& p, double alpha) {
    if (std::abs(theta) >= 1.0) throw domain_error("fim_exact: |theta| >= 1");
    const Eigen::Index N = x.size();
    const cvec g = theta_taps(theta, p.L, p.m);
    const cvec b = theta_derivative_taps(theta, p.L, p.m);
    const double a2 = alpha * alpha * p.var_rd * p.var_nr;

    const BandedCholesky chol(BandedHermitian::gram_covariance(g, a2, p.var_nd, N));
    const BandedToeplitz H = BandedToeplitz::lower(g, N);
    const BandedToeplitz B = BandedToeplitz::lower(b, N);
    const cvec u = H.apply(x.samples);
    const cvec bx = B.apply(x.samples);
    const cvec ciu = chol.solve(u);
    const cvec cib = chol.solve(bx);

    // tr(C^{-1} P^H C^{-1} P) = ||L^{-1} P L^{-H}||_F^2 with P = B H^H,
    // accumulated column by column through banded solves.
    double tr = 0.0;
    cvec ek = cvec::Zero(N);
    for (Eigen::Index k = 0; k < N; ++k) {
        ek[k] = 1.0;
        const cvec w = chol.solve_upper(ek);
        const cvec v = chol.solve_lower(B.apply(H.apply_adjoint(w)));
        tr += v.squaredNorm();
        ek[k] = 0.0;
    }

    FisherMatrix fim;
    fim.gamma = cmat(2, 2);
    fim.gamma(0, 0) = u.dot(ciu).real();
    fim.gamma(0, 1) = h * u.dot(cib);
    fim.gamma(1, 0) = std::conj(fim.gamma(0, 1));
    fim.gamma(1, 1) = std::norm(h) * bx.dot(cib).real() + a2 * a2 * tr;
    return fim;
}

/// CRB_h = G22/|G|, CRB_theta = G11/|G| for the 2x2 case; trace(Gamma^{-1})
/// in general.
inline CrbResult crb_exact(const FisherMatrix& fim) {
    const cmat& G = fim.gamma;
    if (G.rows() != 2) throw domain_error("crb_exact: expects the 2x2 (h, theta) FIM");
    const double det = (G(0, 0) * G(1, 1) - G(0, 1) * G(1, 0)).real();
    if (!(det > 0.0)) throw numerical_error("crb_exact: singular Fisher information");
    CrbResult r;
    r.crb_h = G(1, 1).real() / det;
    r.crb_theta = G(0, 0).real() / det;
    r.trace = r.crb_h + r.crb_theta;
    return r;
}

/// Diagonal of the inverse FIM (per-parameter CRBs) for the larger models.
inline rvec crb_diagonal(const FisherMatrix& fim) {
    const cmat inv = fim.gamma.inverse();
    return inv.diagonal().real();
}

/// Szego symbol values at one frequency: t = 1/(1 - theta e^{j lambda}),
/// g = dt/dtheta, p = Re[t^* g], and the training-power constant A.
struct SpectralSymbols {
    double lambda = 0.0;
    cplx t{0.0};
    cplx g{0.0};
    double p = 0.0;
    double A = 0.0;
};

inline SpectralSymbols spectral_symbols(cplx theta, double lambda, double P_s) {
    if (std::abs(theta) >= 1.0) throw domain_error("spectral_symbols: |theta| >= 1");
    SpectralSymbols s;
    s.lambda = lambda;
    const cplx e = std::exp(j1i * lambda);
    const cplx den = cplx(1.0) - theta * e;
    s.t = cplx(1.0) / den;
    s.g = e / (den * den);
    s.p = (std::conj(s.t) * s.g).real();
    const double m = std::abs(theta);
    s.A = 1.0 / (P_s * (m + 1.0) * std::abs(m - 1.0));
    return s;
}

/// The Gamma_22 trace integrand (1/2pi) int 1/(z (alpha^2 + z)^2) dlambda,
/// z = |1 - theta e^{j lambda}|^2, both numerically integrated and in the
/// large-alpha closed form alpha^{-4}/((|theta|+1)||theta|-1|).
struct TraceIntegral {
    double quadrature = 0.0;
    double closed_form = 0.0;
    bool low_alpha_regime = false;  ///< flagged when alpha^2 < 10
};

inline TraceIntegral rsi_trace_integral(cplx theta, double alpha) {
    if (std::abs(theta) >= 1.0) throw domain_error("rsi_trace_integral: |theta| >= 1");
    const double a2 = alpha * alpha;
    TraceIntegral out;
    out.low_alpha_regime = a2 < 10.0;
    out.quadrature = integrate_periodic([&](double lambda) {
        const double z = std::norm(cplx(1.0) - theta * std::exp(j1i * lambda));
        return 1.0 / (z * (a2 + z) * (a2 + z));
    });
    const double m = std::abs(theta);
    out.closed_form = 1.0 / (a2 * a2 * (m + 1.0) * std::abs(m - 1.0));
    return out;
}

enum class TraceTerm { closed_form, quadrature };

struct AsymptoticNoise {
    double var_r = 1.0;
    double var_rd = 1.0;
    double var_d = 1.0;
};

namespace detail {

struct AsymParts {
    double c = 0.0;       // noise symbol a^2 |t|^2 + sigma_d^2
    double denom = 0.0;   // |h|^2 |t|^2 |g|^2 + A |t|^2 c - |h|^2 p^2
    double t2 = 0.0;
    double g2 = 0.0;
    double A = 0.0;
};

inline AsymParts asym_parts(cplx h, cplx theta, double alpha, double P_s, double lambda,
                            TraceTerm mode, const AsymptoticNoise& nv) {
    const SpectralSymbols s = spectral_symbols(theta, lambda, P_s);
    const double a2 = alpha * alpha * nv.var_rd * nv.var_r;
    AsymParts out;
    out.t2 = std::norm(s.t);
    out.g2 = std::norm(s.g);
    out.c = a2 * out.t2 + nv.var_d;
    double A = s.A;
    if (mode == TraceTerm::quadrature) {
        const double iq = integrate_periodic([&](double l) {
            const SpectralSymbols q = spectral_symbols(theta, l, P_s);
            const double cq = a2 * std::norm(q.t) + nv.var_d;
            return std::norm(q.g) * std::norm(q.t) / (cq * cq);
        });
        A = a2 * a2 * iq / P_s;
    }
    out.A = A;
    out.denom = std::norm(h) * out.t2 * out.g2 + A * out.t2 * out.c - std::norm(h) * s.p * s.p;
    return out;
}

} // namespace detail

/// Closed-form asymptotic CRB of theta for sinusoidal training at frequency
/// lambda: F(lambda)/||x||^2 with F = |t|^2 c / (|h|^2|t|^2|g|^2 + A|t|^2 c
/// - |h|^2 p^2). Unit noise variances reproduce the printed form.
inline double crb_theta_asymptotic(cplx h, cplx theta, double alpha, double P_s, double lambda,
                                   double x_norm_sq, TraceTerm mode = TraceTerm::closed_form,
                                   const AsymptoticNoise& nv = {}) {
    const auto parts = detail::asym_parts(h, theta, alpha, P_s, lambda, mode, nv);
    return parts.t2 * parts.c / parts.denom / x_norm_sq;
}

/// Asymptotic CRB of h: (|h|^2 |g|^2 c + A c^2) / denom / ||x||^2.
inline double crb_h_asymptotic(cplx h, cplx theta, double alpha, double P_s, double lambda,
                               double x_norm_sq, TraceTerm mode = TraceTerm::closed_form,
                               const AsymptoticNoise& nv = {}) {
    const auto parts = detail::asym_parts(h, theta, alpha, P_s, lambda, mode, nv);
    return (std::norm(h) * parts.g2 * parts.c + parts.A * parts.c * parts.c) / parts.denom /
           x_norm_sq;
}

} // namespace fdrelay
