#pragma once

#include <cstdint>

#include "fdrelay/common.hpp"
#include "fdrelay/rng.hpp"
#include "fdrelay/toeplitz.hpp"

namespace fdrelay {

/// System-level constants: powers and variances are linear (dB conversions
/// happen at the CLI boundary only).
struct SystemParams {
    double P_s = 1.0;      ///< source transmit power (incorporates path loss)
    double P_r = 1.0;      ///< maximum relay transmit power
    double var_sr = 1.0;   ///< source-relay channel variance
    double var_rd = 1.0;   ///< relay-destination channel variance
    double var_rr = 0.0;   ///< residual self-interference channel variance
    double var_nr = 1.0;   ///< relay noise variance
    double var_nd = 1.0;   ///< destination noise variance
    Eigen::Index N = 140;  ///< training/block length
    Eigen::Index L = 3;    ///< effective channel length (taps)
    Eigen::Index m = 1;    ///< relay processing delay in symbol intervals
    double energy_fraction = 0.99;

    /// Noise variances may be zero so that the exact noiseless identities are
    /// testable; estimation requires a positive-definite covariance and will
    /// reject a fully noiseless setup on its own.
    void validate() const {
        if (P_s <= 0 || P_r <= 0 || var_sr <= 0 || var_rd <= 0)
            throw domain_error("SystemParams: powers and channel variances must be positive");
        if (var_rr < 0 || var_nr < 0 || var_nd < 0)
            throw domain_error("SystemParams: variances must be >= 0");
        if (L < 1 || N <= L) throw domain_error("SystemParams: need N > L >= 1");
        if (m < 1) throw domain_error("SystemParams: need m >= 1");
    }
};

/// alpha^2 = P_r / (P_s + P_r sigma_rr^2 + sigma_r^2). Guarantees the
/// long-term stability condition alpha^2 sigma_rr^2 < 1.
inline double compute_alpha(const SystemParams& p) {
    if (p.P_r <= 0) throw domain_error("compute_alpha: P_r must be positive");
    const double denom = p.P_s + p.P_r * p.var_rr + p.var_nr;
    if (denom <= 0) throw domain_error("compute_alpha: non-positive denominator");
    return std::sqrt(p.P_r / denom);
}

/// One block's channel draw with the derived compound parameters.
struct ChannelRealization {
    cplx h_sr{0.0};
    cplx h_rd{0.0};
    cplx h_rr{0.0};
    double alpha = 1.0;
    cplx h{0.0};      ///< alpha * h_sr * h_rd
    cplx theta{0.0};  ///< alpha * h_rr
    cplx d{0.0};      ///< alpha * h_rd

    static ChannelRealization from_links(cplx h_sr, cplx h_rd, cplx h_rr, double alpha) {
        ChannelRealization r;
        r.h_sr = h_sr;
        r.h_rd = h_rd;
        r.h_rr = h_rr;
        r.alpha = alpha;
        r.h = alpha * h_sr * h_rd;
        r.theta = alpha * h_rr;
        r.d = alpha * h_rd;
        return r;
    }

    bool stable() const { return std::abs(theta) < 1.0; }
};

/// Draw link gains from CN(0, var); realizations with alpha^2 |h_rr|^2 >= 1
/// are rejected and redrawn so the simulation stays in the analyzed regime.
/// `rejections`, when given, counts the discarded draws.
inline ChannelRealization draw_realization(const SystemParams& p, Rng& rng,
                                           std::uint64_t* rejections = nullptr) {
    const double alpha = compute_alpha(p);
    for (;;) {
        const cplx h_sr = rng.gaussian_c(p.var_sr);
        const cplx h_rd = rng.gaussian_c(p.var_rd);
        const cplx h_rr = p.var_rr > 0 ? rng.gaussian_c(p.var_rr) : cplx(0.0);
        auto r = ChannelRealization::from_links(h_sr, h_rd, h_rr, alpha);
        if (r.stable()) return r;
        if (rejections) ++(*rejections);
    }
}

/// Average relay transmit power alpha^2 (P_s |h_sr|^2 + sigma_r^2) /
/// (1 - alpha^2 |h_rr|^2); used for the stability check E[t_r t_r^*] <= P_r.
inline double relay_average_power(const SystemParams& p, const ChannelRealization& r) {
    const double loop = r.alpha * r.alpha * std::norm(r.h_rr);
    if (loop >= 1.0) throw domain_error("relay_average_power: unstable realization");
    return r.alpha * r.alpha * (p.P_s * std::norm(r.h_sr) + p.var_nr) / (1.0 - loop);
}

/// Smallest L with sum_{k<L} |theta|^{2k} >= fraction * sum_{k<inf}.
inline Eigen::Index effective_length(double theta_mag, double energy_fraction) {
    if (theta_mag < 0 || theta_mag >= 1) throw domain_error("effective_length: need 0 <= |theta| < 1");
    if (theta_mag == 0.0) return 1;
    const double r = theta_mag * theta_mag;
    double partial = 0.0, pw = 1.0;
    const double total = 1.0 / (1.0 - r);
    for (Eigen::Index L = 1;; ++L) {
        partial += pw;
        pw *= r;
        if (partial >= energy_fraction * total) return L;
    }
}

/// Geometric tap vector [1, theta, ..., theta^{L-1}], optionally interleaved
/// with m-1 zeros between taps (relay delay of m symbol intervals).
inline cvec theta_taps(cplx theta, Eigen::Index L, Eigen::Index m = 1) {
    cvec taps = cvec::Zero((L - 1) * m + 1);
    cplx pw(1.0);
    for (Eigen::Index k = 0; k < L; ++k) {
        taps[k * m] = pw;
        pw *= theta;
    }
    return taps;
}

/// Taps of B_theta = dH_theta/dtheta: [0, 1, 2 theta, ..., (L-1) theta^{L-2}].
inline cvec theta_derivative_taps(cplx theta, Eigen::Index L, Eigen::Index m = 1) {
    cvec taps = cvec::Zero((L - 1) * m + 1);
    cplx pw(1.0);
    for (Eigen::Index k = 1; k < L; ++k) {
        taps[k * m] = static_cast<double>(k) * pw;
        pw *= theta;
    }
    return taps;
}

/// Lower-triangular banded Toeplitz H_theta with first column
/// [1, theta, ..., theta^{L-1}, 0, ...].
inline BandedToeplitz build_h_theta(cplx theta, Eigen::Index L, Eigen::Index N,
                                    Eigen::Index m = 1) {
    if (N < (L - 1) * m + 1) throw domain_error("build_h_theta: N too small for L, m");
    return BandedToeplitz::lower(theta_taps(theta, L, m), N);
}

/// Deterministic training sequence with a declared per-symbol power budget:
/// the samples satisfy ||x||^2 = N * P_s.
struct TrainingSequence {
    cvec samples;
    double symbol_power = 1.0;

    Eigen::Index size() const { return samples.size(); }
    double norm_sq() const { return samples.squaredNorm(); }

    void validate() const {
        const double target = static_cast<double>(samples.size()) * symbol_power;
        if (std::abs(norm_sq() - target) > 1e-9 * target)
            throw domain_error("TrainingSequence: ||x||^2 != N * P_s");
    }
};

/// Constant-modulus complex exponential x[k] = sqrt(P_s) e^{-j lambda k}:
/// the asymptotic eigenvector of a banded lower Toeplitz operator with taps
/// t_k for the eigenvalue t(lambda) = sum_k t_k e^{j lambda k}, so a sequence
/// at the designed frequency probes the symbol functions exactly where the
/// closed-form CRBs evaluate them.
inline TrainingSequence make_sinusoid(double lambda, Eigen::Index N, double P_s) {
    if (N < 1) throw domain_error("make_sinusoid: N >= 1 required");
    TrainingSequence x;
    x.symbol_power = P_s;
    x.samples.resize(N);
    const double a = std::sqrt(P_s);
    for (Eigen::Index k = 0; k < N; ++k)
        x.samples[k] = a * std::exp(-j1i * (lambda * static_cast<double>(k)));
    return x;
}

/// i.i.d. +/- sqrt(P_s) sequence (the random baseline of the experiments).
inline TrainingSequence make_bernoulli(Eigen::Index N, double P_s, Rng& rng) {
    TrainingSequence x;
    x.symbol_power = P_s;
    x.samples.resize(N);
    const double a = std::sqrt(P_s);
    for (Eigen::Index k = 0; k < N; ++k) x.samples[k] = (rng.u64() & 1) ? a : -a;
    return x;
}

struct ReceivedBlock {
    cvec y;
    std::uint64_t seed = 0;
    std::uint64_t trial = 0;
};

/// One observed training block y = h H_theta x + d H_theta n_r + n_d.
/// The guard time of the block structure never reaches the destination
/// samples kept here: the relay idles for L symbols between blocks, so the
/// N retained samples depend only on this block's x and noise.
inline ReceivedBlock simulate_block(const SystemParams& p, const ChannelRealization& r,
                                    const TrainingSequence& x, Rng& rng) {
    p.validate();
    x.validate();
    if (x.size() != p.N) throw domain_error("simulate_block: training length != N");
    if (!r.stable()) throw domain_error("simulate_block: unstable realization");

    const BandedToeplitz H = build_h_theta(r.theta, p.L, p.N, p.m);
    const cvec n_r = rng.gaussian_cvec(p.N, p.var_nr);
    ReceivedBlock blk;
    blk.y = r.h * H.apply(x.samples) + r.d * H.apply(n_r);
    for (Eigen::Index i = 0; i < p.N; ++i) blk.y[i] += rng.gaussian_c(p.var_nd);
    return blk;
}

} // namespace fdrelay
