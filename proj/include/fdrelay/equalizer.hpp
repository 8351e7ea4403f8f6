#pragma once

#include <vector>

#include "fdrelay/banded.hpp"
#include "fdrelay/estimator.hpp"
#include "fdrelay/model.hpp"

namespace fdrelay {

enum class Constellation { bpsk, qpsk };

inline const std::vector<cplx>& constellation_points(Constellation c) {
    static const std::vector<cplx> bpsk{cplx(1.0), cplx(-1.0)};
    static const std::vector<cplx> qpsk{cplx(M_SQRT1_2, M_SQRT1_2), cplx(-M_SQRT1_2, M_SQRT1_2),
                                        cplx(-M_SQRT1_2, -M_SQRT1_2), cplx(M_SQRT1_2, -M_SQRT1_2)};
    return c == Constellation::bpsk ? bpsk : qpsk;
}

/// The end-to-end ISI channel seen by the data detector: taps [h, h theta,
/// ..., h theta^{L-1}] scaled by the per-symbol amplitude.
struct IsiChannel {
    cvec taps;
    Constellation constellation = Constellation::bpsk;

    static IsiChannel from_estimate(cplx h, cplx theta, Eigen::Index L,
                                    Constellation c = Constellation::bpsk) {
        IsiChannel ch;
        ch.taps = h * theta_taps(theta, L);
        ch.constellation = c;
        return ch;
    }
};

namespace detail {

inline int nearest_symbol(cplx v, const std::vector<cplx>& pts) {
    int best = 0;
    double dbest = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
        const double d = std::norm(v - pts[i]);
        if (d < dbest) {
            dbest = d;
            best = i;
        }
    }
    return best;
}

} // namespace detail

enum class NoiseMode { white, whitened };

/// Exact minimization of sum_n |y[n] - sum_k c_k a s[n-k]|^2 over the
/// |A|^{L-1}-state trellis (s[n] = 0 before the block, matching the guard
/// structure); this is ML sequence detection when the block noise is white.
/// `amplitude` is the per-symbol scale of the transmitted constellation.
inline std::vector<int> viterbi_detect(const cvec& y, const IsiChannel& chan, double amplitude) {
    const auto& pts = constellation_points(chan.constellation);
    const int q = static_cast<int>(pts.size());
    const Eigen::Index L = chan.taps.size();
    if (L > 6) throw domain_error("viterbi_detect: L > 6 unsupported (state blow-up)");
    const Eigen::Index n = y.size();
    if (n == 0) return {};
    const int n_states = static_cast<int>(std::pow(q, L - 1));

    // branch signal for (state, input): state encodes s[n-1..n-L+1], most
    // recent symbol in the lowest digit
    std::vector<double> metric(n_states, std::numeric_limits<double>::infinity());
    std::vector<double> next_metric(n_states);
    std::vector<std::vector<int>> backptr(n, std::vector<int>(n_states, -1));
    metric[0] = 0.0;  // all-zero (pre-block) history maps to state 0 with the
                      // early branch metrics computed on the truncated taps

    // first L-1 steps: history may contain pre-block zeros, so enumerate
    // explicitly by restricting predecessors to states whose older digits are
    // consistent with zeros (handled by starting all mass at state 0 and
    // letting the taps beyond the current time contribute nothing)
    std::vector<double> m_cur = std::move(metric);
    for (Eigen::Index t = 0; t < n; ++t) {
        std::fill(next_metric.begin(), next_metric.end(),
                  std::numeric_limits<double>::infinity());
        for (int st = 0; st < n_states; ++st) {
            if (!std::isfinite(m_cur[st])) continue;
            for (int in = 0; in < q; ++in) {
                cplx sig = chan.taps[0] * amplitude * pts[in];
                int digits = st;
                for (Eigen::Index k = 1; k < L; ++k) {
                    if (t - k >= 0) {
                        sig += chan.taps[k] * amplitude * pts[digits % q];
                    }
                    digits /= q;
                }
                const double bm = m_cur[st] + std::norm(y[t] - sig);
                const int nxt = (st * q + in) % n_states;
                if (bm < next_metric[nxt]) {
                    next_metric[nxt] = bm;
                    backptr[t][nxt] = st * q + in;
                }
            }
        }
        std::swap(m_cur, next_metric);
    }

    int best_state = 0;
    for (int st = 1; st < n_states; ++st)
        if (m_cur[st] < m_cur[best_state]) best_state = st;

    std::vector<int> symbols(n);
    int st = best_state;
    for (Eigen::Index t = n - 1; t >= 0; --t) {
        const int code = backptr[t][st];
        symbols[t] = code % q;
        st = code / q;
        if (t == 0) break;
    }
    return symbols;
}

/// Matched-filter detection: per-symbol nearest neighbor of h^* y[n]; the ISI
/// is treated as noise.
inline std::vector<int> mf_detect(const cvec& y, cplx h, double amplitude,
                                  Constellation c = Constellation::bpsk) {
    if (h == cplx(0.0)) throw domain_error("mf_detect: h must be nonzero");
    const auto& pts = constellation_points(c);
    std::vector<int> out(y.size());
    const double scale = std::norm(h) * amplitude;
    for (Eigen::Index i = 0; i < y.size(); ++i)
        out[i] = detail::nearest_symbol(std::conj(h) * y[i] / scale, pts);
    return out;
}

/// Noise whitener from the banded Cholesky factor of C(theta):
/// apply() returns W y with W C W^H = I, unapply() inverts it.
class Whitener {
public:
    Whitener(cplx theta, double alpha, const SystemParams& p, Eigen::Index N)
        : chol_(covariance(theta, alpha, p, N, p.L)) {}

    cvec apply(const cvec& y) const { return chol_.solve_lower(y); }
    cvec unapply(const cvec& z) const { return chol_.apply_factor(z); }

    const BandedCholesky& factor() const { return chol_; }

private:
    BandedCholesky chol_;
};

inline cvec whiten(const cvec& y, cplx theta, double alpha, const SystemParams& p) {
    return Whitener(theta, alpha, p, y.size()).apply(y);
}

/// Whitened matched filter: whiten the block, then per-symbol decisions on
/// the diagonal of the whitened effective channel (real positive diagonal
/// scaling of h, so PSK decisions use conj(h) exactly as mf_detect).
inline std::vector<int> whitened_mf_detect(const cvec& y, cplx h, cplx theta, double alpha,
                                           const SystemParams& p, double amplitude,
                                           Constellation c = Constellation::bpsk) {
    const Whitener w(theta, alpha, p, y.size());
    const cvec z = w.apply(y);
    return mf_detect(z, h, amplitude, c);
}

/// Colored-noise sequence detection. Prefiltering by the RSI-inverse FIR
/// D = [1, -theta] turns the signal convolution into D H_theta, whose taps
/// are exactly [1, 0, ..., 0, -theta^L], and the noise covariance into the
/// banded matrix
///   M = a^2 (DH)(DH)^H + sigma_d^2 D D^H,  a^2 = alpha^2 sigma_rd^2 sigma_r^2,
/// whose banded Cholesky whitens it, so the trellis metric equals the true
/// colored-noise metric (y - h H s)^H C^{-1} (y - h H s) up to the truncation
/// of the whitened response at the trellis memory. Exact whitening of the raw
/// block cannot keep a finite trellis (the inverse of a banded Cholesky
/// factor is dense).
struct WhitenedTrellisInput {
    cvec block;         ///< prefiltered and whitened observations
    IsiChannel channel; ///< truncated whitened effective response
};

inline WhitenedTrellisInput whiten_for_trellis(const cvec& y, cplx h, cplx theta, double alpha,
                                               const SystemParams& p,
                                               Constellation c = Constellation::bpsk) {
    const Eigen::Index n = y.size();
    cvec prefilter_taps(2);
    prefilter_taps << cplx(1.0), -theta;
    cvec signal_taps = cvec::Zero(p.L + 1);  // D H_theta = I - theta^L S^L
    signal_taps[0] = 1.0;
    signal_taps[p.L] = -std::pow(theta, static_cast<double>(p.L));
    const double a2 = alpha * alpha * p.var_rd * p.var_nr;

    BandedHermitian M(n, p.L);
    M.accumulate_gram(signal_taps, a2);
    M.accumulate_gram(prefilter_taps, p.var_nd);
    const BandedCholesky chol(M);

    cvec u(n);
    u[0] = y[0];
    for (Eigen::Index i = 1; i < n; ++i) u[i] = y[i] - theta * y[i - 1];

    // steady-state whitened response of the prefiltered signal taps
    const Eigen::Index k_eff = std::min<Eigen::Index>({6, n, p.L + 3});
    const Eigen::Index j0 = std::max<Eigen::Index>(0, std::min(n / 2, n - k_eff));
    cvec e = cvec::Zero(n);
    for (Eigen::Index k = 0; k <= p.L && j0 + k < n; ++k) e[j0 + k] = signal_taps[k];
    const cvec col = chol.solve_lower(e);

    WhitenedTrellisInput out;
    out.block = chol.solve_lower(u);
    out.channel.constellation = c;
    out.channel.taps = h * col.segment(j0, k_eff);
    return out;
}

inline std::vector<int> viterbi_detect_colored(const cvec& y, cplx h, cplx theta, double alpha,
                                               const SystemParams& p, double amplitude,
                                               Constellation c = Constellation::bpsk) {
    if (alpha * alpha * p.var_rd * p.var_nr + p.var_nd <= 0.0) {
        // noiseless degenerate case: the white metric already recovers exactly
        return viterbi_detect(y, IsiChannel::from_estimate(h, theta, p.L, c), amplitude);
    }
    const WhitenedTrellisInput in = whiten_for_trellis(y, h, theta, alpha, p, c);
    return viterbi_detect(in.block, in.channel, amplitude);
}

struct WilsonInterval {
    double rate = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

inline WilsonInterval wilson_interval(std::int64_t errors, std::int64_t total, double z = 1.96) {
    WilsonInterval w;
    if (total == 0) return w;
    const double p = static_cast<double>(errors) / total;
    const double z2n = z * z / total;
    const double denom = 1.0 + z2n;
    w.rate = p;
    const double center = (p + 0.5 * z2n) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / total + 0.25 * z2n / total) / denom;
    w.lo = std::max(0.0, center - half);
    w.hi = std::min(1.0, center + half);
    return w;
}

enum class Detector { viterbi, viterbi_white, whitened_mf, mf };
enum class CsiMode { genie, estimated };

struct BerResult {
    WilsonInterval wilson;
    std::int64_t errors = 0;
    std::int64_t symbols = 0;
};

/// Monte-Carlo BER over random data blocks. Each trial draws a channel,
/// optionally estimates (h, theta) from a Bernoulli training block, then
/// detects one BPSK data block of length N through the chosen detector.
inline BerResult ber_experiment(const SystemParams& p, Detector det, int trials,
                                std::uint64_t seed, CsiMode csi = CsiMode::estimated) {
    if (trials < 1) throw domain_error("ber_experiment: trials >= 1");
    const double alpha = compute_alpha(p);
    const auto& pts = constellation_points(Constellation::bpsk);
    const double amp = std::sqrt(p.P_s);

    BerResult out;
    for (int t = 0; t < trials; ++t) {
        Rng rng = Rng::stream(seed, 0xBE5, t);
        const ChannelRealization r = draw_realization(p, rng);

        cplx h_hat = r.h, theta_hat = r.theta;
        if (csi == CsiMode::estimated) {
            const TrainingSequence xtrain = make_bernoulli(p.N, p.P_s, rng);
            LikelihoodContext ctx{xtrain, simulate_block(p, r, xtrain, rng).y, p, alpha};
            const EstimateResult est = bfgs_estimate(ctx);
            h_hat = est.h_hat;
            theta_hat = est.theta_hat;
        }

        // data block
        std::vector<int> tx(p.N);
        TrainingSequence xdata;
        xdata.symbol_power = p.P_s;
        xdata.samples.resize(p.N);
        for (Eigen::Index i = 0; i < p.N; ++i) {
            tx[i] = static_cast<int>(rng.u64() & 1);
            xdata.samples[i] = amp * pts[tx[i]];
        }
        const ReceivedBlock blk = simulate_block(p, r, xdata, rng);

        std::vector<int> rx;
        switch (det) {
            case Detector::viterbi:
                rx = viterbi_detect_colored(blk.y, h_hat, theta_hat, alpha, p, amp);
                break;
            case Detector::viterbi_white: {
                const IsiChannel chan = IsiChannel::from_estimate(h_hat, theta_hat, p.L);
                rx = viterbi_detect(blk.y, chan, amp);
                break;
            }
            case Detector::whitened_mf:
                rx = whitened_mf_detect(blk.y, h_hat, theta_hat, alpha, p, amp);
                break;
            case Detector::mf:
                rx = mf_detect(blk.y, h_hat, amp);
                break;
        }
        for (Eigen::Index i = 0; i < p.N; ++i)
            if (rx[i] != tx[i]) ++out.errors;
        out.symbols += p.N;
    }
    out.wilson = wilson_interval(out.errors, out.symbols);
    return out;
}

} // namespace fdrelay
