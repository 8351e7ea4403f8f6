#include <catch2/catch_amalgamated.hpp>

#include "fdrelay/equalizer.hpp"
#include "support/oracles.hpp"

using namespace fdrelay;

namespace {

SystemParams fig6_params() {
    SystemParams p;
    p.P_s = db_to_linear(15.0);
    p.P_r = db_to_linear(30.0);
    p.var_rr = db_to_linear(-10.0);
    p.N = 140;
    p.L = 3;
    return p;
}

cvec transmit(const std::vector<int>& sym, const IsiChannel& chan, double amp) {
    const Eigen::Index n = sym.size();
    const auto& pts = constellation_points(chan.constellation);
    cvec x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = amp * pts[sym[i]];
    const cvec full = convolve(chan.taps, x);
    return full.head(n);
}

std::vector<int> brute_force_ml(const cvec& y, const IsiChannel& chan, double amp) {
    const auto& pts = constellation_points(chan.constellation);
    const int q = static_cast<int>(pts.size());
    const Eigen::Index n = y.size();
    std::vector<int> best(n, 0), cur(n, 0);
    double dbest = std::numeric_limits<double>::infinity();
    const long total = static_cast<long>(std::pow(q, n));
    for (long code = 0; code < total; ++code) {
        long c = code;
        for (Eigen::Index i = 0; i < n; ++i) {
            cur[i] = static_cast<int>(c % q);
            c /= q;
        }
        const double d = (y - transmit(cur, chan, amp)).squaredNorm();
        if (d < dbest) {
            dbest = d;
            best = cur;
        }
    }
    return best;
}

} // namespace

TEST_CASE("viterbi equals brute-force ML on short blocks", "[equalizer][oracle]") {
    Rng rng(91);
    for (int rep = 0; rep < 6; ++rep) {
        const Eigen::Index n = 12;
        IsiChannel chan;
        chan.taps = cvec(3);
        chan.taps << rng.gaussian_c(), 0.6 * rng.gaussian_c(), 0.3 * rng.gaussian_c();
        const double amp = 1.3;
        std::vector<int> tx(n);
        for (auto& s : tx) s = static_cast<int>(rng.u64() & 1);
        cvec y = transmit(tx, chan, amp);
        for (Eigen::Index i = 0; i < n; ++i) y[i] += 0.8 * rng.gaussian_c();
        const auto got = viterbi_detect(y, chan, amp);
        const auto want = brute_force_ml(y, chan, amp);
        // compare metrics, not labels, in case of exact ties
        REQUIRE((y - transmit(got, chan, amp)).squaredNorm() ==
                Catch::Approx((y - transmit(want, chan, amp)).squaredNorm()).epsilon(1e-12));
    }
}

TEST_CASE("viterbi noiseless recovery and memoryless reduction", "[equalizer]") {
    Rng rng(92);
    SECTION("noiseless BPSK is error-free") {
        IsiChannel chan;
        chan.taps = cvec(3);
        chan.taps << cplx(0.9, 0.4), cplx(0.5, -0.3), cplx(0.2, 0.1);
        std::vector<int> tx(200);
        for (auto& s : tx) s = static_cast<int>(rng.u64() & 1);
        const cvec y = transmit(tx, chan, 1.0);
        REQUIRE(viterbi_detect(y, chan, 1.0) == tx);
    }
    SECTION("theta = 0 reduces to nearest-neighbor detection") {
        const cplx h(0.8, -0.6);
        IsiChannel chan = IsiChannel::from_estimate(h, cplx(0.0), 1);
        std::vector<int> tx(300);
        for (auto& s : tx) s = static_cast<int>(rng.u64() & 1);
        cvec y = transmit(tx, chan, 1.0);
        for (auto& v : y) v += 0.7 * rng.gaussian_c();
        REQUIRE(viterbi_detect(y, chan, 1.0) == mf_detect(y, h, 1.0));
    }
    SECTION("QPSK supported, larger alphabets rejected") {
        IsiChannel chan;
        chan.taps = cvec(2);
        chan.taps << cplx(1.0), cplx(0.4, 0.2);
        chan.constellation = Constellation::qpsk;
        std::vector<int> tx(64);
        for (auto& s : tx) s = static_cast<int>(rng.u64() % 4);
        const cvec y = transmit(tx, chan, 1.0);
        REQUIRE(viterbi_detect(y, chan, 1.0) == tx);
        IsiChannel big;
        big.taps = cvec::Ones(7);
        REQUIRE_THROWS_AS(viterbi_detect(y, big, 1.0), domain_error);
    }
}

TEST_CASE("colored-noise viterbi equals brute force on its whitened metric", "[equalizer][oracle]") {
    SystemParams p = fig6_params();
    p.N = 12;
    const double alpha = compute_alpha(p);
    Rng rng(93);
    const auto r = draw_realization(p, rng);
    std::vector<int> tx(p.N);
    for (auto& s : tx) s = static_cast<int>(rng.u64() & 1);
    const double amp = std::sqrt(p.P_s);
    TrainingSequence xdata;
    xdata.symbol_power = p.P_s;
    xdata.samples.resize(p.N);
    for (Eigen::Index i = 0; i < p.N; ++i)
        xdata.samples[i] = amp * constellation_points(Constellation::bpsk)[tx[i]];
    const ReceivedBlock blk = simulate_block(p, r, xdata, rng);

    const auto got = viterbi_detect_colored(blk.y, r.h, r.theta, alpha, p, amp);
    const WhitenedTrellisInput in = whiten_for_trellis(blk.y, r.h, r.theta, alpha, p);
    const auto want = brute_force_ml(in.block, in.channel, amp);
    REQUIRE((in.block - transmit(got, in.channel, amp)).squaredNorm() ==
            Catch::Approx((in.block - transmit(want, in.channel, amp)).squaredNorm())
                .epsilon(1e-12));
}

TEST_CASE("matched filter", "[equalizer]") {
    Rng rng(94);
    const cplx h(1.1, -0.7);
    SECTION("noiseless memoryless recovery and positive-scaling invariance") {
        IsiChannel chan = IsiChannel::from_estimate(h, cplx(0.0), 1);
        std::vector<int> tx(100);
        for (auto& s : tx) s = static_cast<int>(rng.u64() & 1);
        cvec y = transmit(tx, chan, 2.0);
        REQUIRE(mf_detect(y, h, 2.0) == tx);
        for (auto& v : y) v += 0.5 * rng.gaussian_c();
        REQUIRE(mf_detect(3.7 * y, h, 2.0) == mf_detect(y, h, 2.0));
        REQUIRE_THROWS_AS(mf_detect(y, cplx(0.0), 1.0), domain_error);
    }
}

TEST_CASE("whitener", "[equalizer]") {
    SystemParams p = fig6_params();
    p.N = 48;
    const double alpha = compute_alpha(p);

    SECTION("theta = 0 is a scalar normalization") {
        const Whitener w(cplx(0.0), alpha, p, p.N);
        Rng rng(95);
        const cvec y = rng.gaussian_cvec(p.N);
        const double s = std::sqrt(alpha * alpha * p.var_rd * p.var_nr + p.var_nd);
        REQUIRE((w.apply(y) - y / s).norm() < 1e-12);
    }

    SECTION("whiten then unwhiten is the identity") {
        const Whitener w(cplx(0.35, -0.2), alpha, p, p.N);
        Rng rng(96);
        const cvec y = rng.gaussian_cvec(p.N);
        REQUIRE((w.unapply(w.apply(y)) - y).norm() < 1e-10 * y.norm());
    }

    SECTION("whitened pure noise has identity covariance") {
        const cplx theta(0.5, 0.3);
        const Whitener w(theta, alpha, p, p.N);
        const BandedToeplitz H = build_h_theta(theta, p.L, p.N);
        Rng rng(97);
        cmat emp = cmat::Zero(p.N, p.N);
        const int trials = 25000;
        for (int t = 0; t < trials; ++t) {
            // draw from the marginal model: d ~ CN(0, alpha^2 var_rd)
            const cplx dm = alpha * rng.gaussian_c(p.var_rd);
            cvec noise = dm * H.apply(rng.gaussian_cvec(p.N, p.var_nr));
            for (Eigen::Index i = 0; i < p.N; ++i) noise[i] += rng.gaussian_c(p.var_nd);
            const cvec z = w.apply(noise);
            emp += z * z.adjoint();
        }
        emp /= static_cast<double>(trials);
        REQUIRE(oracle::rel_frobenius(emp, cmat::Identity(p.N, p.N)) < 0.08);
    }
}

TEST_CASE("wilson interval", "[equalizer]") {
    const WilsonInterval w = wilson_interval(10, 1000);
    REQUIRE(w.rate == Catch::Approx(0.01));
    REQUIRE(w.lo < 0.01);
    REQUIRE(w.hi > 0.01);
    REQUIRE(w.lo > 0.0);
    const WilsonInterval z = wilson_interval(0, 1000);
    REQUIRE(z.lo == 0.0);
    REQUIRE(z.hi > 0.0);
}

TEST_CASE("ber_experiment", "[equalizer]") {
    SECTION("zero noise gives zero errors") {
        SystemParams p = fig6_params();
        p.var_nr = 0.0;
        p.var_nd = 0.0;
        const BerResult r = ber_experiment(p, Detector::viterbi, 5, 123, CsiMode::genie);
        REQUIRE(r.errors == 0);
    }
    SECTION("detector ordering at moderate scale") {
        SystemParams p = fig6_params();
        const int trials = 1200;  // ~1.7e5 symbols; the full run is in acceptance
        const BerResult vit = ber_experiment(p, Detector::viterbi, trials, 7001, CsiMode::genie);
        const BerResult wmf = ber_experiment(p, Detector::whitened_mf, trials, 7001, CsiMode::genie);
        const BerResult mf = ber_experiment(p, Detector::mf, trials, 7001, CsiMode::genie);
        REQUIRE(vit.wilson.rate < wmf.wilson.rate);
        REQUIRE(wmf.wilson.rate < mf.wilson.rate);
    }
    SECTION("genie CSI no worse than estimated CSI") {
        SystemParams p = fig6_params();
        const int trials = 300;
        const BerResult genie = ber_experiment(p, Detector::viterbi, trials, 7002, CsiMode::genie);
        const BerResult est = ber_experiment(p, Detector::viterbi, trials, 7002, CsiMode::estimated);
        const double slack = 2.0 * (genie.wilson.hi - genie.wilson.lo);
        REQUIRE(genie.wilson.rate <= est.wilson.rate + slack);
    }
}
