#include <catch2/catch_amalgamated.hpp>

#include "fdrelay/banded.hpp"
#include "fdrelay/rng.hpp"
#include "fdrelay/toeplitz.hpp"
#include "support/oracles.hpp"

using namespace fdrelay;

namespace {

cvec random_cvec(Rng& rng, Eigen::Index n, double scale = 1.0) {
    cvec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.gaussian_c();
    return v;
}

} // namespace

TEST_CASE("banded Toeplitz matvec agrees with dense expansion", "[toeplitz]") {
    Rng rng(42);
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::Index n = 4 + static_cast<Eigen::Index>(rng.u64() % 60);
        const Eigen::Index lc = 1 + static_cast<Eigen::Index>(rng.u64() % std::min<Eigen::Index>(n, 6));
        const Eigen::Index lr = 1 + static_cast<Eigen::Index>(rng.u64() % std::min<Eigen::Index>(n, 6));
        cvec col = random_cvec(rng, lc);
        cvec row = random_cvec(rng, lr);
        row[0] = col[0];
        const BandedToeplitz T(col, row, n);
        const cmat dense = T.dense();
        const cvec x = random_cvec(rng, n);
        REQUIRE((T.apply(x) - dense * x).norm() < 1e-12 * dense.norm() * x.norm());
        REQUIRE((T.apply_adjoint(x) - dense.adjoint() * x).norm() <
                1e-12 * dense.norm() * x.norm());
    }
}

TEST_CASE("banded Toeplitz validates its invariants", "[toeplitz]") {
    cvec col(2), row(2);
    col << cplx(1.0), cplx(0.5);
    row << cplx(2.0), cplx(0.0);
    REQUIRE_THROWS_AS(BandedToeplitz(col, row, 8), domain_error);
    row[0] = col[0];
    REQUIRE_NOTHROW(BandedToeplitz(col, row, 8));
    REQUIRE_THROWS_AS(BandedToeplitz(col, row, 1), domain_error);
}

TEST_CASE("H_theta acting on e1 returns its first column", "[toeplitz]") {
    const Eigen::Index n = 16;
    const BandedToeplitz H = build_h_theta(cplx(0.5, 0.2), 4, n);
    cvec e1 = cvec::Zero(n);
    e1[0] = 1.0;
    const cvec c = H.apply(e1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const cplx want = i < H.first_col().size() ? H.first_col()[i] : cplx(0.0);
        REQUIRE(c[i] == want);
    }
}

TEST_CASE("H_theta equals truncated geometric convolution", "[toeplitz]") {
    Rng rng(7);
    for (Eigen::Index n : {16, 64, 256}) {
        const cplx theta(0.4, -0.35);
        const Eigen::Index L = 5;
        const BandedToeplitz H = build_h_theta(theta, L, n);
        const cvec x = random_cvec(rng, n);
        const cvec taps = theta_taps(theta, L);
        const cvec full = convolve(taps, x);
        REQUIRE((H.apply(x) - full.head(n)).norm() < 1e-12 * full.norm());
    }
}

TEST_CASE("gram covariance matches dense scale*H*H^H + diag*I", "[banded]") {
    Rng rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        const Eigen::Index n = 8 + static_cast<Eigen::Index>(rng.u64() % 40);
        const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.u64() % 5);
        const cvec g = random_cvec(rng, k);
        const double scale = 0.3 + rng.uniform01();
        const double diag = 0.1 + rng.uniform01();
        const BandedHermitian C = BandedHermitian::gram_covariance(g, scale, diag, n);
        const cmat ref = oracle::dense_covariance(g, scale, diag, n);
        REQUIRE((C.dense() - ref).norm() < 1e-12 * ref.norm());
    }
}

TEST_CASE("banded Cholesky: solve, logdet, selected inverse, traces", "[banded]") {
    Rng rng(11);
    for (int rep = 0; rep < 8; ++rep) {
        const Eigen::Index n = 10 + static_cast<Eigen::Index>(rng.u64() % 50);
        const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.u64() % 4);
        cvec g = random_cvec(rng, k);
        g[0] = cplx(1.0);
        const double scale = 0.5 + rng.uniform01();
        const double diag = 0.2 + rng.uniform01();
        const BandedHermitian C = BandedHermitian::gram_covariance(g, scale, diag, n);
        const BandedCholesky chol(C);
        const cmat dense = C.dense();
        Eigen::LLT<cmat> llt(dense);

        const cvec b = random_cvec(rng, n);
        REQUIRE((chol.solve(b) - llt.solve(b)).norm() < 1e-9 * b.norm());

        double logdet_ref = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            logdet_ref += 2.0 * std::log(llt.matrixLLT()(i, i).real());
        REQUIRE(chol.log_det() == Catch::Approx(logdet_ref).epsilon(1e-10));

        const cmat zref = dense.inverse();
        const cmat zband = chol.selected_inverse_band();
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index d = 0; d <= std::min<Eigen::Index>(C.bandwidth(), j); ++d)
                REQUIRE(std::abs(zband(d, j) - zref(j - d, j)) < 1e-9);

        // trace of C^{-1}(M + M^H) with M = H[v] H[g]^H
        const cvec v = random_cvec(rng, k);
        const cmat Hv = oracle::dense_lower_toeplitz(v, n);
        const cmat Hg = oracle::dense_lower_toeplitz(g, n);
        const cmat M = Hv * Hg.adjoint();
        const double want = (zref * (scale * (M + M.adjoint()))).trace().real();
        const double got = trace_cinv_sym_product(zband, v, g, scale, n);
        REQUIRE(got == Catch::Approx(want).epsilon(1e-8));
    }
}
