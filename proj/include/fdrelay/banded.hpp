#pragma once

#include <functional>

#include "fdrelay/common.hpp"
#include "fdrelay/toeplitz.hpp"

namespace fdrelay {

/// Hermitian banded matrix, lower band storage: band(d, j) = A_{j+d, j},
/// d = 0..bandwidth. The covariance C = s * H[g] H[g]^H + sigma^2 I of the
/// block model lives here: it is banded with bandwidth len(g)-1 (Toeplitz
/// away from the top-left corner).
class BandedHermitian {
public:
    BandedHermitian(Eigen::Index n, Eigen::Index bandwidth)
        : n_(n), bw_(bandwidth), band_(cmat::Zero(bandwidth + 1, n)) {}

    Eigen::Index dim() const { return n_; }
    Eigen::Index bandwidth() const { return bw_; }

    cplx& at(Eigen::Index d, Eigen::Index j) { return band_(d, j); }
    cplx at(Eigen::Index d, Eigen::Index j) const { return band_(d, j); }

    cplx entry(Eigen::Index i, Eigen::Index j) const {
        if (i < j) return std::conj(entry(j, i));
        const Eigen::Index d = i - j;
        return d <= bw_ ? band_(d, j) : cplx(0.0);
    }

    cmat dense() const {
        cmat m = cmat::Zero(n_, n_);
        for (Eigen::Index i = 0; i < n_; ++i)
            for (Eigen::Index j = 0; j < n_; ++j) m(i, j) = entry(i, j);
        return m;
    }

    /// Adds scale * H[g] H[g]^H into the band (requires len(g)-1 <= bandwidth).
    /// Entries are tap autocorrelations, truncated in the first len(g)-1 rows
    /// where the operator support is partial.
    void accumulate_gram(const cvec& g, double scale) {
        const Eigen::Index K = g.size();
        if (K - 1 > bw_) throw domain_error("BandedHermitian: gram exceeds bandwidth");
        for (Eigen::Index d = 0; d < K; ++d) {
            // full autocorrelation a[d] and running partial sums for the corner
            cplx full(0.0);
            for (Eigen::Index r = 0; r + d < K; ++r) full += g[d + r] * std::conj(g[r]);
            cplx partial(0.0);
            for (Eigen::Index q = 0; q + d < n_; ++q) {
                cplx value;
                if (q + d < K - 1) {  // corner: sum truncated at r <= q
                    partial += g[d + q] * std::conj(g[q]);
                    value = partial;
                } else {
                    value = full;
                }
                band_(d, q) += scale * value;
            }
        }
    }

    void add_diagonal(double diag) {
        for (Eigen::Index q = 0; q < n_; ++q) band_(0, q) += diag;
    }

    /// C = scale * H[g] H[g]^H + diag * I.
    static BandedHermitian gram_covariance(const cvec& g, double scale, double diag,
                                           Eigen::Index n) {
        BandedHermitian C(n, g.size() - 1);
        C.accumulate_gram(g, scale);
        C.add_diagonal(diag);
        return C;
    }

private:
    Eigen::Index n_;
    Eigen::Index bw_;
    cmat band_;  // (bw+1) x n
};

/// Cholesky factorization C = L L^H of a banded Hermitian positive-definite
/// matrix, with solves, log-determinant and the selected band inverse used by
/// the likelihood gradients.
class BandedCholesky {
public:
    explicit BandedCholesky(const BandedHermitian& a)
        : n_(a.dim()), bw_(a.bandwidth()), l_(cmat::Zero(a.bandwidth() + 1, a.dim())) {
        for (Eigen::Index jcol = 0; jcol < n_; ++jcol) {
            double s = a.at(0, jcol).real();
            for (Eigen::Index k = std::max<Eigen::Index>(0, jcol - bw_); k < jcol; ++k)
                s -= std::norm(l_(jcol - k, k));
            if (!(s > 0.0)) throw numerical_error("BandedCholesky: matrix not positive definite");
            l_(0, jcol) = std::sqrt(s);
            const Eigen::Index imax = std::min(jcol + bw_, n_ - 1);
            for (Eigen::Index i = jcol + 1; i <= imax; ++i) {
                cplx v = a.at(i - jcol, jcol);
                for (Eigen::Index k = std::max<Eigen::Index>(0, i - bw_); k < jcol; ++k)
                    v -= l_(i - k, k) * std::conj(l_(jcol - k, k));
                l_(i - jcol, jcol) = v / l_(0, jcol).real();
            }
        }
    }

    Eigen::Index dim() const { return n_; }
    Eigen::Index bandwidth() const { return bw_; }

    double log_det() const {
        double s = 0.0;
        for (Eigen::Index jcol = 0; jcol < n_; ++jcol) s += std::log(l_(0, jcol).real());
        return 2.0 * s;
    }

    /// L z = b
    cvec solve_lower(const cvec& b) const {
        cvec z(n_);
        for (Eigen::Index i = 0; i < n_; ++i) {
            cplx v = b[i];
            for (Eigen::Index k = std::max<Eigen::Index>(0, i - bw_); k < i; ++k)
                v -= l_(i - k, k) * z[k];
            z[i] = v / l_(0, i).real();
        }
        return z;
    }

    /// L^H x = z
    cvec solve_upper(const cvec& z) const {
        cvec x(n_);
        for (Eigen::Index i = n_ - 1; i >= 0; --i) {
            cplx v = z[i];
            const Eigen::Index kmax = std::min(i + bw_, n_ - 1);
            for (Eigen::Index k = i + 1; k <= kmax; ++k)
                v -= std::conj(l_(k - i, i)) * x[k];
            x[i] = v / l_(0, i).real();
            if (i == 0) break;
        }
        return x;
    }

    /// C^{-1} b
    cvec solve(const cvec& b) const { return solve_upper(solve_lower(b)); }

    /// L v — colors a white vector so that L(white) ~ CN(0, C).
    cvec apply_factor(const cvec& v) const {
        cvec y = cvec::Zero(n_);
        for (Eigen::Index jcol = 0; jcol < n_; ++jcol) {
            const Eigen::Index imax = std::min(jcol + bw_, n_ - 1);
            for (Eigen::Index i = jcol; i <= imax; ++i) y[i] += l_(i - jcol, jcol) * v[jcol];
        }
        return y;
    }

    /// Band of Z = C^{-1} restricted to |i-j| <= bandwidth (Takahashi
    /// recurrences); upper storage: result(d, j) = Z_{j-d, j}.
    cmat selected_inverse_band() const {
        cmat z = cmat::Zero(bw_ + 1, n_);
        auto z_below = [&](Eigen::Index k, Eigen::Index jcol) {
            // Z_{k,jcol} with k > jcol, via hermitian symmetry from column k
            return std::conj(z(k - jcol, k));
        };
        for (Eigen::Index jcol = n_ - 1; jcol >= 0; --jcol) {
            const double ljj = l_(0, jcol).real();
            cplx acc(0.0);
            const Eigen::Index kmax = std::min(jcol + bw_, n_ - 1);
            for (Eigen::Index k = jcol + 1; k <= kmax; ++k)
                acc += std::conj(l_(k - jcol, jcol)) * z_below(k, jcol);
            z(0, jcol) = cplx(1.0 / (ljj * ljj)) - acc / ljj;
            for (Eigen::Index i = jcol - 1; i >= std::max<Eigen::Index>(0, jcol - bw_); --i) {
                cplx s(0.0);
                const Eigen::Index km = std::min(i + bw_, n_ - 1);
                for (Eigen::Index k = i + 1; k <= km; ++k) {
                    const cplx lk = l_(k - i, i);
                    if (lk == cplx(0.0)) continue;
                    const cplx zkj = (k <= jcol) ? z(jcol - k, jcol) : z_below(k, jcol);
                    s += std::conj(lk) * zkj;
                }
                z(jcol - i, jcol) = -s / l_(0, i).real();
                if (i == 0) break;
            }
            if (jcol == 0) break;
        }
        return z;
    }

private:
    Eigen::Index n_;
    Eigen::Index bw_;
    cmat l_;  // (bw+1) x n, lower storage
};

/// Entries of the band product M = H[v] H[g]^H (both lower banded Toeplitz);
/// M is banded with |i-j| <= max(len)-1 and loses Toeplitz structure in the
/// top-left corner.
class GramBandProduct {
public:
    GramBandProduct(const cvec& v, const cvec& g) : v_(v), g_(g) {}

    cplx entry(Eigen::Index i, Eigen::Index j) const {
        const Eigen::Index lo =
            std::max<Eigen::Index>({0, i - v_.size() + 1, j - g_.size() + 1});
        const Eigen::Index hi = std::min(i, j);
        cplx s(0.0);
        for (Eigen::Index m = lo; m <= hi; ++m) s += v_[i - m] * std::conj(g_[j - m]);
        return s;
    }

private:
    const cvec& v_;
    const cvec& g_;
};

/// tr(C^{-1} D) where D = scale * (M + M^H), M = H[v] H[g]^H, using the
/// selected band inverse zband (upper storage) of the factorization.
inline double trace_cinv_sym_product(const cmat& zband, const cvec& v, const cvec& g,
                                     double scale, Eigen::Index n) {
    const Eigen::Index bw = zband.rows() - 1;
    GramBandProduct m(v, g);
    // tr(C^{-1}(M + M^H)) = 2 Re tr(C^{-1} M) since C^{-1} is Hermitian.
    cplx tr(0.0);
    for (Eigen::Index jcol = 0; jcol < n; ++jcol) {
        tr += zband(0, jcol) * m.entry(jcol, jcol);
        const Eigen::Index dmax = std::min(bw, n - 1 - jcol);
        for (Eigen::Index d = 1; d <= std::min(bw, jcol); ++d) {
            // Z_{j-d, j} * M_{j, j-d}
            tr += zband(d, jcol) * m.entry(jcol, jcol - d);
        }
        for (Eigen::Index d = 1; d <= dmax; ++d) {
            // Z_{j+d, j} * M_{j, j+d}
            tr += std::conj(zband(d, jcol + d)) * m.entry(jcol, jcol + d);
        }
    }
    return 2.0 * scale * tr.real();
}

} // namespace fdrelay
