#pragma once

#include "fdrelay/common.hpp"

namespace fdrelay {

/// Linear convolution of two finite tap sequences (full length a+b-1).
inline cvec convolve(const cvec& a, const cvec& b) {
    cvec out = cvec::Zero(a.size() + b.size() - 1);
    for (Eigen::Index i = 0; i < a.size(); ++i)
        for (Eigen::Index k = 0; k < b.size(); ++k) out[i + k] += a[i] * b[k];
    return out;
}

/// N x N banded Toeplitz operator held by its first column and first row
/// (trailing zeros implied). Covers H_theta, B_theta, H_sr, ... and the
/// band products that appear in the Fisher information.
class BandedToeplitz {
public:
    BandedToeplitz(cvec first_col, cvec first_row, Eigen::Index n)
        : col_(std::move(first_col)), row_(std::move(first_row)), n_(n) {
        if (col_.size() == 0 || row_.size() == 0)
            throw domain_error("BandedToeplitz: empty band");
        if (col_.size() > n_ || row_.size() > n_)
            throw domain_error("BandedToeplitz: band exceeds dimension");
        if (col_[0] != row_[0])
            throw domain_error("BandedToeplitz: first_col[0] != first_row[0]");
    }

    /// Lower-triangular operator whose first column holds `taps`.
    static BandedToeplitz lower(const cvec& taps, Eigen::Index n) {
        cvec row(1);
        row[0] = taps.size() > 0 ? taps[0] : cplx(0.0);
        return BandedToeplitz(taps, row, n);
    }

    Eigen::Index dim() const { return n_; }
    const cvec& first_col() const { return col_; }
    const cvec& first_row() const { return row_; }

    cplx entry(Eigen::Index i, Eigen::Index j) const {
        const Eigen::Index d = i - j;
        if (d >= 0) return d < col_.size() ? col_[d] : cplx(0.0);
        return -d < row_.size() ? row_[-d] : cplx(0.0);
    }

    /// y = T x
    cvec apply(const cvec& x) const {
        expect_size(x);
        cvec y = cvec::Zero(n_);
        for (Eigen::Index k = 0; k < col_.size(); ++k) {
            if (col_[k] == cplx(0.0)) continue;
            y.tail(n_ - k) += col_[k] * x.head(n_ - k);
        }
        for (Eigen::Index k = 1; k < row_.size(); ++k) {
            if (row_[k] == cplx(0.0)) continue;
            y.head(n_ - k) += row_[k] * x.tail(n_ - k);
        }
        return y;
    }

    /// y = T^H x
    cvec apply_adjoint(const cvec& x) const {
        expect_size(x);
        cvec y = cvec::Zero(n_);
        for (Eigen::Index k = 0; k < col_.size(); ++k) {
            if (col_[k] == cplx(0.0)) continue;
            y.head(n_ - k) += std::conj(col_[k]) * x.tail(n_ - k);
        }
        for (Eigen::Index k = 1; k < row_.size(); ++k) {
            if (row_[k] == cplx(0.0)) continue;
            y.tail(n_ - k) += std::conj(row_[k]) * x.head(n_ - k);
        }
        return y;
    }

    /// Dense materialization, intended as a test oracle at small N.
    cmat dense() const {
        cmat m = cmat::Zero(n_, n_);
        for (Eigen::Index i = 0; i < n_; ++i)
            for (Eigen::Index j = 0; j < n_; ++j) m(i, j) = entry(i, j);
        return m;
    }

private:
    void expect_size(const cvec& x) const {
        if (x.size() != n_) throw domain_error("BandedToeplitz: size mismatch");
    }

    cvec col_;
    cvec row_;
    Eigen::Index n_;
};

} // namespace fdrelay
