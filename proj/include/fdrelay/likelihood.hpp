#pragma once

#include <optional>

#include "fdrelay/banded.hpp"
#include "fdrelay/common.hpp"
#include "fdrelay/model.hpp"

namespace fdrelay {

/// Marginalized-likelihood machinery shared by the flat-fading, overall-tap
/// and fractional-delay estimators. The observation model is
///   y = a H[g] x + colored noise,   C = noise_scale * H[g] H[g]^H + var_nd I,
/// with the complex gain a profiled out in closed form. One instance is one
/// evaluation point (fixed taps g).
class ProfiledLikelihood {
public:
    ProfiledLikelihood(cvec taps, const cvec& x, const cvec& y, double noise_scale,
                       double var_nd)
        : taps_(std::move(taps)),
          x_(x),
          y_(y),
          scale_(noise_scale),
          n_(x.size()),
          H_(BandedToeplitz::lower(taps_, n_)),
          chol_(BandedHermitian::gram_covariance(taps_, noise_scale, var_nd, n_)) {
        u_ = H_.apply(x_);
        cinv_u_ = chol_.solve(u_);
        den_ = u_.dot(cinv_u_).real();  // x^H H^H C^{-1} H x, real > 0 for x != 0
        if (!(den_ > 0.0)) throw numerical_error("ProfiledLikelihood: singular normal scalar");
        gain_ = u_.dot(chol_.solve(y_)) / den_;
        resid_ = y_ - gain_ * u_;
        w_ = chol_.solve(resid_);
        objective_ = chol_.log_det() + resid_.dot(w_).real();
    }

    cplx profiled_gain() const { return gain_; }
    double objective() const { return objective_; }
    const cvec& residual() const { return resid_; }
    const BandedCholesky& factor() const { return chol_; }
    double normal_scalar() const { return den_; }

    /// df/ds for a real parameter s with tap derivative v = dg/ds, evaluated
    /// with the gain held at its profiled value (the gain stationarity makes
    /// this equal the derivative of the fully profiled objective).
    double gradient_component(const cvec& v) const {
        if (!zband_) zband_ = chol_.selected_inverse_band();
        const BandedToeplitz Hv = BandedToeplitz::lower(v, n_);
        const double tr = trace_cinv_sym_product(*zband_, v, taps_, scale_, n_);
        const cvec ug = H_.apply_adjoint(w_);
        const cvec uv = Hv.apply_adjoint(w_);
        const double quad = -scale_ * 2.0 * uv.dot(ug).real();
        const double mean = -2.0 * (gain_ * w_.dot(Hv.apply(x_))).real();
        return tr + quad + mean;
    }

private:
    cvec taps_;
    const cvec& x_;
    const cvec& y_;
    double scale_;
    Eigen::Index n_;
    BandedToeplitz H_;
    BandedCholesky chol_;
    cvec u_, cinv_u_, resid_, w_;
    double den_ = 0.0;
    cplx gain_{0.0};
    double objective_ = 0.0;
    mutable std::optional<cmat> zband_;
};

} // namespace fdrelay
