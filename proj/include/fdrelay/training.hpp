#pragma once

#include <algorithm>
#include <vector>

#include "fdrelay/crb.hpp"

namespace fdrelay {

/// The lambda-domain training design objective:
///   F(lambda) = |t|^2 c / (3/4 |h|^2 |t|^2 |g|^2 + A |t|^2 c),
/// i.e. the quarter-reduced cross term taken at the full modulus |t^* g|^2 =
/// |t|^2 |g|^2. This is the reading under which G(z) is strictly increasing
/// on the valid interval (so the minimizer is the left endpoint z =
/// (1-|theta|)^2, lambda = -angle(theta)), the design is invariant to the
/// phase of theta like the exact CRB, and its argmin coincides with the
/// argmin of the exact-FIM CRB_theta over sinusoid frequencies. It is a
/// scoring function for sequence design; reported CRB values come from
/// crb_theta_asymptotic / crb_exact.
inline double design_objective_lambda(cplx h, cplx theta, double alpha, double P_s,
                                      double lambda, const AsymptoticNoise& nv = {}) {
    const SpectralSymbols s = spectral_symbols(theta, lambda, P_s);
    const double a2 = alpha * alpha * nv.var_rd * nv.var_r;
    const double t2 = std::norm(s.t);
    const double c = a2 * t2 + nv.var_d;
    const double den = 0.75 * std::norm(h) * t2 * std::norm(s.g) + s.A * t2 * c;
    if (!(den > 0.0)) throw numerical_error("design_objective_lambda: non-positive denominator");
    return t2 * c / den;
}

/// Companion objective for the h-CRB (same denominator, Eq.-45 numerator);
/// used by the sum design.
inline double design_objective_h_lambda(cplx h, cplx theta, double alpha, double P_s,
                                        double lambda, const AsymptoticNoise& nv = {}) {
    const SpectralSymbols s = spectral_symbols(theta, lambda, P_s);
    const double a2 = alpha * alpha * nv.var_rd * nv.var_r;
    const double t2 = std::norm(s.t);
    const double c = a2 * t2 + nv.var_d;
    const double den = 0.75 * std::norm(h) * t2 * std::norm(s.g) + s.A * t2 * c;
    if (!(den > 0.0)) throw numerical_error("design_objective_h_lambda: non-positive denominator");
    return (std::norm(h) * std::norm(s.g) * c + s.A * c * c) / den;
}

struct DesignResult {
    double lambda_star = 0.0;  ///< in [0, 2pi)
    double z_star = 1.0;       ///< |1 - theta e^{j lambda*}|^2
    double crb_at_optimum = 0.0;  ///< objective value at the optimum (per unit ||x||^2)
    enum class Method { exact, approximate, grid } method = Method::exact;
    std::vector<std::pair<double, double>> candidates;  ///< (z, G(z)) evaluated
};

namespace detail {

/// lambda on one branch of z = |1 - theta e^{j lambda}|^2, wrapped to [0, 2pi).
inline double lambda_of_z(double z, cplx theta, int branch) {
    const double m = std::abs(theta);
    const double w = 0.5 * (1.0 + m * m - z);
    const double u = std::clamp(w / m, -1.0, 1.0);
    const double ang = std::acos(u);  // lambda + angle(theta), principal value
    return wrap_angle((branch >= 0 ? ang : -ang) - std::arg(theta));
}

} // namespace detail

/// G(z), the z-domain form of the design objective; z must lie in
/// [(1-|theta|)^2, (1+|theta|)^2]. Both lambda branches of a given z give the
/// same value (the objective depends on lambda only through z).
inline double eval_G(double z, cplx h, cplx theta, double alpha, double P_s,
                     const AsymptoticNoise& nv = {}) {
    const double m = std::abs(theta);
    const double zlo = (1.0 - m) * (1.0 - m), zhi = (1.0 + m) * (1.0 + m);
    if (z < zlo - 1e-12 || z > zhi + 1e-12)
        throw domain_error("eval_G: z outside [(1-|theta|)^2, (1+|theta|)^2]");
    if (m >= 1.0) throw domain_error("eval_G: |theta| >= 1");
    const double zc = std::clamp(z, zlo, zhi);
    const double a2 = alpha * alpha * nv.var_rd * nv.var_r;
    const double c = a2 / zc + nv.var_d;
    const double A = 1.0 / (P_s * (m + 1.0) * std::abs(m - 1.0));
    const double den = 0.75 * std::norm(h) / (zc * zc * zc) + A * c / zc;
    if (!(den > 0.0)) throw numerical_error("eval_G: non-positive denominator");
    return (c / zc) / den;
}

/// Exact design: all stationary points of G on both branches (sign changes of
/// a finite-difference G' on a dense grid, refined by bisection) plus the two
/// endpoints; the smallest G wins, ties resolved toward the smaller lambda.
inline DesignResult optimize_exact(cplx h, cplx theta, double alpha, double P_s,
                                   const AsymptoticNoise& nv = {}, int grid = 4096) {
    DesignResult out;
    out.method = DesignResult::Method::exact;
    const double m = std::abs(theta);
    if (m < 1e-14) {
        out.lambda_star = 0.0;
        out.z_star = 1.0;
        out.crb_at_optimum = eval_G(1.0, h, theta, alpha, P_s, nv);
        out.candidates = {{1.0, out.crb_at_optimum}};
        return out;
    }
    if (m >= 1.0) throw domain_error("optimize_exact: |theta| >= 1");

    const double zlo = (1.0 - m) * (1.0 - m), zhi = (1.0 + m) * (1.0 + m);
    const double hz = (zhi - zlo) / grid;

    double best_g = std::numeric_limits<double>::infinity();
    double best_lambda = 0.0, best_z = zlo;
    auto consider = [&](double z) {
        const double g = eval_G(z, h, theta, alpha, P_s, nv);
        // both lambda branches carry the same G; tie-break toward smaller lambda
        const double lam = std::min(detail::lambda_of_z(z, theta, +1),
                                    detail::lambda_of_z(z, theta, -1));
        out.candidates.emplace_back(z, g);
        if (g < best_g - 1e-15 ||
            (std::abs(g - best_g) <= 1e-12 * std::max(1.0, std::abs(best_g)) &&
             lam < best_lambda)) {
            best_g = g;
            best_lambda = lam;
            best_z = z;
        }
    };

    consider(zlo);
    consider(zhi);
    const double dstep = 0.25 * hz;
    auto dG = [&](double z) {
        const double zp = std::min(z + dstep, zhi), zm = std::max(z - dstep, zlo);
        return (eval_G(zp, h, theta, alpha, P_s, nv) - eval_G(zm, h, theta, alpha, P_s, nv)) /
               (zp - zm);
    };
    double prev_d = dG(zlo + 0.5 * hz);
    for (int i = 1; i < grid; ++i) {
        const double z = zlo + (i + 0.5) * hz;
        const double d = dG(z);
        if (prev_d == 0.0 || (prev_d < 0.0) != (d < 0.0)) {
            double a = z - hz, b = z;  // bracket the sign change
            double da = dG(a);
            for (int it = 0; it < 60 && b - a > 1e-13 * (zhi - zlo); ++it) {
                const double mid = 0.5 * (a + b);
                const double dm = dG(mid);
                if ((da < 0.0) != (dm < 0.0)) {
                    b = mid;
                } else {
                    a = mid;
                    da = dm;
                }
            }
            consider(0.5 * (a + b));
        }
        prev_d = d;
    }

    out.lambda_star = best_lambda;
    out.z_star = best_z;
    out.crb_at_optimum = best_g;
    return out;
}

/// Low-complexity rule lambda = -angle(theta) (mod 2pi). Accuracy degrades as
/// |theta| grows; `warning`, when provided, is set above |theta| = 0.5.
inline double optimize_approx(cplx theta, bool* warning = nullptr) {
    if (std::abs(theta) >= 1.0) throw domain_error("optimize_approx: |theta| >= 1");
    if (warning) *warning = std::abs(theta) > 0.5;
    if (std::abs(theta) == 0.0) return 0.0;
    return wrap_angle(-std::arg(theta));
}

/// Minimize the sum of the theta- and h-design objectives over a lambda grid
/// with local golden-section refinement.
inline DesignResult optimize_sum(cplx h, cplx theta, double alpha, double P_s,
                                 const AsymptoticNoise& nv = {}, int grid = 4096) {
    DesignResult out;
    out.method = DesignResult::Method::grid;
    auto fsum = [&](double lam) {
        return design_objective_lambda(h, theta, alpha, P_s, lam, nv) +
               design_objective_h_lambda(h, theta, alpha, P_s, lam, nv);
    };
    double best_lam = 0.0, best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid; ++i) {
        const double lam = 2.0 * pi * i / grid;
        const double v = fsum(lam);
        if (v < best) {
            best = v;
            best_lam = lam;
        }
    }
    // golden-section refinement around the best grid point
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = best_lam - 2.0 * pi / grid, b = best_lam + 2.0 * pi / grid;
    double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
    double f1 = fsum(c1), f2 = fsum(c2);
    for (int it = 0; it < 80; ++it) {
        if (f1 < f2) {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - gr * (b - a);
            f1 = fsum(c1);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + gr * (b - a);
            f2 = fsum(c2);
        }
    }
    const double lam = wrap_angle(0.5 * (a + b));
    out.lambda_star = fsum(lam) < best ? lam : best_lam;
    out.crb_at_optimum = fsum(out.lambda_star);
    out.z_star = std::norm(cplx(1.0) - theta * std::exp(j1i * out.lambda_star));
    out.candidates = {{out.z_star, out.crb_at_optimum}};
    return out;
}

/// Design-frame score of an arbitrary training sequence: the average of the
/// design objective weighted by the sequence's energy spectrum. A sinusoid at
/// the designed frequency concentrates its spectrum at the objective's
/// minimum, so it dominates every random sequence of the same power.
inline double sequence_design_crb(const TrainingSequence& x, cplx h, cplx theta, double alpha,
                                  double P_s, const AsymptoticNoise& nv = {}, int grid = 1024) {
    double wsum = 0.0, acc = 0.0;
    for (int i = 0; i < grid; ++i) {
        const double lam = 2.0 * pi * i / grid;
        cplx X(0.0);
        for (Eigen::Index k = 0; k < x.size(); ++k)
            X += x.samples[k] * std::exp(j1i * (lam * static_cast<double>(k)));
        const double w = std::norm(X);
        wsum += w;
        acc += w * design_objective_lambda(h, theta, alpha, P_s, lam, nv);
    }
    return acc / wsum / x.norm_sq();
}

} // namespace fdrelay
