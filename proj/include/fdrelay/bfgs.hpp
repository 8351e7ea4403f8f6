#pragma once

#include <functional>
#include <vector>

#include "fdrelay/common.hpp"

namespace fdrelay {

struct BfgsOptions {
    int max_iter = 100;
    double grad_tol = 1e-6;   ///< infinity norm of the gradient
    double f_tol = 1e-10;     ///< |delta f| between accepted steps
    double armijo_slope = 1e-4;
    double backtrack = 0.5;
    int max_backtracks = 60;
    double curvature_eps = 1e-12;  ///< skip the inverse-Hessian update below this s.v
};

struct BfgsResult {
    rvec z;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> trace;     ///< accepted objective values, trace[0] = f(z0)
    int iterations_to_ftol = 0;    ///< first accepted step with |delta f| < f_tol
};

/// Quasi-Newton minimization with Armijo backtracking. `feasible` guards the
/// open domain of the objective: the line search keeps shrinking until the
/// trial point is feasible, so the objective is never evaluated outside it.
inline BfgsResult minimize_bfgs(const std::function<double(const rvec&)>& f,
                                const std::function<rvec(const rvec&)>& grad,
                                const rvec& z0,
                                const std::function<bool(const rvec&)>& feasible,
                                const BfgsOptions& opt = {}) {
    const Eigen::Index n = z0.size();
    if (!feasible(z0)) throw domain_error("minimize_bfgs: infeasible starting point");

    BfgsResult res;
    res.z = z0;
    res.f = f(z0);
    res.trace.push_back(res.f);
    res.iterations_to_ftol = -1;

    rvec g = grad(res.z);
    Eigen::MatrixXd Ainv = Eigen::MatrixXd::Identity(n, n);

    for (int it = 0; it < opt.max_iter; ++it) {
        if (g.lpNorm<Eigen::Infinity>() < opt.grad_tol) {
            res.converged = true;
            break;
        }

        rvec p = -(Ainv * g);
        double slope = g.dot(p);
        if (slope >= 0.0) {  // safeguard: fall back to steepest descent
            Ainv.setIdentity();
            p = -g;
            slope = g.dot(p);
        }

        double step = 1.0;
        bool accepted = false;
        rvec z_new;
        double f_new = res.f;
        for (int bt = 0; bt < opt.max_backtracks; ++bt) {
            z_new = res.z + step * p;
            if (feasible(z_new)) {
                f_new = f(z_new);
                if (f_new <= res.f + opt.armijo_slope * step * slope) {
                    accepted = true;
                    break;
                }
            }
            step *= opt.backtrack;
        }
        if (!accepted) break;  // line search stalled at the current point

        const rvec g_new = grad(z_new);
        const rvec s = z_new - res.z;
        const rvec v = g_new - g;
        const double sv = s.dot(v);
        if (sv > opt.curvature_eps) {
            const rvec av = Ainv * v;
            const double vav = v.dot(av);
            Ainv += ((sv + vav) / (sv * sv)) * (s * s.transpose());
            const Eigen::MatrixXd cross = av * s.transpose();
            Ainv -= (cross + cross.transpose()) / sv;
        }

        const double df = std::abs(res.f - f_new);
        res.z = z_new;
        res.f = f_new;
        g = g_new;
        ++res.iterations;
        res.trace.push_back(res.f);
        if (res.iterations_to_ftol < 0 && df < opt.f_tol) res.iterations_to_ftol = res.iterations;
        if (df < opt.f_tol) {
            res.converged = true;
            break;
        }
    }

    if (res.iterations_to_ftol < 0) res.iterations_to_ftol = res.iterations;
    if (!res.converged && g.lpNorm<Eigen::Infinity>() < opt.grad_tol) res.converged = true;
    return res;
}

} // namespace fdrelay
