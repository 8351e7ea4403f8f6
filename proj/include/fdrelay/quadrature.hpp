#pragma once

#include <functional>

#include "fdrelay/common.hpp"

namespace fdrelay {

/// (1/2pi) * integral over [0, 2pi) by the composite trapezoid rule (equal to
/// the rectangle rule for periodic integrands). Starts at `n0` points and
/// Richardson-checks by doubling until the relative change is below `rel_tol`.
inline double integrate_periodic(const std::function<double(double)>& f, int n0 = 4096,
                                 double rel_tol = 1e-8, int max_doublings = 4) {
    auto eval = [&](int n) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) acc += f(2.0 * pi * k / n);
        return acc / n;
    };
    double prev = eval(n0);
    int n = n0;
    for (int d = 0; d < max_doublings; ++d) {
        n *= 2;
        const double cur = eval(n);
        if (std::abs(cur - prev) <= rel_tol * std::max(1e-300, std::abs(cur))) return cur;
        prev = cur;
    }
    throw numerical_error("integrate_periodic: Richardson check did not converge");
}

/// Complex-valued variant (used for inverse-transform tap extraction).
inline cplx integrate_periodic_c(const std::function<cplx(double)>& f, int n0 = 4096,
                                 double rel_tol = 1e-8, int max_doublings = 4) {
    auto eval = [&](int n) {
        cplx acc(0.0);
        for (int k = 0; k < n; ++k) acc += f(2.0 * pi * k / n);
        return acc / static_cast<double>(n);
    };
    cplx prev = eval(n0);
    int n = n0;
    for (int d = 0; d < max_doublings; ++d) {
        n *= 2;
        const cplx cur = eval(n);
        if (std::abs(cur - prev) <= rel_tol * std::max(1e-300, std::abs(cur))) return cur;
        prev = cur;
    }
    throw numerical_error("integrate_periodic_c: Richardson check did not converge");
}

} // namespace fdrelay
