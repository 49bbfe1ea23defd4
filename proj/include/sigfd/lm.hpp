#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "sigfd/errors.hpp"

// Damped Gauss-Newton (Levenberg-Marquardt) for small dense problems.
// The parameter vectors here are 2-4 wide, so the normal equations are
// solved directly with pivoted Gaussian elimination.

namespace sigfd {

struct FitOptions {
    int max_iter = 200;
    double grad_tol = 1e-10;      // infinity norm of J^T r
    double step_tol = 1e-12;      // relative step length
    double initial_alpha = 1.0;
    double initial_beta = 1.0;
    double lambda0 = 1e-3;        // initial damping
    bool weight_by_count = true;

    void validate() const {
        if (max_iter < 1 || !(grad_tol > 0.0) || !(step_tol > 0.0) || !(lambda0 > 0.0))
            throw DomainError("FitOptions: max_iter >= 1 and all tolerances > 0 required");
    }
};

struct LmResult {
    std::vector<double> solution;
    bool converged = false;
    int iterations = 0;
    double objective = 0.0;  // final sum of squared residuals
};

using ResidualFn = std::function<std::vector<double>(const std::vector<double>&)>;
using JacobianFn = std::function<std::vector<std::vector<double>>(const std::vector<double>&)>;

namespace detail {

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const std::vector<std::vector<double>>& m) {
    for (const auto& row : m)
        if (!all_finite(row)) return false;
    return true;
}

// Solves Ax = b in place via Gaussian elimination with partial pivoting.
// Returns false on a (numerically) singular pivot.
inline bool solve_linear(std::vector<std::vector<double>> a, std::vector<double> b,
                         std::vector<double>& x) {
    const std::size_t n = b.size();
    x.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t piv = i;
        double maxv = std::fabs(a[i][i]);
        for (std::size_t r = i + 1; r < n; ++r) {
            if (std::fabs(a[r][i]) > maxv) {
                maxv = std::fabs(a[r][i]);
                piv = r;
            }
        }
        if (maxv < 1e-300) return false;
        if (piv != i) {
            std::swap(a[i], a[piv]);
            std::swap(b[i], b[piv]);
        }
        for (std::size_t r = i + 1; r < n; ++r) {
            const double fac = a[r][i] / a[i][i];
            for (std::size_t c = i; c < n; ++c) a[r][c] -= fac * a[i][c];
            b[r] -= fac * b[i];
        }
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t c = ii + 1; c < n; ++c) s -= a[ii][c] * x[c];
        x[ii] = s / a[ii][ii];
    }
    return true;
}

inline double sse(const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return s;
}

}  // namespace detail

// Minimizes ||residual(x)||^2. Rejected trial steps raise the damping,
// accepted ones lower it, so the objective is non-increasing across accepted
// iterations. A trial point where the residual goes non-finite counts as a
// rejection; non-finite values at an accepted iterate are a NumericalError.
inline LmResult lm_minimize(const ResidualFn& residual, const JacobianFn& jacobian,
                            std::vector<double> init, const FitOptions& opts = {}) {
    opts.validate();
    const std::size_t n = init.size();
    if (n == 0) throw NumericalError("lm_minimize: empty parameter vector");
    if (!detail::all_finite(init)) throw NumericalError("lm_minimize: non-finite initial point");

    std::vector<double> x = std::move(init);
    std::vector<double> r = residual(x);
    if (!detail::all_finite(r)) throw NumericalError("lm_minimize: non-finite residual at start");
    const std::size_t m = r.size();
    if (m < n) throw NumericalError("lm_minimize: fewer residuals than parameters");

    auto eval_jacobian = [&](const std::vector<double>& at) {
        std::vector<std::vector<double>> j = jacobian(at);
        if (j.size() != m) throw NumericalError("lm_minimize: jacobian row count mismatch");
        for (const auto& row : j)
            if (row.size() != n) throw NumericalError("lm_minimize: jacobian column count mismatch");
        if (!detail::all_finite(j)) throw NumericalError("lm_minimize: non-finite jacobian");
        return j;
    };

    std::vector<std::vector<double>> jac = eval_jacobian(x);
    double f = detail::sse(r);
    double lambda = opts.lambda0;

    auto normal_matrix = [&]() {
        std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = j; k < n; ++k) a[j][k] += jac[i][j] * jac[i][k];
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < j; ++k) a[j][k] = a[k][j];
        return a;
    };
    auto gradient = [&]() {
        std::vector<double> g(n, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[j] += jac[i][j] * r[i];
        return g;
    };
    auto inf_norm = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double e : v) s = std::max(s, std::fabs(e));
        return s;
    };

    LmResult result;
    std::vector<double> grad = gradient();
    if (inf_norm(grad) <= opts.grad_tol) {
        result.solution = x;
        result.converged = true;
        result.objective = f;
        return result;
    }

    constexpr double kLambdaUp = 10.0;
    constexpr double kLambdaDown = 0.1;
    constexpr double kLambdaMax = 1e14;
    constexpr double kLambdaMin = 1e-14;

    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        result.iterations = iter;
        std::vector<std::vector<double>> a = normal_matrix();
        double max_diag = 0.0;
        for (std::size_t j = 0; j < n; ++j) max_diag = std::max(max_diag, a[j][j]);
        for (std::size_t j = 0; j < n; ++j)
            a[j][j] += lambda * (a[j][j] > 0.0 ? a[j][j] : std::max(max_diag, 1.0));

        std::vector<double> rhs(n);
        for (std::size_t j = 0; j < n; ++j) rhs[j] = -grad[j];

        std::vector<double> step;
        bool solved = detail::solve_linear(a, rhs, step);

        if (solved) {
            double step_norm = 0.0, x_norm = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                step_norm += step[j] * step[j];
                x_norm += x[j] * x[j];
            }
            step_norm = std::sqrt(step_norm);
            x_norm = std::sqrt(x_norm);
            if (step_norm <= opts.step_tol * (x_norm + opts.step_tol)) {
                result.converged = true;
                break;
            }

            std::vector<double> x_trial(n);
            for (std::size_t j = 0; j < n; ++j) x_trial[j] = x[j] + step[j];
            std::vector<double> r_trial = residual(x_trial);
            if (r_trial.size() != m)
                throw NumericalError("lm_minimize: residual size changed between calls");

            const double f_trial =
                detail::all_finite(r_trial) ? detail::sse(r_trial)
                                            : std::numeric_limits<double>::infinity();
            if (f_trial < f) {
                x = std::move(x_trial);
                r = std::move(r_trial);
                f = f_trial;
                jac = eval_jacobian(x);
                grad = gradient();
                lambda = std::max(lambda * kLambdaDown, kLambdaMin);
                if (inf_norm(grad) <= opts.grad_tol) {
                    result.converged = true;
                    break;
                }
                continue;
            }
        }

        lambda *= kLambdaUp;
        if (lambda > kLambdaMax) break;  // stuck; report non-converged
    }

    result.solution = std::move(x);
    result.objective = f;
    return result;
}

}  // namespace sigfd
