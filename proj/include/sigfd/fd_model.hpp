#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "sigfd/errors.hpp"

// Speed-flow fundamental diagram for signalized urban segments,
//
//     v(q) = v_max * (1 - (q / q_cap)^alpha)^beta,
//
// with the shape exponents optionally tied to the signal plan through the
// green split g:  beta = theta0 + theta1*g,  beta/alpha = theta2 + theta3*g.
// Everything here is a pure function of its arguments.

namespace sigfd {

// Average green-phase fraction of the cycle, in (0, 1).
class GreenSplit {
public:
    explicit GreenSplit(double g) : g_(g) {
        if (!(g > 0.0 && g < 1.0))
            throw DomainError("green split must lie in (0, 1), got " + std::to_string(g));
    }
    double value() const noexcept { return g_; }

private:
    double g_;
};

// One segment's FD shape: speed limit, per-lane capacity, two exponents.
struct FdParams {
    double v_max;   // km/h
    double q_cap;   // veh/hr-lane
    double alpha;   // dimensionless, > 0
    double beta;    // dimensionless, > 0

    void validate() const {
        if (!(v_max > 0.0 && q_cap > 0.0 && alpha > 0.0 && beta > 0.0) ||
            !std::isfinite(v_max) || !std::isfinite(q_cap) ||
            !std::isfinite(alpha) || !std::isfinite(beta))
            throw DomainError("FdParams requires finite positive v_max, q_cap, alpha, beta");
    }
};

// City-wide coefficients mapping green split to (alpha, beta), valid on
// [g_lo, g_hi]. The default range matches the segments used for validation.
struct SignalTheta {
    double theta0;
    double theta1;
    double theta2;
    double theta3;
    double g_lo = 0.3;
    double g_hi = 0.8;

    double beta_at(double g) const noexcept { return theta0 + theta1 * g; }
    double ratio_at(double g) const noexcept { return theta2 + theta3 * g; }
};

namespace detail {

// Unchecked kernels shared by the public entry points and the fitters. The
// fitters call these at trial parameters where throwing would be wrong: a
// non-finite result there is a rejected step, not an error.
inline double fd_speed_raw(double v_max, double q_cap, double alpha, double beta,
                           double q) noexcept {
    const double u = q / q_cap;
    return v_max * std::pow(1.0 - std::pow(u, alpha), beta);
}

struct FdPartials {
    double dv_dalpha;
    double dv_dbeta;
};

inline FdPartials fd_partials_raw(double v_max, double q_cap, double alpha, double beta,
                                  double q) noexcept {
    const double u = q / q_cap;
    const double ua = std::pow(u, alpha);
    const double core = 1.0 - ua;
    const double v = v_max * std::pow(core, beta);
    return {-v_max * beta * std::pow(core, beta - 1.0) * ua * std::log(u),
            v * std::log(core)};
}

}  // namespace detail

inline double eval_speed(const FdParams& p, double q) {
    p.validate();
    if (!(q >= 0.0 && q <= p.q_cap))
        throw DomainError("flow " + std::to_string(q) + " outside [0, q_cap=" +
                          std::to_string(p.q_cap) + "]");
    return detail::fd_speed_raw(p.v_max, p.q_cap, p.alpha, p.beta, q);
}

// Partials of v with respect to (alpha, beta). Endpoints are excluded:
// ln(u) diverges at q = 0 and ln(1 - u^alpha) at q = q_cap.
inline std::pair<double, double> eval_speed_grad(const FdParams& p, double q) {
    p.validate();
    if (!(q > 0.0 && q < p.q_cap))
        throw DomainError("gradient defined only on the open interval (0, q_cap)");
    const auto d = detail::fd_partials_raw(p.v_max, p.q_cap, p.alpha, p.beta, q);
    return {d.dv_dalpha, d.dv_dbeta};
}

inline FdParams params_from_signal(const SignalTheta& th, const GreenSplit& g,
                                   double v_max, double q_cap) {
    const double beta = th.beta_at(g.value());
    const double ratio = th.ratio_at(g.value());
    if (!(beta > 0.0))
        throw ParamError("theta yields non-positive beta=" + std::to_string(beta) +
                         " at g=" + std::to_string(g.value()));
    if (!(ratio > 0.0))
        throw ParamError("theta yields non-positive beta/alpha=" + std::to_string(ratio) +
                         " at g=" + std::to_string(g.value()));
    FdParams p{v_max, q_cap, beta / ratio, beta};
    p.validate();
    return p;
}

// One sampled FD curve; flows strictly increasing, speeds non-increasing.
struct FdCurve {
    std::vector<std::pair<double, double>> points;  // (flow, speed)
    FdParams params;
    double g = 0.0;  // provenance; 0 when not signal-derived
};

inline FdCurve predict_curve(const SignalTheta& th, const GreenSplit& g,
                             double v_max, double q_cap, std::size_t n_points) {
    if (n_points < 2)
        throw DomainError("a curve needs at least 2 points");
    const FdParams p = params_from_signal(th, g, v_max, q_cap);
    FdCurve curve{{}, p, g.value()};
    curve.points.reserve(n_points);
    for (std::size_t k = 0; k < n_points; ++k) {
        const double q = q_cap * (static_cast<double>(k) / static_cast<double>(n_points - 1));
        curve.points.emplace_back(q, eval_speed(p, q));
    }
    return curve;
}

struct AuditViolation {
    double q;
    double g_low;
    double g_high;
    double delta_v;  // v(g_high) - v(g_low), negative past tolerance
};

struct AuditReport {
    bool pass = true;
    std::vector<AuditViolation> violations;
};

// Checks the empirical "curves shift up with green split" observation on a
// grid. Diagnostic only: it is not a theorem for arbitrary theta.
inline AuditReport audit_monotone_in_green(const SignalTheta& th, double v_max, double q_cap,
                                           const std::vector<double>& g_grid,
                                           const std::vector<double>& q_grid) {
    for (std::size_t i = 1; i < g_grid.size(); ++i)
        if (!(g_grid[i] > g_grid[i - 1]))
            throw DomainError("g_grid must be strictly increasing");
    AuditReport report;
    if (g_grid.size() < 2) return report;  // vacuous
    const double tol = 1e-9 * v_max;
    std::vector<FdParams> params;
    params.reserve(g_grid.size());
    for (double g : g_grid)
        params.push_back(params_from_signal(th, GreenSplit(g), v_max, q_cap));
    for (double q : q_grid) {
        if (!(q > 0.0 && q < q_cap))
            throw DomainError("audit q_grid must lie inside (0, q_cap)");
        for (std::size_t i = 0; i + 1 < g_grid.size(); ++i) {
            const double v_lo = eval_speed(params[i], q);
            const double v_hi = eval_speed(params[i + 1], q);
            if (v_hi < v_lo - tol) {
                report.pass = false;
                report.violations.push_back({q, g_grid[i], g_grid[i + 1], v_hi - v_lo});
            }
        }
    }
    return report;
}

}  // namespace sigfd
