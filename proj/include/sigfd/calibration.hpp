#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "sigfd/errors.hpp"
#include "sigfd/fd_model.hpp"
#include "sigfd/ingestion.hpp"
#include "sigfd/lm.hpp"

// Per-segment (alpha, beta) estimation from binned observations and the
// city-wide theta fit, two-stage (closed-form stage 2) or joint. Positivity
// of the exponents is enforced by optimizing in log space.

namespace sigfd {

struct SegmentFit {
    std::string segment_id;
    FdParams params;
    double g = 0.0;
    double rmse = 0.0;  // weighted, km/h
    double r2 = 0.0;
    long n_points = 0;
    bool converged = false;
    int iterations = 0;
};

struct Metrics {
    double rmse = 0.0;
    double r2 = 0.0;
    long n = 0;
};

// One segment's inputs to the city-wide theta estimation.
struct SegmentData {
    std::string segment_id;
    std::vector<BinnedPoint> bins;
    double v_max;
    double q_cap;
    double g;
};

enum class ThetaMethod { two_stage, joint };

inline const char* theta_method_name(ThetaMethod m) {
    return m == ThetaMethod::two_stage ? "two_stage" : "joint";
}

struct ThetaFit {
    SignalTheta theta;
    ThetaMethod method = ThetaMethod::two_stage;
    std::vector<SegmentFit> per_segment;
    // rmse over pooled normalized speeds; NaN when no data was supplied to
    // evaluate it (two-stage from bare SegmentFits).
    double residual_summary = std::numeric_limits<double>::quiet_NaN();
    bool converged = true;
    int iterations = 0;
};

namespace detail {

inline Metrics weighted_metrics(const std::vector<double>& observed,
                                const std::vector<double>& predicted,
                                const std::vector<double>& weights) {
    double w_sum = 0.0, wy_sum = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        w_sum += weights[i];
        wy_sum += weights[i] * observed[i];
    }
    const double mean = wy_sum / w_sum;
    double sse = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = observed[i] - predicted[i];
        const double d = observed[i] - mean;
        sse += weights[i] * e * e;
        sst += weights[i] * d * d;
    }
    Metrics m;
    m.rmse = std::sqrt(sse / w_sum);
    m.r2 = sst > 0.0 ? 1.0 - sse / sst : (sse == 0.0 ? 1.0 : 0.0);
    m.n = static_cast<long>(observed.size());
    return m;
}

inline void check_bins_for_fit(const std::vector<BinnedPoint>& bins, double v_max,
                               double q_cap) {
    for (const auto& b : bins) {
        if (!(b.bin_center > 0.0 && b.bin_center < q_cap))
            throw DataError("bin center " + std::to_string(b.bin_center) +
                            " not inside (0, q_cap=" + std::to_string(q_cap) + ")");
        if (!(b.mean_speed > 0.0 && b.mean_speed <= v_max))
            throw DataError("bin mean speed " + std::to_string(b.mean_speed) +
                            " not inside (0, v_max=" + std::to_string(v_max) + "]");
        if (b.count < 1) throw DataError("bin with non-positive count");
    }
}

// Ordinary least squares of y on x: returns (intercept, slope).
inline std::pair<double, double> ols_line(const std::vector<double>& x,
                                          const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw DataError("all abscissae equal: singular regression design");
    const double slope = sxy / sxx;
    return {my - slope * mx, slope};
}

}  // namespace detail

// Conservative per-lane capacity: the upper edge of the highest-flow bin
// holding at least min_count observations. Guarantees every retained bin
// center is interior to [0, q_cap]. Bin width is recovered from the bin's
// own center/index so mixed widths cannot slip through unnoticed.
inline double estimate_qcap(const std::vector<BinnedPoint>& bins, long min_count) {
    const BinnedPoint* top = nullptr;
    for (const auto& b : bins)
        if (b.count >= min_count && (!top || b.bin_index > top->bin_index)) top = &b;
    if (!top)
        throw DataError("no bin with count >= " + std::to_string(min_count) +
                        "; cannot estimate q_cap");
    if (top->bin_index < 0 || !(top->bin_center > 0.0))
        throw DataError("malformed bin (index " + std::to_string(top->bin_index) + ", center " +
                        std::to_string(top->bin_center) + ")");
    const double width = top->bin_center / (static_cast<double>(top->bin_index) + 0.5);
    return static_cast<double>(top->bin_index + 1) * width;
}

// Weighted least squares of the FD against binned (flow, speed) points,
// optimizing (log alpha, log beta).
inline SegmentFit fit_segment(const std::vector<BinnedPoint>& bins, double v_max, double q_cap,
                              const GreenSplit& g, const FitOptions& opts = {},
                              const std::string& segment_id = "") {
    opts.validate();
    if (!(opts.initial_alpha > 0.0 && opts.initial_beta > 0.0))
        throw DomainError("initial alpha and beta must be positive");
    if (bins.size() < 3)
        throw DataError("fit_segment needs at least 3 bins, got " + std::to_string(bins.size()));
    if (!(v_max > 0.0 && q_cap > 0.0)) throw DataError("v_max and q_cap must be positive");
    detail::check_bins_for_fit(bins, v_max, q_cap);

    const std::size_t m = bins.size();
    std::vector<double> w(m), sqrt_w(m);
    for (std::size_t i = 0; i < m; ++i) {
        w[i] = opts.weight_by_count ? static_cast<double>(bins[i].count) : 1.0;
        sqrt_w[i] = std::sqrt(w[i]);
    }

    auto residual = [&](const std::vector<double>& x) {
        const double alpha = std::exp(x[0]);
        const double beta = std::exp(x[1]);
        std::vector<double> r(m);
        for (std::size_t i = 0; i < m; ++i)
            r[i] = sqrt_w[i] *
                   (detail::fd_speed_raw(v_max, q_cap, alpha, beta, bins[i].bin_center) -
                    bins[i].mean_speed);
        return r;
    };
    auto jacobian = [&](const std::vector<double>& x) {
        const double alpha = std::exp(x[0]);
        const double beta = std::exp(x[1]);
        std::vector<std::vector<double>> j(m, std::vector<double>(2));
        for (std::size_t i = 0; i < m; ++i) {
            const auto d = detail::fd_partials_raw(v_max, q_cap, alpha, beta, bins[i].bin_center);
            j[i][0] = sqrt_w[i] * d.dv_dalpha * alpha;  // d/d(log alpha)
            j[i][1] = sqrt_w[i] * d.dv_dbeta * beta;
        }
        return j;
    };

    const LmResult lm = lm_minimize(residual, jacobian,
                                    {std::log(opts.initial_alpha), std::log(opts.initial_beta)},
                                    opts);

    SegmentFit fit;
    fit.segment_id = segment_id;
    fit.params = FdParams{v_max, q_cap, std::exp(lm.solution[0]), std::exp(lm.solution[1])};
    fit.params.validate();
    fit.g = g.value();
    fit.n_points = static_cast<long>(m);
    fit.converged = lm.converged;
    fit.iterations = lm.iterations;

    std::vector<double> obs(m), pred(m);
    for (std::size_t i = 0; i < m; ++i) {
        obs[i] = bins[i].mean_speed;
        pred[i] = eval_speed(fit.params, bins[i].bin_center);
    }
    const Metrics metrics = detail::weighted_metrics(obs, pred, w);
    fit.rmse = metrics.rmse;
    fit.r2 = metrics.r2;
    return fit;
}

// Pooled weighted rmse of normalized speeds under theta-implied curves.
inline double pooled_normalized_rmse(const SignalTheta& theta,
                                     const std::vector<SegmentData>& segments,
                                     bool weight_by_count = true) {
    double sse = 0.0, w_sum = 0.0;
    for (const auto& seg : segments) {
        const FdParams p = params_from_signal(theta, GreenSplit(seg.g), seg.v_max, seg.q_cap);
        for (const auto& b : seg.bins) {
            const double w = weight_by_count ? static_cast<double>(b.count) : 1.0;
            const double e = eval_speed(p, b.bin_center) / seg.v_max - b.mean_speed / seg.v_max;
            sse += w * e * e;
            w_sum += w;
        }
    }
    if (!(w_sum > 0.0)) throw DataError("no observations to pool");
    return std::sqrt(sse / w_sum);
}

// Stage 2 of the two-stage estimator: OLS of beta on g and of beta/alpha
// on g across converged per-segment fits.
inline ThetaFit fit_theta_two_stage(const std::vector<SegmentFit>& fits) {
    if (fits.size() < 2)
        throw DataError("theta fit needs at least 2 segments, got " + std::to_string(fits.size()));
    std::vector<double> gs, betas, ratios;
    double g_lo = 1.0, g_hi = 0.0;
    for (const auto& f : fits) {
        if (!f.converged)
            throw DataError("segment '" + f.segment_id + "' fit did not converge");
        gs.push_back(f.g);
        betas.push_back(f.params.beta);
        ratios.push_back(f.params.beta / f.params.alpha);
        g_lo = std::min(g_lo, f.g);
        g_hi = std::max(g_hi, f.g);
    }
    const auto [b0, b1] = detail::ols_line(gs, betas);
    const auto [r0, r1] = detail::ols_line(gs, ratios);
    ThetaFit result;
    result.theta = SignalTheta{b0, b1, r0, r1, g_lo, g_hi};
    result.method = ThetaMethod::two_stage;
    result.per_segment = fits;
    return result;
}

// The OLS lines can leave the feasible region at the edge of the observed
// g range (beta or beta/alpha strongly curved in g); the pooled rmse is
// then undefined and reported as NaN.
inline ThetaFit fit_theta_two_stage(const std::vector<SegmentFit>& fits,
                                    const std::vector<SegmentData>& segments,
                                    bool weight_by_count = true) {
    ThetaFit result = fit_theta_two_stage(fits);
    try {
        result.residual_summary = pooled_normalized_rmse(result.theta, segments, weight_by_count);
    } catch (const ParamError&) {
        // leave NaN
    }
    return result;
}

inline bool theta_feasible_for(const SignalTheta& theta, const std::vector<double>& gs) {
    for (double g : gs)
        if (!(theta.beta_at(g) > 0.0 && theta.ratio_at(g) > 0.0)) return false;
    return true;
}

// Always-feasible joint-fit initialization: the chords of beta and
// beta/alpha through the lowest- and highest-g stage-1 fits. A line through
// two positive points stays positive between them, so the init satisfies
// the SignalTheta invariant over the observed range even where the OLS
// lines do not.
inline SignalTheta feasible_theta_init(const std::vector<SegmentFit>& fits) {
    if (fits.size() < 2) throw DataError("need at least 2 fits for a theta init");
    const SegmentFit* lo = &fits.front();
    const SegmentFit* hi = &fits.front();
    for (const auto& f : fits) {
        if (f.g < lo->g) lo = &f;
        if (f.g > hi->g) hi = &f;
    }
    if (!(hi->g > lo->g)) throw DataError("all green splits equal: no usable chord");
    const double beta_slope = (hi->params.beta - lo->params.beta) / (hi->g - lo->g);
    const double r_lo = lo->params.beta / lo->params.alpha;
    const double r_hi = hi->params.beta / hi->params.alpha;
    const double ratio_slope = (r_hi - r_lo) / (hi->g - lo->g);
    return SignalTheta{lo->params.beta - beta_slope * lo->g, beta_slope,
                       r_lo - ratio_slope * lo->g, ratio_slope, lo->g, hi->g};
}

// Joint refinement: minimizes the pooled weighted squared error of
// normalized speeds over theta directly. Trial steps leaving the feasible
// region (non-positive beta or beta/alpha at some observed g) are rejected
// by the damping loop.
inline ThetaFit fit_theta_joint(const std::vector<SegmentData>& segments,
                                const SignalTheta& init, const FitOptions& opts = {}) {
    opts.validate();
    if (segments.size() < 2)
        throw DataError("theta fit needs at least 2 segments, got " +
                        std::to_string(segments.size()));
    std::set<double> distinct_g;
    for (const auto& seg : segments) distinct_g.insert(seg.g);
    if (distinct_g.size() < 2) throw DataError("theta fit needs at least 2 distinct green splits");

    std::size_t m = 0;
    double g_lo = 1.0, g_hi = 0.0;
    for (const auto& seg : segments) {
        if (seg.bins.empty()) throw DataError("segment '" + seg.segment_id + "' has no bins");
        detail::check_bins_for_fit(seg.bins, seg.v_max, seg.q_cap);
        if (!(init.beta_at(seg.g) > 0.0 && init.ratio_at(seg.g) > 0.0))
            throw ParamError("initial theta infeasible at g=" + std::to_string(seg.g));
        m += seg.bins.size();
        g_lo = std::min(g_lo, seg.g);
        g_hi = std::max(g_hi, seg.g);
    }

    const auto nan_vector = [m]() {
        return std::vector<double>(m, std::numeric_limits<double>::quiet_NaN());
    };

    auto residual = [&](const std::vector<double>& th) {
        std::vector<double> r;
        r.reserve(m);
        for (const auto& seg : segments) {
            const double beta = th[0] + th[1] * seg.g;
            const double ratio = th[2] + th[3] * seg.g;
            if (!(beta > 0.0 && ratio > 0.0)) return nan_vector();
            const double alpha = beta / ratio;
            for (const auto& b : seg.bins) {
                const double w = opts.weight_by_count ? static_cast<double>(b.count) : 1.0;
                r.push_back(std::sqrt(w) *
                            (detail::fd_speed_raw(1.0, seg.q_cap, alpha, beta, b.bin_center) -
                             b.mean_speed / seg.v_max));
            }
        }
        return r;
    };
    auto jacobian = [&](const std::vector<double>& th) {
        std::vector<std::vector<double>> j;
        j.reserve(m);
        for (const auto& seg : segments) {
            const double beta = th[0] + th[1] * seg.g;
            const double ratio = th[2] + th[3] * seg.g;
            const double alpha = beta / ratio;
            // d alpha / d theta
            const double da[4] = {1.0 / ratio, seg.g / ratio, -beta / (ratio * ratio),
                                  -seg.g * beta / (ratio * ratio)};
            const double db[4] = {1.0, seg.g, 0.0, 0.0};
            for (const auto& b : seg.bins) {
                const double w = opts.weight_by_count ? static_cast<double>(b.count) : 1.0;
                const auto d = detail::fd_partials_raw(1.0, seg.q_cap, alpha, beta, b.bin_center);
                std::vector<double> row(4);
                for (int k = 0; k < 4; ++k)
                    row[k] = std::sqrt(w) * (d.dv_dalpha * da[k] + d.dv_dbeta * db[k]);
                j.push_back(std::move(row));
            }
        }
        return j;
    };

    const LmResult lm = lm_minimize(residual, jacobian,
                                    {init.theta0, init.theta1, init.theta2, init.theta3}, opts);

    ThetaFit result;
    result.theta = SignalTheta{lm.solution[0], lm.solution[1], lm.solution[2], lm.solution[3],
                               g_lo, g_hi};
    result.method = ThetaMethod::joint;
    result.converged = lm.converged;
    result.iterations = lm.iterations;
    result.residual_summary = pooled_normalized_rmse(result.theta, segments, opts.weight_by_count);

    for (const auto& seg : segments) {
        SegmentFit sf;
        sf.segment_id = seg.segment_id;
        sf.params = params_from_signal(result.theta, GreenSplit(seg.g), seg.v_max, seg.q_cap);
        sf.g = seg.g;
        sf.n_points = static_cast<long>(seg.bins.size());
        sf.converged = lm.converged;
        sf.iterations = lm.iterations;
        std::vector<double> obs, pred, w;
        for (const auto& b : seg.bins) {
            obs.push_back(b.mean_speed);
            pred.push_back(eval_speed(sf.params, b.bin_center));
            w.push_back(static_cast<double>(b.count));
        }
        const Metrics metrics = detail::weighted_metrics(obs, pred, w);
        sf.rmse = metrics.rmse;
        sf.r2 = metrics.r2;
        result.per_segment.push_back(std::move(sf));
    }
    return result;
}

// Weighted rmse and r2 of the fitted curve against binned data.
inline Metrics goodness(const SegmentFit& fit, const std::vector<BinnedPoint>& bins) {
    if (bins.empty()) throw DataError("goodness: empty data");
    std::vector<double> obs, pred, w;
    for (const auto& b : bins) {
        obs.push_back(b.mean_speed);
        pred.push_back(eval_speed(fit.params, b.bin_center));
        w.push_back(static_cast<double>(b.count));
    }
    return detail::weighted_metrics(obs, pred, w);
}

// Pooled normalized-speed metrics of theta-implied curves across segments.
inline Metrics goodness(const ThetaFit& fit, const std::vector<SegmentData>& segments) {
    std::vector<double> obs, pred, w;
    for (const auto& seg : segments) {
        const FdParams p = params_from_signal(fit.theta, GreenSplit(seg.g), seg.v_max, seg.q_cap);
        for (const auto& b : seg.bins) {
            obs.push_back(b.mean_speed / seg.v_max);
            pred.push_back(eval_speed(p, b.bin_center) / seg.v_max);
            w.push_back(static_cast<double>(b.count));
        }
    }
    if (obs.empty()) throw DataError("goodness: empty data");
    return detail::weighted_metrics(obs, pred, w);
}

}  // namespace sigfd
