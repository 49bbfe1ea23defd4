#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sigfd/calibration.hpp"
#include "sigfd/config_io.hpp"
#include "sigfd/csv_io.hpp"
#include "sigfd/errors.hpp"
#include "sigfd/fd_model.hpp"
#include "sigfd/ingestion.hpp"
#include "sigfd/oracle_sim.hpp"
#include "sigfd/plot.hpp"

// Command-line front end. Exit codes: 0 success, 2 parse/data error,
// 3 config error (missing inputs, bad config, unwritable outputs),
// 4 audit violations. Defaults encode the study protocol: 30 veh/hr-lane
// bins, weekday 07:00-20:00 window, cycle 114 +/- 5 s, phases 2 & 6.

namespace sigfd::cli {

constexpr int kExitOk = 0;
constexpr int kExitData = 2;
constexpr int kExitConfig = 3;
constexpr int kExitAudit = 4;

struct IngestArgs {
    std::string counts;
    std::string speeds;
    std::string events_dir;
    std::string segments;
    std::string out_dir;
    double bin_width = 30.0;
    unsigned window_start = 7;
    unsigned window_end = 20;
    double cycle_target = 114.0;
    double cycle_tol = 5.0;
    std::vector<int> phases{2, 6};
};

struct FitArgs {
    std::string binned;
    std::string plan_stats;
    std::string segments;
    std::string out;
    long min_count = 1;
    int max_iter = 200;
    bool unweighted = false;
    std::string method = "two_stage";  // fit-theta only
};

struct PredictArgs {
    std::string theta;
    double g = 0.5;
    double v_max = 50.0;
    double q_cap = 600.0;
    std::size_t n_points = 50;
    std::string segment_id = "curve";
    std::string out;
};

struct AuditArgs {
    std::string theta;
    double g_lo = 0.0;  // 0 = take from theta file
    double g_hi = 0.0;
    std::size_t g_steps = 11;
    std::size_t q_steps = 25;
    double v_max = 1.0;
    double q_cap = 1.0;
};

struct PlotArgs {
    std::string binned;
    std::vector<std::string> curves;
    std::string segments;
    std::string out;
};

inline void require_readable(const std::string& path, const char* what) {
    if (!std::filesystem::exists(path))
        throw ConfigError(std::string(what) + " file not found: " + path);
}

inline int cmd_ingest(const IngestArgs& args) {
    require_readable(args.counts, "counts");
    require_readable(args.speeds, "speeds");
    require_readable(args.segments, "segments config");
    if (!std::filesystem::is_directory(args.events_dir))
        throw ConfigError("events directory not found: " + args.events_dir);

    const SegmentConfigMap config = read_segments_json(args.segments);
    const auto counts = parse_counts(args.counts);
    const auto speeds = parse_speeds(args.speeds);

    AggregateResult agg = aggregate_hourly(counts, speeds, config);
    const auto windowed = filter_study_window(agg.observations, args.window_start, args.window_end);

    std::map<std::string, std::vector<SegmentObservation>> by_segment;
    for (const auto& o : windowed) by_segment[o.segment_id].push_back(o);

    const std::set<int> phases(args.phases.begin(), args.phases.end());
    std::vector<SignalPlanStats> all_stats;
    for (auto& [seg, obs] : by_segment) {
        const std::filesystem::path events_path =
            std::filesystem::path(args.events_dir) / (seg + ".csv");
        if (!std::filesystem::exists(events_path)) {
            agg.skipped.push_back({seg, "missing_events", static_cast<long>(obs.size())});
            continue;
        }
        const auto events = parse_signal_events(events_path.string());
        all_stats.push_back(compute_green_split(events, phases, std::nullopt, seg));
    }

    const auto kept_stats = filter_cycle_length(all_stats, args.cycle_target, args.cycle_tol);
    std::set<std::string> kept_ids;
    for (const auto& s : kept_stats) kept_ids.insert(s.segment_id);
    for (const auto& s : all_stats)
        if (!kept_ids.count(s.segment_id))
            agg.skipped.push_back({s.segment_id, "cycle_filter",
                                   static_cast<long>(by_segment[s.segment_id].size())});

    BinnedBySegment binned;
    for (const auto& s : kept_stats) binned[s.segment_id] = bin_flows(by_segment[s.segment_id], args.bin_width);

    const std::filesystem::path out(args.out_dir);
    write_binned_csv(out / "binned.csv", binned);
    write_plan_stats_csv(out / "plan_stats.csv", kept_stats);
    write_skip_report_csv(out / "skips.csv", agg.skipped);
    std::cout << "ingest: " << binned.size() << " segments -> " << (out / "binned.csv").string()
              << '\n';
    return kExitOk;
}

// Shared by fit and fit-theta: per-segment bins with v_max, q_cap, g
// resolved, bins above q_cap dropped (warned, not failed).
inline std::vector<SegmentData> load_fit_inputs(const FitArgs& args) {
    require_readable(args.binned, "binned");
    require_readable(args.plan_stats, "plan stats");
    require_readable(args.segments, "segments config");
    const BinnedBySegment binned = read_binned_csv(args.binned);
    if (binned.empty()) throw DataError("no binned observations in " + args.binned);
    const SegmentConfigMap config = read_segments_json(args.segments);
    std::map<std::string, double> g_of;
    for (const auto& s : read_plan_stats_csv(args.plan_stats)) g_of[s.segment_id] = s.g;

    std::vector<SegmentData> segments;
    for (const auto& [seg, bins] : binned) {
        const auto git = g_of.find(seg);
        if (git == g_of.end()) throw DataError("no plan stats entry for segment '" + seg + "'");
        const auto cit = config.find(seg);
        if (cit == config.end()) throw ConfigError("no config entry for segment '" + seg + "'");
        SegmentData data;
        data.segment_id = seg;
        data.v_max = cit->second.v_max_kmh;
        data.g = git->second;
        data.q_cap = cit->second.q_cap_override ? *cit->second.q_cap_override
                                                : estimate_qcap(bins, args.min_count);
        long dropped = 0;
        for (const auto& b : bins) {
            if (b.bin_center > 0.0 && b.bin_center < data.q_cap)
                data.bins.push_back(b);
            else
                dropped += b.count;
        }
        if (dropped > 0)
            std::cerr << "warning: segment '" << seg << "': dropped " << dropped
                      << " observations outside (0, q_cap=" << data.q_cap << ")\n";
        segments.push_back(std::move(data));
    }
    return segments;
}

inline FitOptions fit_options_from(const FitArgs& args) {
    FitOptions opts;
    opts.max_iter = args.max_iter;
    opts.weight_by_count = !args.unweighted;
    return opts;
}

inline int cmd_fit(const FitArgs& args) {
    const auto segments = load_fit_inputs(args);
    const FitOptions opts = fit_options_from(args);
    std::vector<SegmentFit> fits;
    for (const auto& seg : segments)
        fits.push_back(fit_segment(seg.bins, seg.v_max, seg.q_cap, GreenSplit(seg.g), opts,
                                   seg.segment_id));
    write_fits_csv(args.out, fits);
    std::cout << "fit: " << fits.size() << " segments -> " << args.out << '\n';
    return kExitOk;
}

inline int cmd_fit_theta(const FitArgs& args) {
    const auto segments = load_fit_inputs(args);
    const FitOptions opts = fit_options_from(args);
    std::vector<SegmentFit> stage1;
    for (const auto& seg : segments)
        stage1.push_back(fit_segment(seg.bins, seg.v_max, seg.q_cap, GreenSplit(seg.g), opts,
                                     seg.segment_id));
    ThetaFit result = fit_theta_two_stage(stage1, segments, opts.weight_by_count);
    if (args.method == "joint") {
        std::vector<double> gs;
        for (const auto& seg : segments) gs.push_back(seg.g);
        SignalTheta init = result.theta;
        if (!theta_feasible_for(init, gs)) {
            init = feasible_theta_init(stage1);
            std::cerr << "warning: two-stage theta infeasible at some observed g; "
                         "initializing joint fit from the endpoint chords\n";
        }
        result = fit_theta_joint(segments, init, opts);
    } else if (args.method != "two_stage") {
        throw ConfigError("unknown method '" + args.method + "' (two_stage or joint)");
    }
    write_theta_csv(args.out, result);
    std::cout << "fit-theta (" << theta_method_name(result.method) << "): theta=("
              << result.theta.theta0 << ", " << result.theta.theta1 << ", " << result.theta.theta2
              << ", " << result.theta.theta3 << "), pooled rmse " << result.residual_summary
              << " -> " << args.out << '\n';
    return kExitOk;
}

inline int cmd_predict(const PredictArgs& args) {
    require_readable(args.theta, "theta");
    const ThetaCsv theta = read_theta_csv(args.theta);
    const FdCurve curve =
        predict_curve(theta.theta, GreenSplit(args.g), args.v_max, args.q_cap, args.n_points);
    write_curve_csv(args.out, args.segment_id, curve);
    std::cout << "predict: " << curve.points.size() << " points -> " << args.out << '\n';
    return kExitOk;
}

inline int cmd_audit(const AuditArgs& args) {
    require_readable(args.theta, "theta");
    const ThetaCsv theta = read_theta_csv(args.theta);
    const double g_lo = args.g_lo > 0.0 ? args.g_lo : theta.theta.g_lo;
    const double g_hi = args.g_hi > 0.0 ? args.g_hi : theta.theta.g_hi;
    if (!(g_lo < g_hi)) throw ConfigError("audit needs g_lo < g_hi");
    if (args.g_steps < 2 || args.q_steps < 1) throw ConfigError("audit grid too small");

    std::vector<double> g_grid, q_grid;
    for (std::size_t i = 0; i < args.g_steps; ++i)
        g_grid.push_back(g_lo + (g_hi - g_lo) * static_cast<double>(i) /
                                    static_cast<double>(args.g_steps - 1));
    for (std::size_t i = 1; i <= args.q_steps; ++i)
        q_grid.push_back(args.q_cap * static_cast<double>(i) /
                         static_cast<double>(args.q_steps + 1));

    const AuditReport report =
        audit_monotone_in_green(theta.theta, args.v_max, args.q_cap, g_grid, q_grid);
    if (report.pass) {
        std::cout << "audit: PASS - speeds non-decreasing in green split over " << args.g_steps
                  << " x " << args.q_steps << " grid\n";
        return kExitOk;
    }
    std::cout << "audit: FAIL - " << report.violations.size() << " violations\n";
    std::size_t shown = 0;
    for (const auto& v : report.violations) {
        if (++shown > 20) {
            std::cout << "  ... (" << report.violations.size() - 20 << " more)\n";
            break;
        }
        char line[128];
        std::snprintf(line, sizeof(line), "  q=%.6g g=%.6g->%.6g dv=%.6g\n", v.q, v.g_low,
                      v.g_high, v.delta_v);
        std::cout << line;
    }
    return kExitAudit;
}

inline int cmd_simulate(const std::string& specs_path, const std::string& out_dir) {
    require_readable(specs_path, "spec");
    const auto specs = read_specs_json(specs_path);
    const CorpusPaths paths = generate_corpus(specs, out_dir);
    std::cout << "simulate: " << specs.size() << " segments -> " << paths.counts.string() << ", "
              << paths.speeds.string() << ", " << paths.segments.string() << ", "
              << paths.events_dir.string() << "/\n";
    return kExitOk;
}

inline int cmd_plot(const PlotArgs& args) {
    require_readable(args.binned, "binned");
    require_readable(args.segments, "segments config");
    const BinnedBySegment binned = read_binned_csv(args.binned);
    const SegmentConfigMap config = read_segments_json(args.segments);

    std::vector<PlotSeries> series;
    for (const auto& [seg, bins] : binned) {
        const auto cit = config.find(seg);
        if (cit == config.end()) throw ConfigError("no config entry for segment '" + seg + "'");
        series.push_back({seg, bins, cit->second.v_max_kmh});
    }

    std::vector<PlotCurve> curves;
    for (const auto& path : args.curves) {
        require_readable(path, "curve");
        const CurveCsv c = read_curve_csv(path);
        double v_max = 0.0;
        for (const auto& [q, v] : c.points) v_max = std::max(v_max, v);
        const auto cit = config.find(c.segment_id);
        if (cit != config.end()) {
            const double cfg = cit->second.v_max_kmh;
            if (std::abs(v_max - cfg) > 1e-6 * cfg + 1e-9)
                throw DataError("curve " + path + ": v_max " + std::to_string(v_max) +
                                " inconsistent with configured " + std::to_string(cfg));
            v_max = cfg;
        }
        curves.push_back({c.segment_id, c.points, v_max});
    }

    const std::size_t n_series = series.size(), n_curves = curves.size();
    const std::string svg = render_plot_svg(std::move(series), std::move(curves));
    atomic_write_file(args.out, svg);
    std::cout << "plot: " << n_series << " series, " << n_curves << " curves -> " << args.out
              << '\n';
    return kExitOk;
}

inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Signal-parametrized fundamental diagrams for signalized urban segments"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI/TOML file");

    IngestArgs ingest_args;
    auto* ingest = app.add_subcommand("ingest", "Aggregate, filter, and bin detector feeds");
    ingest->add_option("--counts", ingest_args.counts, "Lane counts CSV")->required();
    ingest->add_option("--speeds", ingest_args.speeds, "Space-mean speeds CSV")->required();
    ingest->add_option("--events-dir", ingest_args.events_dir,
                       "Directory of per-segment signal event CSVs")->required();
    ingest->add_option("--segments", ingest_args.segments, "Segments config JSON")->required();
    ingest->add_option("--out", ingest_args.out_dir, "Output directory")->required();
    ingest->add_option("--bin-width", ingest_args.bin_width, "Flow bin width, veh/hr-lane");
    ingest->add_option("--window-start", ingest_args.window_start, "Study window start hour");
    ingest->add_option("--window-end", ingest_args.window_end, "Study window end hour (excl.)");
    ingest->add_option("--cycle-target", ingest_args.cycle_target, "Cycle length target, s");
    ingest->add_option("--cycle-tol", ingest_args.cycle_tol, "Cycle length tolerance, s");
    ingest->add_option("--phases", ingest_args.phases, "Protected phases to merge")
        ->delimiter(',');

    FitArgs fit_args;
    auto* fit = app.add_subcommand("fit", "Fit per-segment (alpha, beta)");
    auto add_fit_inputs = [&](CLI::App* cmd, FitArgs& a) {
        cmd->add_option("--binned", a.binned, "Binned observations CSV")->required();
        cmd->add_option("--plan-stats", a.plan_stats, "Signal plan stats CSV")->required();
        cmd->add_option("--segments", a.segments, "Segments config JSON")->required();
        cmd->add_option("--out", a.out, "Output CSV path")->required();
        cmd->add_option("--min-count", a.min_count, "Min bin count for q_cap estimation");
        cmd->add_option("--max-iter", a.max_iter, "Solver iteration cap");
        cmd->add_flag("--unweighted", a.unweighted, "Ignore bin counts as weights");
    };
    add_fit_inputs(fit, fit_args);

    FitArgs theta_args;
    auto* fit_theta = app.add_subcommand("fit-theta", "Fit city-wide theta coefficients");
    add_fit_inputs(fit_theta, theta_args);
    fit_theta->add_option("--method", theta_args.method, "two_stage or joint");

    PredictArgs predict_args;
    auto* predict = app.add_subcommand("predict", "Emit a signal-parametrized FD curve");
    predict->add_option("--theta", predict_args.theta, "Theta CSV")->required();
    predict->add_option("--g", predict_args.g, "Green split")->required();
    predict->add_option("--v-max", predict_args.v_max, "Speed limit, km/h")->required();
    predict->add_option("--q-cap", predict_args.q_cap, "Capacity, veh/hr-lane")->required();
    predict->add_option("-n,--n-points", predict_args.n_points, "Curve sample count");
    predict->add_option("--segment-id", predict_args.segment_id, "Id written into the curve CSV");
    predict->add_option("--out", predict_args.out, "Output CSV path")->required();

    AuditArgs audit_args;
    auto* audit = app.add_subcommand("audit", "Check curves shift up with green split");
    audit->add_option("--theta", audit_args.theta, "Theta CSV")->required();
    audit->add_option("--g-lo", audit_args.g_lo, "Grid lower green split (default: theta file)");
    audit->add_option("--g-hi", audit_args.g_hi, "Grid upper green split (default: theta file)");
    audit->add_option("--g-steps", audit_args.g_steps, "Green split grid size");
    audit->add_option("--q-steps", audit_args.q_steps, "Flow grid size");
    audit->add_option("--v-max", audit_args.v_max, "Speed scale (audit is scale-invariant)");
    audit->add_option("--q-cap", audit_args.q_cap, "Flow scale");

    std::string specs_path, sim_out;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic corpus");
    simulate->add_option("--specs", specs_path, "Synthetic segment specs JSON")->required();
    simulate->add_option("--out", sim_out, "Output directory")->required();

    PlotArgs plot_args;
    auto* plot = app.add_subcommand("plot", "Render data + curves as SVG");
    plot->add_option("--binned", plot_args.binned, "Binned observations CSV")->required();
    plot->add_option("--curves", plot_args.curves, "Curve CSVs (repeatable)");
    plot->add_option("--segments", plot_args.segments, "Segments config JSON")->required();
    plot->add_option("--out", plot_args.out, "Output SVG path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (ingest->parsed()) return cmd_ingest(ingest_args);
        if (fit->parsed()) return cmd_fit(fit_args);
        if (fit_theta->parsed()) return cmd_fit_theta(theta_args);
        if (predict->parsed()) return cmd_predict(predict_args);
        if (audit->parsed()) return cmd_audit(audit_args);
        if (simulate->parsed()) return cmd_simulate(specs_path, sim_out);
        if (plot->parsed()) return cmd_plot(plot_args);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::runtime_error& e) {
        // ParseError, DataError, OrderError, InvariantError, DomainError,
        // ParamError, NumericalError
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return kExitOk;
}

}  // namespace sigfd::cli
