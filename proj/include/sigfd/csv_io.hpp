#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "sigfd/calibration.hpp"
#include "sigfd/errors.hpp"
#include "sigfd/ingestion.hpp"

// File formats produced and consumed by the pipeline. Binned output is
// pinned at 6 decimal places so serialize/parse/serialize is byte-stable;
// estimate CSVs use 12 significant digits to preserve recovery precision.

namespace sigfd {

namespace detail {

inline std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline std::string fmt12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace detail

// Writes via a temp file in the same directory, then renames into place.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() +
                              ": " + ec.message());
    }
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() +
                          ": " + ec.message());
}

// --- binned observations -------------------------------------------------

using BinnedBySegment = std::map<std::string, std::vector<BinnedPoint>>;

inline void write_binned_csv(const std::filesystem::path& path, const BinnedBySegment& binned) {
    std::ostringstream out;
    out << "segment_id,bin_index,bin_center,mean_speed,count\n";
    for (const auto& [seg, bins] : binned)
        for (const auto& b : bins)
            out << seg << ',' << b.bin_index << ',' << detail::fmt6(b.bin_center) << ','
                << detail::fmt6(b.mean_speed) << ',' << b.count << '\n';
    atomic_write_file(path, out.str());
}

inline BinnedBySegment read_binned_csv(const std::string& path) {
    bool has_rows = false;
    std::ifstream in =
        detail::open_csv(path, "segment_id,bin_index,bin_center,mean_speed,count", has_rows);
    BinnedBySegment binned;
    if (!has_rows) return binned;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 5)
            throw ParseError(path, line_no, "expected 5 fields, got " + std::to_string(f.size()));
        BinnedPoint b;
        b.bin_index = static_cast<int>(detail::parse_long_field(f[1], path, line_no, "bin_index"));
        b.bin_center = detail::parse_double_field(f[2], path, line_no, "bin_center");
        b.mean_speed = detail::parse_double_field(f[3], path, line_no, "mean_speed");
        b.count = detail::parse_long_field(f[4], path, line_no, "count");
        if (b.count < 1) throw ParseError(path, line_no, "bin count must be >= 1");
        binned[std::string(f[0])].push_back(b);
    }
    return binned;
}

// --- signal plan stats ---------------------------------------------------

inline void write_plan_stats_csv(const std::filesystem::path& path,
                                 const std::vector<SignalPlanStats>& stats) {
    std::ostringstream out;
    out << "segment_id,mean_cycle,mean_green,g\n";
    for (const auto& s : stats)
        out << s.segment_id << ',' << detail::fmt6(s.mean_cycle) << ','
            << detail::fmt6(s.mean_green) << ',' << detail::fmt12(s.g) << '\n';
    atomic_write_file(path, out.str());
}

inline std::vector<SignalPlanStats> read_plan_stats_csv(const std::string& path) {
    bool has_rows = false;
    std::ifstream in = detail::open_csv(path, "segment_id,mean_cycle,mean_green,g", has_rows);
    std::vector<SignalPlanStats> stats;
    if (!has_rows) return stats;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 4)
            throw ParseError(path, line_no, "expected 4 fields, got " + std::to_string(f.size()));
        SignalPlanStats s;
        s.segment_id = std::string(f[0]);
        s.mean_cycle = detail::parse_double_field(f[1], path, line_no, "mean_cycle");
        s.mean_green = detail::parse_double_field(f[2], path, line_no, "mean_green");
        s.g = detail::parse_double_field(f[3], path, line_no, "g");
        stats.push_back(std::move(s));
    }
    return stats;
}

// --- skip report -----------------------------------------------------------

inline void write_skip_report_csv(const std::filesystem::path& path,
                                  const std::vector<SkipRecord>& skipped) {
    std::vector<SkipRecord> sorted = skipped;
    std::sort(sorted.begin(), sorted.end(), [](const SkipRecord& a, const SkipRecord& b) {
        return std::tie(a.segment_id, a.reason) < std::tie(b.segment_id, b.reason);
    });
    std::ostringstream out;
    out << "segment_id,reason,count\n";
    for (const auto& s : sorted) out << s.segment_id << ',' << s.reason << ',' << s.count << '\n';
    atomic_write_file(path, out.str());
}

// --- per-segment fit estimates --------------------------------------------

struct FitCsvRow {
    std::string segment_id;
    double g;
    double alpha;
    double beta;
    double q_cap;
    double rmse;
    double r2;
    long n;
    bool converged;
};

inline void write_fits_csv(const std::filesystem::path& path,
                           const std::vector<SegmentFit>& fits) {
    std::ostringstream out;
    out << "segment_id,g,alpha,beta,q_cap,rmse,r2,n,converged\n";
    for (const auto& f : fits)
        out << f.segment_id << ',' << detail::fmt12(f.g) << ',' << detail::fmt12(f.params.alpha)
            << ',' << detail::fmt12(f.params.beta) << ',' << detail::fmt12(f.params.q_cap) << ','
            << detail::fmt12(f.rmse) << ',' << detail::fmt12(f.r2) << ',' << f.n_points << ','
            << (f.converged ? 1 : 0) << '\n';
    atomic_write_file(path, out.str());
}

inline std::vector<FitCsvRow> read_fits_csv(const std::string& path) {
    bool has_rows = false;
    std::ifstream in =
        detail::open_csv(path, "segment_id,g,alpha,beta,q_cap,rmse,r2,n,converged", has_rows);
    std::vector<FitCsvRow> rows;
    if (!has_rows) return rows;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 9)
            throw ParseError(path, line_no, "expected 9 fields, got " + std::to_string(f.size()));
        FitCsvRow r;
        r.segment_id = std::string(f[0]);
        r.g = detail::parse_double_field(f[1], path, line_no, "g");
        r.alpha = detail::parse_double_field(f[2], path, line_no, "alpha");
        r.beta = detail::parse_double_field(f[3], path, line_no, "beta");
        r.q_cap = detail::parse_double_field(f[4], path, line_no, "q_cap");
        r.rmse = detail::parse_double_field(f[5], path, line_no, "rmse");
        r.r2 = detail::parse_double_field(f[6], path, line_no, "r2");
        r.n = detail::parse_long_field(f[7], path, line_no, "n");
        r.converged = detail::parse_long_field(f[8], path, line_no, "converged") != 0;
        rows.push_back(std::move(r));
    }
    return rows;
}

// --- theta -----------------------------------------------------------------

struct ThetaCsv {
    SignalTheta theta;
    std::string method;
    double pooled_rmse_norm;
    long n_segments;
};

inline void write_theta_csv(const std::filesystem::path& path, const ThetaFit& fit) {
    std::ostringstream out;
    out << "theta0,theta1,theta2,theta3,g_lo,g_hi,method,pooled_rmse_norm,n_segments\n";
    out << detail::fmt12(fit.theta.theta0) << ',' << detail::fmt12(fit.theta.theta1) << ','
        << detail::fmt12(fit.theta.theta2) << ',' << detail::fmt12(fit.theta.theta3) << ','
        << detail::fmt12(fit.theta.g_lo) << ',' << detail::fmt12(fit.theta.g_hi) << ','
        << theta_method_name(fit.method) << ',' << detail::fmt12(fit.residual_summary) << ','
        << fit.per_segment.size() << '\n';
    atomic_write_file(path, out.str());
}

inline ThetaCsv read_theta_csv(const std::string& path) {
    bool has_rows = false;
    std::ifstream in = detail::open_csv(
        path, "theta0,theta1,theta2,theta3,g_lo,g_hi,method,pooled_rmse_norm,n_segments", has_rows);
    if (!has_rows) throw DataError("theta file has no data row: " + path);
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 9)
            throw ParseError(path, line_no, "expected 9 fields, got " + std::to_string(f.size()));
        ThetaCsv t;
        t.theta.theta0 = detail::parse_double_field(f[0], path, line_no, "theta0");
        t.theta.theta1 = detail::parse_double_field(f[1], path, line_no, "theta1");
        t.theta.theta2 = detail::parse_double_field(f[2], path, line_no, "theta2");
        t.theta.theta3 = detail::parse_double_field(f[3], path, line_no, "theta3");
        t.theta.g_lo = detail::parse_double_field(f[4], path, line_no, "g_lo");
        t.theta.g_hi = detail::parse_double_field(f[5], path, line_no, "g_hi");
        t.method = std::string(f[6]);
        t.pooled_rmse_norm = detail::parse_double_field(f[7], path, line_no, "pooled_rmse_norm");
        t.n_segments = detail::parse_long_field(f[8], path, line_no, "n_segments");
        return t;
    }
    throw DataError("theta file has no data row: " + path);
}

// --- predicted curves --------------------------------------------------------

struct CurveCsv {
    std::string segment_id;
    std::vector<std::pair<double, double>> points;  // (flow, speed)
};

inline void write_curve_csv(const std::filesystem::path& path, const std::string& segment_id,
                            const FdCurve& curve) {
    std::ostringstream out;
    out << "segment_id,flow,speed_kmh\n";
    for (const auto& [q, v] : curve.points)
        out << segment_id << ',' << detail::fmt6(q) << ',' << detail::fmt6(v) << '\n';
    atomic_write_file(path, out.str());
}

inline CurveCsv read_curve_csv(const std::string& path) {
    bool has_rows = false;
    std::ifstream in = detail::open_csv(path, "segment_id,flow,speed_kmh", has_rows);
    CurveCsv curve;
    if (!has_rows) throw DataError("curve file is empty: " + path);
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 3)
            throw ParseError(path, line_no, "expected 3 fields, got " + std::to_string(f.size()));
        const std::string seg(f[0]);
        if (curve.points.empty())
            curve.segment_id = seg;
        else if (seg != curve.segment_id)
            throw ParseError(path, line_no, "mixed segment ids in one curve file");
        curve.points.emplace_back(detail::parse_double_field(f[1], path, line_no, "flow"),
                                  detail::parse_double_field(f[2], path, line_no, "speed"));
    }
    if (curve.points.empty()) throw DataError("curve file has no points: " + path);
    return curve;
}

}  // namespace sigfd
