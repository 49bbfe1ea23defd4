#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sigfd/fd_model.hpp"
#include "sigfd/ingestion.hpp"

// Test-side utilities and independent oracles. Nothing here may call the
// implementation path it is used to check.

namespace testutil {

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        const auto base = std::filesystem::temp_directory_path() / "sigfd-tests";
        path_ = base / ("run-" + std::to_string(::getpid()) + "-" +
                        std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

// Central finite differences of eval_speed with respect to alpha and beta;
// the independent check for the analytic partials.
inline double fd_dv_dalpha(const sigfd::FdParams& p, double q, double rel_step = 1e-6) {
    const double h = rel_step * p.alpha;
    sigfd::FdParams hi = p, lo = p;
    hi.alpha += h;
    lo.alpha -= h;
    return (sigfd::eval_speed(hi, q) - sigfd::eval_speed(lo, q)) / (2.0 * h);
}

inline double fd_dv_dbeta(const sigfd::FdParams& p, double q, double rel_step = 1e-6) {
    const double h = rel_step * p.beta;
    sigfd::FdParams hi = p, lo = p;
    hi.beta += h;
    lo.beta -= h;
    return (sigfd::eval_speed(hi, q) - sigfd::eval_speed(lo, q)) / (2.0 * h);
}

// Independent dense least-squares oracle: forms the normal equations and
// solves them by unpivoted Gauss-Jordan (problems are tiny and well posed).
inline std::vector<double> normal_equations_solve(const std::vector<std::vector<double>>& a,
                                                  const std::vector<double>& b) {
    const std::size_t m = a.size(), n = a[0].size();
    std::vector<std::vector<double>> aug(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < m; ++i) aug[j][k] += a[i][j] * a[i][k];
        for (std::size_t i = 0; i < m; ++i) aug[j][n] += a[i][j] * b[i];
    }
    for (std::size_t col = 0; col < n; ++col) {
        const double piv = aug[col][col];
        for (std::size_t k = col; k <= n; ++k) aug[col][k] /= piv;
        for (std::size_t row = 0; row < n; ++row) {
            if (row == col) continue;
            const double f = aug[row][col];
            for (std::size_t k = col; k <= n; ++k) aug[row][k] -= f * aug[col][k];
        }
    }
    std::vector<double> x(n);
    for (std::size_t j = 0; j < n; ++j) x[j] = aug[j][n];
    return x;
}

// Exact-model bins: one BinnedPoint per interior grid flow, speed straight
// off the curve. The inverse-crime input for recovery tests.
inline std::vector<sigfd::BinnedPoint> bins_on_curve(const sigfd::FdParams& p, int n_bins,
                                                     long count = 1) {
    std::vector<sigfd::BinnedPoint> bins;
    for (int i = 0; i < n_bins; ++i) {
        const double q = p.q_cap * (i + 1) / static_cast<double>(n_bins + 1);
        bins.push_back({i, q, sigfd::eval_speed(p, q), count});
    }
    return bins;
}

// One BinnedPoint per observation (count 1): feeds fit_segment with samples
// that sit exactly where they were drawn instead of at aggregated centers.
// Observations truncated to zero speed are dropped, as ingestion would.
inline std::vector<sigfd::BinnedPoint> bins_from_observations(
    const std::vector<sigfd::SegmentObservation>& obs) {
    std::vector<sigfd::BinnedPoint> bins;
    int i = 0;
    for (const auto& o : obs)
        if (o.speed > 0.0) bins.push_back({i++, o.flow, o.speed, 1});
    return bins;
}

}  // namespace testutil
