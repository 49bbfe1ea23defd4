#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sigfd/errors.hpp"
#include "sigfd/ingestion.hpp"

// Figure-style SVG: binned (flow, normalized speed) dots per segment with
// the segment's dash-dotted FD curve in the same color. Output bytes are a
// pure function of the inputs.

namespace sigfd {

struct PlotSeries {
    std::string segment_id;
    std::vector<BinnedPoint> bins;
    double v_max;
};

struct PlotCurve {
    std::string segment_id;
    std::vector<std::pair<double, double>> points;  // (flow, speed km/h)
    double v_max;
};

namespace detail {

inline const char* plot_color(std::size_t i) {
    static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                     "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return kPalette[i % 10];
}

inline std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace detail

// Every curve must belong to a plotted segment; normalization uses each
// input's own v_max (the caller guarantees they agree per segment).
inline std::string render_plot_svg(std::vector<PlotSeries> series, std::vector<PlotCurve> curves) {
    std::sort(series.begin(), series.end(),
              [](const PlotSeries& a, const PlotSeries& b) { return a.segment_id < b.segment_id; });
    std::sort(curves.begin(), curves.end(),
              [](const PlotCurve& a, const PlotCurve& b) { return a.segment_id < b.segment_id; });

    std::set<std::string> series_ids;
    for (const auto& s : series) series_ids.insert(s.segment_id);
    for (const auto& c : curves)
        if (!series_ids.count(c.segment_id))
            throw DataError("curve for segment '" + c.segment_id + "' has no matching data series");

    std::map<std::string, std::size_t> color_of;
    for (const auto& s : series) color_of.emplace(s.segment_id, color_of.size());

    double q_max = 0.0;
    for (const auto& s : series)
        for (const auto& b : s.bins) q_max = std::max(q_max, b.bin_center);
    for (const auto& c : curves)
        for (const auto& [q, v] : c.points) q_max = std::max(q_max, q);
    if (q_max <= 0.0) q_max = 1.0;
    q_max = std::ceil(q_max / 50.0) * 50.0;

    constexpr double kW = 860.0, kH = 560.0;
    constexpr double kLeft = 70.0, kRight = 30.0, kTop = 30.0, kBottom = 60.0;
    const double plot_w = kW - kLeft - kRight;
    const double plot_h = kH - kTop - kBottom;
    const double y_max = 1.05;

    auto sx = [&](double q) { return kLeft + plot_w * (q / q_max); };
    auto sy = [&](double y) { return kTop + plot_h * (1.0 - y / y_max); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
        << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n";
    svg << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";

    // axes and ticks
    svg << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n";
    svg << "<line x1=\"" << detail::fmt2(kLeft) << "\" y1=\"" << detail::fmt2(kTop + plot_h)
        << "\" x2=\"" << detail::fmt2(kLeft + plot_w) << "\" y2=\"" << detail::fmt2(kTop + plot_h)
        << "\"/>\n";
    svg << "<line x1=\"" << detail::fmt2(kLeft) << "\" y1=\"" << detail::fmt2(kTop) << "\" x2=\""
        << detail::fmt2(kLeft) << "\" y2=\"" << detail::fmt2(kTop + plot_h) << "\"/>\n";
    svg << "</g>\n";
    svg << "<g class=\"labels\" font-family=\"sans-serif\" font-size=\"13\" fill=\"black\">\n";
    for (int i = 0; i <= 5; ++i) {
        const double q = q_max * i / 5.0;
        svg << "<text x=\"" << detail::fmt2(sx(q)) << "\" y=\"" << detail::fmt2(kTop + plot_h + 20)
            << "\" text-anchor=\"middle\">" << detail::fmt2(q) << "</text>\n";
    }
    for (int i = 0; i <= 5; ++i) {
        const double y = 1.0 * i / 5.0;
        svg << "<text x=\"" << detail::fmt2(kLeft - 8) << "\" y=\"" << detail::fmt2(sy(y) + 4)
            << "\" text-anchor=\"end\">" << detail::fmt2(y) << "</text>\n";
    }
    svg << "<text x=\"" << detail::fmt2(kLeft + plot_w / 2) << "\" y=\""
        << detail::fmt2(kH - 15) << "\" text-anchor=\"middle\">flow (veh/hr-lane)</text>\n";
    svg << "<text x=\"18\" y=\"" << detail::fmt2(kTop + plot_h / 2)
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << detail::fmt2(kTop + plot_h / 2) << ")\">speed / speed limit</text>\n";
    svg << "</g>\n";

    for (const auto& s : series) {
        const char* color = detail::plot_color(color_of.at(s.segment_id));
        svg << "<g class=\"points\" data-segment=\"" << s.segment_id << "\" fill=\"" << color
            << "\">\n";
        for (const auto& b : s.bins)
            svg << "<circle cx=\"" << detail::fmt2(sx(b.bin_center)) << "\" cy=\""
                << detail::fmt2(sy(b.mean_speed / s.v_max)) << "\" r=\"3\"/>\n";
        svg << "</g>\n";
    }

    for (const auto& c : curves) {
        const char* color = detail::plot_color(color_of.at(c.segment_id));
        svg << "<path class=\"curve\" data-segment=\"" << c.segment_id << "\" fill=\"none\" "
            << "stroke=\"" << color << "\" stroke-width=\"1.5\" stroke-dasharray=\"8 3 2 3\" d=\"";
        for (std::size_t i = 0; i < c.points.size(); ++i)
            svg << (i == 0 ? "M" : " L") << detail::fmt2(sx(c.points[i].first)) << ' '
                << detail::fmt2(sy(c.points[i].second / c.v_max));
        svg << "\"/>\n";
    }

    svg << "</svg>\n";
    return svg.str();
}

}  // namespace sigfd
