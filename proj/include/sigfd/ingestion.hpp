#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sigfd/errors.hpp"
#include "sigfd/time_util.hpp"

// Detector-feed ingestion: CSV parsers for counts / speeds / signal events,
// hourly per-lane aggregation, green-split extraction, the study filters
// (weekday 07:00-20:00 window, cycle length 114 +/- 5 s), and 30 veh/hr-lane
// flow binning.

namespace sigfd {

struct CountRecord {
    std::string segment_id;
    std::string lane_id;
    std::int64_t timestamp;  // local epoch seconds
    long count;
};

struct SpeedRecord {
    std::string segment_id;
    std::int64_t timestamp;
    double speed_kmh;
};

enum class EventKind { green_start, green_end, cycle_start };

struct SignalEvent {
    double timestamp;  // seconds
    int phase;
    EventKind kind;
};

// One segment-hour after aggregation: per-lane flow and space-mean speed.
struct SegmentObservation {
    std::string segment_id;
    std::int64_t hour_start;  // local epoch seconds, hour-aligned
    double flow;              // veh/hr-lane
    double speed;             // km/h
};

struct BinnedPoint {
    int bin_index;
    double bin_center;  // (bin_index + 0.5) * width
    double mean_speed;
    long count;
};

struct SignalPlanStats {
    std::string segment_id;
    double mean_cycle;  // s
    double mean_green;  // s
    double g;           // mean_green / mean_cycle
};

struct SegmentConfig {
    long lane_count = 1;
    double v_max_kmh = 0.0;
    std::optional<double> q_cap_override;
};

using SegmentConfigMap = std::map<std::string, SegmentConfig>;

struct SkipRecord {
    std::string segment_id;
    std::string reason;
    long count;
};

struct AggregateResult {
    std::vector<SegmentObservation> observations;  // sorted by (segment_id, hour)
    std::vector<SkipRecord> skipped;
};

namespace detail {

inline std::string_view trim(std::string_view sv) {
    while (!sv.empty() && (sv.front() == ' ' || sv.front() == '\t')) sv.remove_prefix(1);
    while (!sv.empty() && (sv.back() == ' ' || sv.back() == '\t' || sv.back() == '\r'))
        sv.remove_suffix(1);
    return sv;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return fields;
}

inline double parse_double_field(std::string_view sv, const std::string& path,
                                 std::size_t line, const char* what) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), value);
    if (ec != std::errc{} || ptr != sv.data() + sv.size())
        throw ParseError(path, line, std::string("invalid ") + what + ": '" + std::string(sv) + "'");
    return value;
}

inline long parse_long_field(std::string_view sv, const std::string& path,
                             std::size_t line, const char* what) {
    long value = 0;
    const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), value);
    if (ec != std::errc{} || ptr != sv.data() + sv.size())
        throw ParseError(path, line, std::string("invalid ") + what + ": '" + std::string(sv) + "'");
    return value;
}

inline std::int64_t parse_timestamp_field(std::string_view sv, const std::string& path,
                                          std::size_t line) {
    try {
        return parse_iso_datetime(sv);
    } catch (const DataError& e) {
        throw ParseError(path, line, e.what());
    }
}

// Opens a CSV file and checks the header. A zero-byte file is valid and
// yields no rows; a wrong header is a parse error on line 1.
inline std::ifstream open_csv(const std::string& path, const char* expected_header,
                              bool& has_rows) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open input file: " + path);
    std::string header;
    if (!std::getline(in, header)) {
        has_rows = false;
        return in;
    }
    if (std::string(trim(header)) != expected_header)
        throw ParseError(path, 1, "expected header '" + std::string(expected_header) +
                                      "', got '" + std::string(trim(header)) + "'");
    has_rows = true;
    return in;
}

}  // namespace detail

// --- input feed parsers ----------------------------------------------------

inline std::vector<CountRecord> parse_counts(const std::string& path) {
    bool has_rows = false;
    std::ifstream in = detail::open_csv(path, "segment_id,lane_id,timestamp,count", has_rows);
    std::vector<CountRecord> records;
    if (!has_rows) return records;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv(line);
        if (fields.size() != 4)
            throw ParseError(path, line_no, "expected 4 fields, got " + std::to_string(fields.size()));
        CountRecord rec;
        rec.segment_id = std::string(fields[0]);
        rec.lane_id = std::string(fields[1]);
        rec.timestamp = detail::parse_timestamp_field(fields[2], path, line_no);
        rec.count = detail::parse_long_field(fields[3], path, line_no, "count");
        if (rec.segment_id.empty()) throw ParseError(path, line_no, "empty segment_id");
        if (rec.count < 0) throw ParseError(path, line_no, "negative count");
        records.push_back(std::move(rec));
    }
    return records;
}

inline std::vector<SpeedRecord> parse_speeds(const std::string& path) {
    bool has_rows = false;
    std::ifstream in = detail::open_csv(path, "segment_id,timestamp,speed_kmh", has_rows);
    std::vector<SpeedRecord> records;
    if (!has_rows) return records;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv(line);
        if (fields.size() != 3)
            throw ParseError(path, line_no, "expected 3 fields, got " + std::to_string(fields.size()));
        SpeedRecord rec;
        rec.segment_id = std::string(fields[0]);
        rec.timestamp = detail::parse_timestamp_field(fields[1], path, line_no);
        rec.speed_kmh = detail::parse_double_field(fields[2], path, line_no, "speed");
        if (rec.segment_id.empty()) throw ParseError(path, line_no, "empty segment_id");
        if (rec.speed_kmh < 0.0) throw ParseError(path, line_no, "negative speed");
        records.push_back(std::move(rec));
    }
    return records;
}

// Events are returned sorted by timestamp. Unknown phases are retained for
// later filtering, but every phase must have well-paired green intervals;
// a green_end with no open green is a corrupt log.
inline std::vector<SignalEvent> parse_signal_events(const std::string& path) {
    bool has_rows = false;
    std::ifstream in = detail::open_csv(path, "timestamp,phase,kind", has_rows);
    std::vector<SignalEvent> events;
    if (!has_rows) return events;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv(line);
        if (fields.size() != 3)
            throw ParseError(path, line_no, "expected 3 fields, got " + std::to_string(fields.size()));
        SignalEvent ev;
        const std::string_view ts = fields[0];
        if (ts.find('-') != std::string_view::npos && ts.find(':') != std::string_view::npos)
            ev.timestamp = static_cast<double>(detail::parse_timestamp_field(ts, path, line_no));
        else
            ev.timestamp = detail::parse_double_field(ts, path, line_no, "timestamp");
        ev.phase = static_cast<int>(detail::parse_long_field(fields[1], path, line_no, "phase"));
        const std::string_view kind = fields[2];
        if (kind == "green_start")
            ev.kind = EventKind::green_start;
        else if (kind == "green_end")
            ev.kind = EventKind::green_end;
        else if (kind == "cycle_start")
            ev.kind = EventKind::cycle_start;
        else
            throw ParseError(path, line_no, "unknown event kind: '" + std::string(kind) + "'");
        events.push_back(ev);
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const SignalEvent& a, const SignalEvent& b) { return a.timestamp < b.timestamp; });

    std::map<int, bool> green_open;
    for (const auto& ev : events) {
        if (ev.kind == EventKind::green_start) {
            if (green_open[ev.phase])
                throw OrderError(path + ": phase " + std::to_string(ev.phase) +
                                 " green_start at t=" + std::to_string(ev.timestamp) +
                                 " while green already open");
            green_open[ev.phase] = true;
        } else if (ev.kind == EventKind::green_end) {
            if (!green_open[ev.phase])
                throw OrderError(path + ": phase " + std::to_string(ev.phase) +
                                 " green_end at t=" + std::to_string(ev.timestamp) +
                                 " precedes its green_start");
            green_open[ev.phase] = false;
        }
    }
    return events;
}

// --- aggregation -------------------------------------------------------

// Per segment-hour: flow = sum of all lane counts / lane_count (veh/hr-lane),
// speed = plain mean of the hour's speed records. Hours missing either side
// are dropped and tallied.
inline AggregateResult aggregate_hourly(const std::vector<CountRecord>& counts,
                                        const std::vector<SpeedRecord>& speeds,
                                        const SegmentConfigMap& config) {
    using Key = std::pair<std::string, std::int64_t>;
    std::map<Key, long> count_sum;
    std::map<Key, std::pair<double, long>> speed_acc;  // (sum, n)

    for (const auto& rec : counts) {
        if (config.find(rec.segment_id) == config.end())
            throw ConfigError("segment '" + rec.segment_id + "' present in counts has no config entry");
        count_sum[{rec.segment_id, align_to_hour(rec.timestamp)}] += rec.count;
    }
    for (const auto& rec : speeds) {
        auto& acc = speed_acc[{rec.segment_id, align_to_hour(rec.timestamp)}];
        acc.first += rec.speed_kmh;
        acc.second += 1;
    }

    AggregateResult result;
    std::map<std::string, long> missing_speed, missing_counts;
    for (const auto& [key, total] : count_sum) {
        const auto speed_it = speed_acc.find(key);
        if (speed_it == speed_acc.end()) {
            ++missing_speed[key.first];
            continue;
        }
        const long lanes = config.at(key.first).lane_count;
        if (lanes < 1)
            throw ConfigError("segment '" + key.first + "' has non-positive lane_count");
        SegmentObservation obs;
        obs.segment_id = key.first;
        obs.hour_start = key.second;
        obs.flow = static_cast<double>(total) / static_cast<double>(lanes);
        obs.speed = speed_it->second.first / static_cast<double>(speed_it->second.second);
        result.observations.push_back(std::move(obs));
    }
    for (const auto& [key, acc] : speed_acc)
        if (count_sum.find(key) == count_sum.end()) ++missing_counts[key.first];

    for (const auto& [seg, n] : missing_counts) result.skipped.push_back({seg, "missing_counts", n});
    for (const auto& [seg, n] : missing_speed) result.skipped.push_back({seg, "missing_speed", n});
    return result;
}

// --- green split ------------------------------------------------------

// Mean cycle from consecutive cycle_start gaps; mean green from completed
// green intervals of the selected phases, union-merged so the concurrent
// major-street pair (2 & 6) is not double-counted.
inline SignalPlanStats compute_green_split(const std::vector<SignalEvent>& events,
                                           const std::set<int>& phases = {2, 6},
                                           std::optional<std::pair<double, double>> window = std::nullopt,
                                           const std::string& segment_id = "") {
    std::vector<SignalEvent> evs;
    evs.reserve(events.size());
    for (const auto& ev : events)
        if (!window || (ev.timestamp >= window->first && ev.timestamp < window->second))
            evs.push_back(ev);
    std::stable_sort(evs.begin(), evs.end(),
                     [](const SignalEvent& a, const SignalEvent& b) { return a.timestamp < b.timestamp; });

    std::vector<double> cycle_starts;
    std::map<int, double> open_green;
    std::vector<std::pair<double, double>> intervals;
    for (const auto& ev : evs) {
        switch (ev.kind) {
            case EventKind::cycle_start:
                cycle_starts.push_back(ev.timestamp);
                break;
            case EventKind::green_start:
                if (phases.count(ev.phase)) open_green[ev.phase] = ev.timestamp;
                break;
            case EventKind::green_end:
                if (phases.count(ev.phase)) {
                    const auto it = open_green.find(ev.phase);
                    if (it == open_green.end())
                        throw OrderError("phase " + std::to_string(ev.phase) +
                                         " green_end without green_start in window");
                    intervals.emplace_back(it->second, ev.timestamp);
                    open_green.erase(it);
                }
                break;
        }
    }

    if (cycle_starts.size() < 2)
        throw DataError("need at least 2 cycle_start events, got " +
                        std::to_string(cycle_starts.size()));
    if (intervals.empty())
        throw DataError("no completed green interval for the selected phases");

    double gap_sum = 0.0;
    for (std::size_t i = 1; i < cycle_starts.size(); ++i)
        gap_sum += cycle_starts[i] - cycle_starts[i - 1];
    const double mean_cycle = gap_sum / static_cast<double>(cycle_starts.size() - 1);

    std::sort(intervals.begin(), intervals.end());
    std::vector<std::pair<double, double>> merged;
    for (const auto& iv : intervals) {
        if (!merged.empty() && iv.first <= merged.back().second)
            merged.back().second = std::max(merged.back().second, iv.second);
        else
            merged.push_back(iv);
    }
    double green_sum = 0.0;
    for (const auto& iv : merged) green_sum += iv.second - iv.first;
    const double mean_green = green_sum / static_cast<double>(merged.size());

    SignalPlanStats stats{segment_id, mean_cycle, mean_green, mean_green / mean_cycle};
    if (!(stats.mean_green > 0.0 && stats.mean_green < stats.mean_cycle) ||
        !(stats.g > 0.0 && stats.g < 1.0))
        throw InvariantError("computed green split " + std::to_string(stats.g) +
                             " outside (0, 1) (mean_cycle=" + std::to_string(mean_cycle) +
                             ", mean_green=" + std::to_string(mean_green) + ")");
    return stats;
}

// --- study filters ------------------------------------------------------

// Weekday observations with hour_start in [start_hour, end_hour). The
// defaults are the study protocol: Mon-Fri, 07:00-20:00 half-open.
inline std::vector<SegmentObservation> filter_study_window(
    const std::vector<SegmentObservation>& obs, unsigned start_hour = 7, unsigned end_hour = 20) {
    std::vector<SegmentObservation> kept;
    kept.reserve(obs.size());
    for (const auto& o : obs) {
        if (!is_weekday(o.hour_start)) continue;
        const unsigned h = hour_of_day(o.hour_start);
        if (h >= start_hour && h < end_hour) kept.push_back(o);
    }
    return kept;
}

// Keeps segments whose mean cycle is within tol of target (closed interval).
inline std::vector<SignalPlanStats> filter_cycle_length(const std::vector<SignalPlanStats>& stats,
                                                        double target = 114.0, double tol = 5.0) {
    std::vector<SignalPlanStats> kept;
    kept.reserve(stats.size());
    for (const auto& s : stats)
        if (std::abs(s.mean_cycle - target) <= tol) kept.push_back(s);
    return kept;
}

// --- binning -----------------------------------------------------------

// Half-open bins [k*width, (k+1)*width); empty bins omitted, output sorted.
inline std::vector<BinnedPoint> bin_flows(const std::vector<SegmentObservation>& obs,
                                          double width = 30.0) {
    if (!(width > 0.0)) throw DomainError("bin width must be positive");
    std::map<int, std::pair<double, long>> acc;  // index -> (speed sum, count)
    for (const auto& o : obs) {
        const int idx = static_cast<int>(std::floor(o.flow / width));
        auto& a = acc[idx];
        a.first += o.speed;
        a.second += 1;
    }
    std::vector<BinnedPoint> bins;
    bins.reserve(acc.size());
    for (const auto& [idx, a] : acc)
        bins.push_back({idx, (idx + 0.5) * width, a.first / static_cast<double>(a.second), a.second});
    return bins;
}

}  // namespace sigfd
