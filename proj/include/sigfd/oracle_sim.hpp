#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sigfd/config_io.hpp"
#include "sigfd/csv_io.hpp"
#include "sigfd/errors.hpp"
#include "sigfd/fd_model.hpp"
#include "sigfd/ingestion.hpp"
#include "sigfd/time_util.hpp"

// Deterministic synthetic stand-in for the field data: an inverse-crime
// sampler straight from the FD, and an independent physics oracle built on
// Webster's uniform delay term. Both emit hourly observations that survive
// the study-window filter, and generate_corpus writes them in the exact
// input formats the ingestion module parses.

namespace sigfd {

// mt19937_64 with hand-rolled uniform / Box-Muller transforms. The standard
// pins the engine's output but not the distributions', and corpus bytes
// must not depend on the standard library build.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

    double uniform01() {  // [0, 1)
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double normal(double mean, double stddev) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return mean + stddev * radius * std::cos(angle);
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Hour slots inside the study window (weekday, 07:00-20:00), starting on a
// fixed Monday so generated corpora survive filter_study_window untouched.
inline std::int64_t first_study_hour() { return epoch_seconds(2024, 1, 1, 7); }

inline std::int64_t next_study_hour(std::int64_t t) {
    t += 3600;
    if (hour_of_day(t) >= 20) t += (24 - 20 + 7) * 3600;  // next day 07:00
    while (!is_weekday(t)) t += 86400;
    return t;
}

// Draws (flow, speed) pairs straight off the FD curve; flows uniform over
// the interior (0.02, 0.98)*q_cap, Gaussian speed noise truncated to
// [0, v_max]. Same seed, same bytes.
inline std::vector<SegmentObservation> sample_from_fd(const FdParams& params, std::size_t n,
                                                      double noise_sigma, std::uint64_t seed,
                                                      const std::string& segment_id = "synthetic") {
    params.validate();
    if (n < 1) throw DomainError("sample_from_fd: n must be >= 1");
    if (!(noise_sigma >= 0.0)) throw DomainError("sample_from_fd: noise_sigma must be >= 0");
    SeededRng rng(seed);
    std::vector<SegmentObservation> obs;
    obs.reserve(n);
    std::int64_t hour = first_study_hour();
    for (std::size_t i = 0; i < n; ++i) {
        const double q = rng.uniform(0.02 * params.q_cap, 0.98 * params.q_cap);
        const double z = rng.normal(0.0, 1.0);  // drawn even at sigma=0: keeps flows aligned
        double v = eval_speed(params, q) + z * noise_sigma;
        v = std::min(params.v_max, std::max(0.0, v));
        obs.push_back({segment_id, hour, q, v});
        hour = next_study_hour(hour);
    }
    return obs;
}

struct SyntheticSegmentSpec {
    std::string segment_id;
    double length_m;
    double v_max;      // km/h
    double cycle;      // s
    double g;          // green split
    double sat_flow;   // veh/hr-lane
    std::vector<double> demand_grid;  // veh/hr-lane, each < g * sat_flow
    double noise_sigma = 0.0;         // km/h
    std::uint64_t seed = 0;
    long lane_count = 1;

    void validate() const {
        if (segment_id.empty()) throw ConfigError("spec with empty segment_id");
        if (!(length_m > 0.0)) throw ConfigError(segment_id + ": length_m must be positive");
        if (!(v_max > 0.0)) throw ConfigError(segment_id + ": v_max must be positive");
        if (!(cycle > 0.0)) throw ConfigError(segment_id + ": cycle must be positive");
        GreenSplit check_g(g);
        if (!(sat_flow > 0.0)) throw ConfigError(segment_id + ": sat_flow must be positive");
        if (demand_grid.empty()) throw ConfigError(segment_id + ": empty demand_grid");
        if (!(noise_sigma >= 0.0)) throw ConfigError(segment_id + ": noise_sigma must be >= 0");
        if (lane_count < 1) throw ConfigError(segment_id + ": lane_count must be >= 1");
        for (double q : demand_grid)
            if (!(q >= 0.0))
                throw ConfigError(segment_id + ": demands must be non-negative");
    }
};

// Webster's uniform delay for an undersaturated approach: C(1-g)^2 / (2(1 - q/(g s))).
inline double webster_uniform_delay(double cycle, double g, double sat_flow, double q) {
    const double capacity = g * sat_flow;
    if (!(q < capacity))
        throw DomainError("demand " + std::to_string(q) + " at or above capacity g*s=" +
                          std::to_string(capacity) + "; delay formula diverges");
    const double one_minus_g = 1.0 - g;
    return cycle * one_minus_g * one_minus_g / (2.0 * (1.0 - q / capacity));
}

// Space-mean speed over the segment: free-flow travel time plus signal delay.
inline double webster_speed(double length_m, double v_max, double cycle, double g,
                            double sat_flow, double q) {
    const double t_free = 3600.0 * (length_m / 1000.0) / v_max;  // s
    const double delay = webster_uniform_delay(cycle, g, sat_flow, q);
    return 3.6 * length_m / (t_free + delay);  // km/h
}

// The physics oracle: one observation per demand value, speed from the
// delay model plus seeded noise, truncated into (0, v_max].
inline std::vector<SegmentObservation> simulate_segment(const SyntheticSegmentSpec& spec) {
    spec.validate();
    SeededRng rng(spec.seed);
    std::vector<SegmentObservation> obs;
    obs.reserve(spec.demand_grid.size());
    std::int64_t hour = first_study_hour();
    for (double q : spec.demand_grid) {
        const double z = rng.normal(0.0, 1.0);
        double v = webster_speed(spec.length_m, spec.v_max, spec.cycle, spec.g, spec.sat_flow, q) +
                   z * spec.noise_sigma;
        v = std::min(spec.v_max, std::max(std::numeric_limits<double>::min(), v));
        obs.push_back({spec.segment_id, hour, q, v});
        hour = next_study_hour(hour);
    }
    return obs;
}

inline std::vector<SyntheticSegmentSpec> read_specs_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open spec file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid JSON in " + path + ": " + e.what());
    }
    if (!j.contains("segments") || !j["segments"].is_array())
        throw ConfigError(path + ": missing top-level 'segments' array");
    std::vector<SyntheticSegmentSpec> specs;
    for (const auto& entry : j["segments"]) {
        SyntheticSegmentSpec s;
        try {
            s.segment_id = entry.at("segment_id").get<std::string>();
            s.length_m = entry.at("length_m").get<double>();
            s.v_max = entry.at("v_max_kmh").get<double>();
            s.cycle = entry.at("cycle_s").get<double>();
            s.g = entry.at("g").get<double>();
            s.sat_flow = entry.at("sat_flow").get<double>();
            s.demand_grid = entry.at("demand_grid").get<std::vector<double>>();
            if (entry.contains("noise_sigma")) s.noise_sigma = entry["noise_sigma"].get<double>();
            if (entry.contains("seed")) s.seed = entry["seed"].get<std::uint64_t>();
            if (entry.contains("lane_count")) s.lane_count = entry["lane_count"].get<long>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(path + ": " + e.what());
        }
        s.validate();
        specs.push_back(std::move(s));
    }
    if (specs.empty()) throw ConfigError(path + ": no segment specs");
    return specs;
}

struct CorpusPaths {
    std::filesystem::path counts;
    std::filesystem::path speeds;
    std::filesystem::path segments;
    std::filesystem::path events_dir;
};

// Writes the four ingestion inputs for a set of specs: counts.csv,
// speeds.csv, segments.json, and one constant-plan signal event log per
// segment realizing (cycle, g) so compute_green_split recovers g.
inline CorpusPaths generate_corpus(const std::vector<SyntheticSegmentSpec>& specs,
                                   const std::filesystem::path& out_dir) {
    if (specs.empty()) throw ConfigError("generate_corpus: no specs");
    std::set<std::string> ids;
    for (const auto& spec : specs) {
        spec.validate();
        if (!ids.insert(spec.segment_id).second)
            throw ConfigError("duplicate segment_id: " + spec.segment_id);
        for (double q : spec.demand_grid) {
            const double total = q * static_cast<double>(spec.lane_count);
            if (std::abs(total - std::round(total)) > 1e-9)
                throw ConfigError(spec.segment_id + ": demand " + std::to_string(q) +
                                  " * lane_count must be a whole vehicle count");
        }
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir / "events", ec);
    if (ec) throw IoError("cannot create " + (out_dir / "events").string() + ": " + ec.message());

    std::ostringstream counts, speeds;
    counts << "segment_id,lane_id,timestamp,count\n";
    speeds << "segment_id,timestamp,speed_kmh\n";
    SegmentConfigMap config;

    for (const auto& spec : specs) {
        const std::vector<SegmentObservation> obs = simulate_segment(spec);
        for (const auto& o : obs) {
            const long total = std::lround(o.flow * static_cast<double>(spec.lane_count));
            const long base = total / spec.lane_count;
            const long rem = total % spec.lane_count;
            for (long lane = 0; lane < spec.lane_count; ++lane)
                counts << spec.segment_id << ",lane" << (lane + 1) << ','
                       << format_iso_datetime(o.hour_start) << ','
                       << (base + (lane < rem ? 1 : 0)) << '\n';
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.9f", o.speed);
            speeds << spec.segment_id << ',' << format_iso_datetime(o.hour_start + 1800) << ','
                   << buf << '\n';
        }

        // Constant signal plan: cycle starts at k*C, phases 2 and 6 green
        // together over [k*C, k*C + g*C).
        constexpr int kCycles = 20;
        std::ostringstream events;
        events << "timestamp,phase,kind\n";
        // Nanosecond precision: green-split recovery is asserted to 1e-9.
        auto fmt_t = [](double t) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.9f", t);
            return std::string(buf);
        };
        for (int k = 0; k <= kCycles; ++k) {
            const double t0 = k * spec.cycle;
            events << fmt_t(t0) << ",0,cycle_start\n";
            if (k == kCycles) break;
            const double t1 = t0 + spec.g * spec.cycle;
            events << fmt_t(t0) << ",2,green_start\n";
            events << fmt_t(t0) << ",6,green_start\n";
            events << fmt_t(t1) << ",2,green_end\n";
            events << fmt_t(t1) << ",6,green_end\n";
        }
        atomic_write_file(out_dir / "events" / (spec.segment_id + ".csv"), events.str());

        SegmentConfig c;
        c.lane_count = spec.lane_count;
        c.v_max_kmh = spec.v_max;
        c.q_cap_override = spec.g * spec.sat_flow;
        config[spec.segment_id] = c;
    }

    CorpusPaths paths{out_dir / "counts.csv", out_dir / "speeds.csv", out_dir / "segments.json",
                      out_dir / "events"};
    atomic_write_file(paths.counts, counts.str());
    atomic_write_file(paths.speeds, speeds.str());
    atomic_write_file(paths.segments, segments_json_string(config));
    return paths;
}

}  // namespace sigfd
