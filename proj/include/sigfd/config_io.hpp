#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "sigfd/errors.hpp"
#include "sigfd/ingestion.hpp"

// Segments config: per segment_id the lane count, speed limit, and an
// optional q_cap override that short-circuits estimate_qcap.
//
//   { "segments": { "seg01": { "lane_count": 2, "v_max_kmh": 50.0,
//                              "q_cap": 600.0 } } }

namespace sigfd {

inline SegmentConfigMap read_segments_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open segments config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid JSON in " + path + ": " + e.what());
    }
    if (!j.contains("segments") || !j["segments"].is_object())
        throw ConfigError(path + ": missing top-level 'segments' object");
    SegmentConfigMap config;
    for (const auto& [seg, entry] : j["segments"].items()) {
        SegmentConfig c;
        try {
            c.lane_count = entry.at("lane_count").get<long>();
            c.v_max_kmh = entry.at("v_max_kmh").get<double>();
            if (entry.contains("q_cap")) c.q_cap_override = entry["q_cap"].get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(path + ": segment '" + seg + "': " + e.what());
        }
        if (c.lane_count < 1)
            throw ConfigError(path + ": segment '" + seg + "': lane_count must be >= 1");
        if (!(c.v_max_kmh > 0.0))
            throw ConfigError(path + ": segment '" + seg + "': v_max_kmh must be positive");
        if (c.q_cap_override && !(*c.q_cap_override > 0.0))
            throw ConfigError(path + ": segment '" + seg + "': q_cap must be positive");
        config[seg] = c;
    }
    return config;
}

inline std::string segments_json_string(const SegmentConfigMap& config) {
    nlohmann::json j;
    j["segments"] = nlohmann::json::object();
    for (const auto& [seg, c] : config) {
        nlohmann::json entry;
        entry["lane_count"] = c.lane_count;
        entry["v_max_kmh"] = c.v_max_kmh;
        if (c.q_cap_override) entry["q_cap"] = *c.q_cap_override;
        j["segments"][seg] = entry;
    }
    return j.dump(2) + "\n";
}

}  // namespace sigfd
