#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "helpers.hpp"
#include "sigfd/config_io.hpp"
#include "sigfd/oracle_sim.hpp"

using namespace sigfd;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

SyntheticSegmentSpec basic_spec(const std::string& id, double g, std::uint64_t seed,
                                long lanes = 1, double noise = 0.0) {
    SyntheticSegmentSpec spec;
    spec.segment_id = id;
    spec.length_m = 400.0;
    spec.v_max = 50.0;
    spec.cycle = 114.0;
    spec.g = g;
    spec.sat_flow = 1800.0;
    spec.noise_sigma = noise;
    spec.seed = seed;
    spec.lane_count = lanes;
    const double capacity = g * spec.sat_flow;
    for (double q = 30.0; q < 0.9 * capacity; q += 30.0) spec.demand_grid.push_back(q);
    return spec;
}

}  // namespace

TEST_CASE("sample_from_fd noiseless points sit exactly on the curve", "[oracle_sim]") {
    const FdParams p{50.0, 600.0, 2.0, 1.5};
    const auto obs = sample_from_fd(p, 50, 0.0, 3);
    REQUIRE(obs.size() == 50);
    for (const auto& o : obs) {
        CHECK(o.flow > 0.02 * p.q_cap - 1e-9);
        CHECK(o.flow < 0.98 * p.q_cap + 1e-9);
        CHECK(o.speed == eval_speed(p, o.flow));
        CHECK(is_weekday(o.hour_start));
        const unsigned h = hour_of_day(o.hour_start);
        CHECK(h >= 7);
        CHECK(h < 20);
    }
}

TEST_CASE("sample_from_fd is deterministic per seed", "[oracle_sim]") {
    const FdParams p{50.0, 600.0, 2.0, 1.5};
    const auto a = sample_from_fd(p, 100, 1.0, 7);
    const auto b = sample_from_fd(p, 100, 1.0, 7);
    const auto c = sample_from_fd(p, 100, 1.0, 8);
    REQUIRE(a.size() == b.size());
    bool identical = true, differs_from_c = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        identical = identical && a[i].flow == b[i].flow && a[i].speed == b[i].speed;
        differs_from_c = differs_from_c || a[i].flow != c[i].flow;
    }
    CHECK(identical);
    CHECK(differs_from_c);
}

TEST_CASE("noise truncates into the physical speed range", "[oracle_sim]") {
    const FdParams p{50.0, 600.0, 2.0, 1.5};
    const auto obs = sample_from_fd(p, 500, 30.0, 11);  // absurd sigma to force clamping
    for (const auto& o : obs) {
        CHECK(o.speed >= 0.0);
        CHECK(o.speed <= p.v_max);
    }
}

TEST_CASE("Webster delay and speed hand values", "[oracle_sim]") {
    // C=114, g=0.5, s=1800, q=600: d = 114*0.25 / (2*(1 - 600/900)) = 42.75 s
    CHECK_THAT(webster_uniform_delay(114.0, 0.5, 1800.0, 600.0), WithinAbs(42.75, 1e-12));
    // free-flow 28.8 s over 400 m at 50 km/h; v = 1440/71.55
    CHECK_THAT(webster_speed(400.0, 50.0, 114.0, 0.5, 1800.0, 600.0),
               WithinAbs(1440.0 / 71.55, 1e-9));
    CHECK_THROWS_AS(webster_uniform_delay(114.0, 0.5, 1800.0, 900.0), DomainError);
}

TEST_CASE("simulate_segment", "[oracle_sim]") {
    SECTION("near-unit green split approaches free flow") {
        SyntheticSegmentSpec spec = basic_spec("s", 0.999, 1);
        spec.demand_grid = {300.0};
        const auto obs = simulate_segment(spec);
        REQUIRE(obs.size() == 1);
        CHECK_THAT(obs[0].speed, WithinRel(spec.v_max, 0.01));
    }
    SECTION("hand value at g=0.5, q=600") {
        SyntheticSegmentSpec spec = basic_spec("s", 0.5, 1);
        spec.demand_grid = {600.0};
        const auto obs = simulate_segment(spec);
        CHECK_THAT(obs[0].speed, WithinAbs(1440.0 / 71.55, 1e-9));  // ~= 20.13 km/h
    }
    SECTION("saturated demand is out of domain") {
        SyntheticSegmentSpec spec = basic_spec("s", 0.5, 1);
        spec.demand_grid = {0.5 * 1800.0};
        CHECK_THROWS_AS(simulate_segment(spec), DomainError);
    }
    SECTION("speeds strictly decrease with demand") {
        const auto obs = simulate_segment(basic_spec("s", 0.6, 1));
        for (std::size_t i = 1; i < obs.size(); ++i) CHECK(obs[i].speed < obs[i - 1].speed);
    }
    SECTION("speeds non-decreasing in green split at fixed demand") {
        double prev = 0.0;
        for (double g : {0.3, 0.4, 0.5, 0.6, 0.7, 0.8}) {
            SyntheticSegmentSpec spec = basic_spec("s", g, 1);
            spec.demand_grid = {400.0};
            const double v = simulate_segment(spec)[0].speed;
            CHECK(v >= prev);
            prev = v;
        }
    }
}

TEST_CASE("generate_corpus round-trips through ingestion", "[oracle_sim]") {
    testutil::TempDir dir;
    const std::vector<SyntheticSegmentSpec> specs{
        basic_spec("alpha", 0.3, 101, 1), basic_spec("bravo", 0.5, 102, 2),
        basic_spec("china", 0.8, 103, 3)};
    const CorpusPaths paths = generate_corpus(specs, dir.path() / "corpus");

    const auto counts = parse_counts(paths.counts.string());
    const auto speeds = parse_speeds(paths.speeds.string());
    const SegmentConfigMap config = read_segments_json(paths.segments.string());
    REQUIRE(config.size() == 3);
    CHECK(config.at("bravo").lane_count == 2);
    CHECK_THAT(*config.at("china").q_cap_override, WithinRel(0.8 * 1800.0, 1e-12));

    const AggregateResult agg = aggregate_hourly(counts, speeds, config);
    CHECK(agg.skipped.empty());
    const auto windowed = filter_study_window(agg.observations);
    CHECK(windowed.size() == agg.observations.size());  // corpus lives inside the window

    for (const auto& spec : specs) {
        const auto expected = simulate_segment(spec);
        std::vector<SegmentObservation> got;
        for (const auto& o : windowed)
            if (o.segment_id == spec.segment_id) got.push_back(o);
        REQUIRE(got.size() == expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].flow == expected[i].flow);  // demands are integral: exact
            CHECK_THAT(got[i].speed, WithinAbs(expected[i].speed, 5e-9));
        }
        const auto events = parse_signal_events(
            (paths.events_dir / (spec.segment_id + ".csv")).string());
        const SignalPlanStats stats = compute_green_split(events);
        CHECK_THAT(stats.g, WithinAbs(spec.g, 1e-9));
        CHECK_THAT(stats.mean_cycle, WithinAbs(spec.cycle, 1e-9));
    }
}

TEST_CASE("generate_corpus is byte-deterministic", "[oracle_sim]") {
    testutil::TempDir dir;
    const std::vector<SyntheticSegmentSpec> specs{basic_spec("a", 0.4, 5, 2, 1.0),
                                                  basic_spec("b", 0.7, 6, 1, 1.0)};
    const CorpusPaths p1 = generate_corpus(specs, dir.path() / "one");
    const CorpusPaths p2 = generate_corpus(specs, dir.path() / "two");
    CHECK(testutil::read_file(p1.counts) == testutil::read_file(p2.counts));
    CHECK(testutil::read_file(p1.speeds) == testutil::read_file(p2.speeds));
    CHECK(testutil::read_file(p1.segments) == testutil::read_file(p2.segments));
    CHECK(testutil::read_file(p1.events_dir / "a.csv") ==
          testutil::read_file(p2.events_dir / "a.csv"));
}

TEST_CASE("generate_corpus input validation", "[oracle_sim]") {
    testutil::TempDir dir;
    SECTION("duplicate segment ids") {
        CHECK_THROWS_AS(
            generate_corpus({basic_spec("x", 0.4, 1), basic_spec("x", 0.5, 2)}, dir.path()),
            ConfigError);
    }
    SECTION("fractional vehicle totals") {
        SyntheticSegmentSpec spec = basic_spec("x", 0.4, 1);
        spec.demand_grid = {100.5};
        CHECK_THROWS_AS(generate_corpus({spec}, dir.path()), ConfigError);
    }
    SECTION("empty spec list") {
        CHECK_THROWS_AS(generate_corpus({}, dir.path()), ConfigError);
    }
    SECTION("unwritable destination") {
        testutil::write_file(dir.str("blocker"), "");  // a file where a directory must go
        CHECK_THROWS_AS(generate_corpus({basic_spec("x", 0.4, 1)}, dir.path() / "blocker"),
                        IoError);
    }
}

TEST_CASE("spec JSON loading", "[oracle_sim]") {
    testutil::TempDir dir;
    testutil::write_file(dir.str("specs.json"), R"({"segments": [
        {"segment_id": "s1", "length_m": 400, "v_max_kmh": 50, "cycle_s": 114,
         "g": 0.45, "sat_flow": 1800, "demand_grid": [60, 120, 180],
         "noise_sigma": 0.5, "seed": 9, "lane_count": 2}
    ]})");
    const auto specs = read_specs_json(dir.str("specs.json"));
    REQUIRE(specs.size() == 1);
    CHECK(specs[0].segment_id == "s1");
    CHECK_THAT(specs[0].g, WithinAbs(0.45, 1e-12));
    CHECK(specs[0].lane_count == 2);
    CHECK(specs[0].demand_grid.size() == 3);

    testutil::write_file(dir.str("bad.json"), "{]");
    CHECK_THROWS_AS(read_specs_json(dir.str("bad.json")), ConfigError);
    testutil::write_file(dir.str("bad2.json"), R"({"segments": [{"segment_id": "s"}]})");
    CHECK_THROWS_AS(read_specs_json(dir.str("bad2.json")), ConfigError);
}
