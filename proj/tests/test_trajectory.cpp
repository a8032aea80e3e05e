#include "soundscape/trajectory.hpp"
#include "scene_fixture.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace soundscape;
namespace fs = std::filesystem;
using namespace soundscape::trajectory;
using testing_support::TempDir;

namespace {

const double kPi = std::numbers::pi;
const fs::path kGolden = fs::path(SOUNDSCAPE_TEST_DATA) / "three_event";

scene::SceneManifest four_points(const fs::path& dir) {
    return testing_support::make_bundle(dir, {0, kPi / 2, kPi, 1.5 * kPi}, {0, 0, 1, 1}, 2);
}

TrajectoryLog log_of(const std::vector<std::pair<std::int64_t, std::int64_t>>& visits) {
    TrajectoryLog log;
    log.session_id = "s";
    log.scene_ref = "scene.json";
    std::int64_t t = 0;
    for (auto [id, dwell] : visits) {
        log.events.push_back({id, t, dwell});
        t += dwell + 100;
    }
    log.total_duration_ms = t;
    return log;
}

} // namespace

TEST(Trajectory, ThreeEventExample) {
    TempDir dir;
    auto scene = four_points(dir.path());
    auto log = parse_log(kGolden / "trajectory.json", scene);
    ASSERT_EQ(log.events.size(), 3u);
    auto s = compute_stats(log, scene);
    EXPECT_EQ(s.dwell_by_cluster, (std::map<int, std::int64_t>{{0, 5000}, {1, 1000}}));
    EXPECT_EQ(s.transitions, (std::vector<std::vector<std::int64_t>>{{1, 1}, {0, 0}}));
    EXPECT_EQ(s.within_cluster_ratio, 0.5);
    EXPECT_EQ(s.coverage, 0.75);
    EXPECT_EQ(s.total_dwell_ms, 6000);
    EXPECT_EQ(s.revisit_rate, 0.0);
    EXPECT_EQ(s.angular_monotonicity, 1.0);
}

TEST(Trajectory, ReportMatchesGoldenFiles) {
    TempDir dir;
    auto scene = four_points(dir.path());
    auto s = compute_stats(parse_log(kGolden / "trajectory.json", scene), scene);
    export_stats(s, dir / "report");
    for (const char* name : {"stats.json", "dwell.csv", "transitions.csv"}) {
        EXPECT_EQ(testing_support::slurp(dir / "report" / name), testing_support::slurp(kGolden / name)) << name;
    }
    EXPECT_EQ(load_stats(dir / "report"), s);
}

TEST(Trajectory, UnknownPointIdIsNamed) {
    TempDir dir;
    auto scene = four_points(dir.path());
    auto j = read_json_file(kGolden / "trajectory.json");
    j["events"][1]["point_id"] = 99;
    try {
        parse_log(j, scene.points.size());
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("99"), std::string::npos);
    }
}

TEST(Trajectory, SchemaErrors) {
    auto good = read_json_file(kGolden / "trajectory.json");
    auto j = good;
    j["events"][0]["dwell_ms"] = 1.5;
    EXPECT_THROW(parse_log(j), Error);
    j = good;
    j["events"][2]["t_start_ms"] = 100;
    EXPECT_THROW(parse_log(j), Error);
    j = good;
    j["events"][0]["dwell_ms"] = -1;
    EXPECT_THROW(parse_log(j), Error);
    j = good;
    j["dwell_rule"] = "hover";
    EXPECT_THROW(parse_log(j), Error);
    j = good;
    j.erase("session_id");
    EXPECT_THROW(parse_log(j), Error);
    j = good;
    j["version"] = "3";
    EXPECT_THROW(parse_log(j), VersionError);
    EXPECT_NO_THROW(parse_log(good));
}

TEST(Trajectory, LogJsonRoundTrip) {
    auto log = log_of({{1, 100}, {2, 200}, {1, 50}});
    EXPECT_EQ(parse_log(json::parse(to_json(log).dump())).events, log.events);
}

TEST(Trajectory, EmptyLog) {
    TempDir dir;
    auto scene = four_points(dir.path());
    auto s = compute_stats(log_of({}), scene);
    EXPECT_EQ(s.n_events, 0u);
    EXPECT_EQ(s.coverage, 0.0);
    EXPECT_EQ(s.total_dwell_ms, 0);
    EXPECT_TRUE(s.dwell_by_cluster.empty());
    EXPECT_EQ(s.transitions, (std::vector<std::vector<std::int64_t>>{{0, 0}, {0, 0}}));
    EXPECT_EQ(s.within_cluster_ratio, 0.0);
    EXPECT_EQ(s.angular_monotonicity, 0.0);
    export_stats(s, dir / "r");
    EXPECT_EQ(testing_support::slurp(dir / "r" / "transitions.csv"), "from_cluster,to_cluster,count\n");
    EXPECT_EQ(testing_support::slurp(dir / "r" / "dwell.csv"), "cluster,dwell_ms\n");
}

TEST(Trajectory, ConservationAndReversalOnRandomLogs) {
    TempDir dir;
    auto scene = four_points(dir.path());
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::pair<std::int64_t, std::int64_t>> visits;
        const auto n = rng() % 12;
        for (std::size_t k = 0; k < n; ++k) visits.emplace_back(rng() % 4, rng() % 5000);
        auto s = compute_stats(log_of(visits), scene);

        std::int64_t dwell = 0, sum_clusters = 0, sum_transitions = 0;
        for (auto [id, d] : visits) dwell += d;
        for (auto [c, d] : s.dwell_by_cluster) sum_clusters += d;
        for (const auto& row : s.transitions)
            for (auto v : row) sum_transitions += v;
        EXPECT_EQ(s.total_dwell_ms, dwell);
        EXPECT_EQ(sum_clusters, dwell);
        EXPECT_EQ(sum_transitions, static_cast<std::int64_t>(n > 0 ? n - 1 : 0));
        EXPECT_GE(s.coverage, 0.0);
        EXPECT_LE(s.coverage, 1.0);
        EXPECT_GE(s.within_cluster_ratio, 0.0);
        EXPECT_LE(s.within_cluster_ratio, 1.0);
        EXPECT_GE(s.angular_monotonicity, 0.0);
        EXPECT_LE(s.angular_monotonicity, 1.0);

        auto reversed = visits;
        std::reverse(reversed.begin(), reversed.end());
        auto r = compute_stats(log_of(reversed), scene);
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t b = 0; b < 2; ++b) EXPECT_EQ(r.transitions[a][b], s.transitions[b][a]);
        EXPECT_EQ(r.total_dwell_ms, s.total_dwell_ms);
        EXPECT_EQ(r.dwell_by_cluster, s.dwell_by_cluster);
    }
}

TEST(Trajectory, RevisitRate) {
    TempDir dir;
    auto scene = four_points(dir.path());
    auto s = compute_stats(log_of({{0, 10}, {1, 10}, {0, 10}, {0, 10}}), scene);
    EXPECT_EQ(s.unique_points, 2u);
    EXPECT_EQ(s.revisit_rate, 0.5);
    EXPECT_EQ(s.coverage, 0.5);
}

TEST(AngularMonotonicity, WrapsAcrossTheSeam) {
    // 3pi/2 -> 0 is a forward quarter turn, not a backward 3/4 turn
    EXPECT_EQ(angular_monotonicity({kPi, 1.5 * kPi, 0.0, 0.5 * kPi}), 1.0);
    EXPECT_EQ(angular_monotonicity({0.5 * kPi, 0.0, 1.5 * kPi}), 1.0);
    EXPECT_DOUBLE_EQ(angular_monotonicity({0.0, 1.0, 0.5, 1.5}), 2.0 / 3.0);
    EXPECT_EQ(angular_monotonicity({1.0, 1.0, 1.0}), 0.0);
    EXPECT_EQ(angular_monotonicity({1.0}), 0.0);
}
