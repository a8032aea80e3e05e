#pragma once

// Exploration logs exported by the viewer and the analytics computed over them.
//
// Dwell rule (shared with the viewer): an event's dwell_ms runs from playback
// start until playback ends or the pointer leaves the point, whichever comes first.

#include "soundscape/json_io.hpp"
#include "soundscape/scene.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace soundscape::trajectory {

inline constexpr const char* kDwellRule = "playback_end_or_pointer_exit";

struct Event {
    std::int64_t point_id = 0;
    std::int64_t t_start_ms = 0;
    std::int64_t dwell_ms = 0;

    bool operator==(const Event&) const = default;
};

struct TrajectoryLog {
    std::string session_id;
    std::string scene_ref;
    std::vector<Event> events;
    std::int64_t total_duration_ms = 0;
};

struct TrajectoryStats {
    std::size_t n_points = 0; ///< points in the scene
    std::size_t n_events = 0;
    std::size_t unique_points = 0;
    double coverage = 0.0;
    std::int64_t total_dwell_ms = 0;
    std::map<int, std::int64_t> dwell_by_cluster; ///< visited clusters only
    std::vector<std::vector<std::int64_t>> transitions; ///< K x K, [from][to]
    double within_cluster_ratio = 0.0;
    double revisit_rate = 0.0;
    double angular_monotonicity = 0.0;

    bool operator==(const TrajectoryStats&) const = default;
};

inline json to_json(const TrajectoryLog& log) {
    json events = json::array();
    for (const auto& e : log.events) {
        events.push_back({{"point_id", e.point_id}, {"t_start_ms", e.t_start_ms}, {"dwell_ms", e.dwell_ms}});
    }
    return {{"version", kSchemaVersion},      {"session_id", log.session_id},
            {"scene_ref", log.scene_ref},     {"dwell_rule", kDwellRule},
            {"events", std::move(events)},    {"total_duration_ms", log.total_duration_ms}};
}

/// Schema check plus, when `n_points` is given, that every point id exists in the scene.
inline TrajectoryLog parse_log(const json& j, std::optional<std::size_t> n_points = std::nullopt) {
    require_version(j, "trajectory log");
    auto fail = [](const std::string& m) -> void { throw Error("trajectory log: " + m); };
    auto integer = [&](const json& parent, const char* key, const std::string& where) -> std::int64_t {
        if (!parent.contains(key) || !parent[key].is_number_integer()) {
            fail(where + key + " must be an integer number of milliseconds");
        }
        return parent[key].get<std::int64_t>();
    };

    TrajectoryLog log;
    for (const char* key : {"session_id", "scene_ref"}) {
        if (!j.contains(key) || !j[key].is_string()) fail(std::string(key) + " must be a string");
    }
    log.session_id = j["session_id"].get<std::string>();
    log.scene_ref = j["scene_ref"].get<std::string>();
    log.total_duration_ms = integer(j, "total_duration_ms", "");
    if (log.total_duration_ms < 0) fail("total_duration_ms must be non-negative");
    if (j.contains("dwell_rule") && j["dwell_rule"] != kDwellRule) {
        fail("unsupported dwell_rule " + j["dwell_rule"].dump());
    }
    if (!j.contains("events") || !j["events"].is_array()) fail("events must be an array");

    std::set<std::int64_t> unknown;
    for (std::size_t i = 0; i < j["events"].size(); ++i) {
        const json& je = j["events"][i];
        const std::string at = "events[" + std::to_string(i) + "].";
        if (!je.is_object()) fail(at + " must be an object");
        Event e{integer(je, "point_id", at), integer(je, "t_start_ms", at), integer(je, "dwell_ms", at)};
        if (e.dwell_ms < 0) fail(at + "dwell_ms must be non-negative");
        if (!log.events.empty() && e.t_start_ms < log.events.back().t_start_ms) {
            fail(at + "t_start_ms goes backwards; events must be ordered by start time");
        }
        if (e.point_id < 0 || (n_points && e.point_id >= static_cast<std::int64_t>(*n_points))) {
            unknown.insert(e.point_id);
        }
        log.events.push_back(e);
    }
    if (!unknown.empty()) {
        std::string ids;
        for (auto id : unknown) ids += (ids.empty() ? "" : ", ") + std::to_string(id);
        fail("unknown point id(s) " + ids + (n_points ? " (scene has " + std::to_string(*n_points) + " points)" : ""));
    }
    return log;
}

inline TrajectoryLog parse_log(const std::filesystem::path& path, std::optional<std::size_t> n_points = std::nullopt) {
    try {
        return parse_log(read_json_file(path), n_points);
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

inline TrajectoryLog parse_log(const std::filesystem::path& path, const scene::SceneManifest& scene) {
    return parse_log(path, scene.points.size());
}

/// Angular position in [0, 2*pi) of a scene point around the listener.
inline double point_angle(const scene::ScenePoint& p) {
    double a = std::atan2(p.y, p.x);
    if (a < 0.0) a += 2.0 * std::numbers::pi;
    return a;
}

/// Fraction of consecutive steps moving in the session's dominant angular direction.
/// Steps with |dtheta| > pi are taken the short way around the seam; steps with
/// dtheta = 0 count against monotonicity.
inline double angular_monotonicity(const std::vector<double>& angles) {
    if (angles.size() < 2) return 0.0;
    std::size_t forward = 0, backward = 0;
    for (std::size_t k = 1; k < angles.size(); ++k) {
        double d = angles[k] - angles[k - 1];
        if (d > std::numbers::pi) d -= 2.0 * std::numbers::pi;
        if (d < -std::numbers::pi) d += 2.0 * std::numbers::pi;
        if (d > 0.0) ++forward;
        if (d < 0.0) ++backward;
    }
    return static_cast<double>(std::max(forward, backward)) / static_cast<double>(angles.size() - 1);
}

/// Cluster labels and positions are taken from the scene, which carries the
/// cluster assignment it was built from.
inline TrajectoryStats compute_stats(const TrajectoryLog& log, const scene::SceneManifest& scene) {
    const std::size_t n = scene.points.size();
    const auto k = static_cast<std::size_t>(std::max(scene.n_clusters, 0));
    for (const auto& e : log.events) {
        if (e.point_id < 0 || e.point_id >= static_cast<std::int64_t>(n)) {
            throw Error("compute_stats: point id " + std::to_string(e.point_id) + " not in scene");
        }
    }

    TrajectoryStats s;
    s.n_points = n;
    s.n_events = log.events.size();
    s.transitions.assign(k, std::vector<std::int64_t>(k, 0));

    std::set<std::int64_t> visited;
    std::vector<double> angles;
    for (std::size_t i = 0; i < log.events.size(); ++i) {
        const auto& e = log.events[i];
        const auto& p = scene.points[static_cast<std::size_t>(e.point_id)];
        visited.insert(e.point_id);
        angles.push_back(point_angle(p));
        s.dwell_by_cluster[p.cluster] += e.dwell_ms;
        s.total_dwell_ms += e.dwell_ms;
        if (i > 0) {
            const auto& prev = scene.points[static_cast<std::size_t>(log.events[i - 1].point_id)];
            ++s.transitions.at(static_cast<std::size_t>(prev.cluster)).at(static_cast<std::size_t>(p.cluster));
        }
    }

    s.unique_points = visited.size();
    s.coverage = n == 0 ? 0.0 : static_cast<double>(visited.size()) / static_cast<double>(n);
    if (s.n_events > 1) {
        std::int64_t diagonal = 0;
        for (std::size_t c = 0; c < k; ++c) diagonal += s.transitions[c][c];
        s.within_cluster_ratio = static_cast<double>(diagonal) / static_cast<double>(s.n_events - 1);
    }
    if (s.n_events > 0) {
        s.revisit_rate = static_cast<double>(s.n_events - s.unique_points) / static_cast<double>(s.n_events);
    }
    s.angular_monotonicity = angular_monotonicity(angles);
    return s;
}

inline json to_json(const TrajectoryStats& s) {
    json dwell = json::object();
    for (const auto& [c, ms] : s.dwell_by_cluster) dwell[std::to_string(c)] = ms;
    return {{"version", kSchemaVersion},
            {"n_points", s.n_points},
            {"n_events", s.n_events},
            {"unique_points", s.unique_points},
            {"coverage", s.coverage},
            {"total_dwell_ms", s.total_dwell_ms},
            {"dwell_by_cluster", std::move(dwell)},
            {"transition_matrix", s.transitions},
            {"within_cluster_ratio", s.within_cluster_ratio},
            {"revisit_rate", s.revisit_rate},
            {"angular_monotonicity", s.angular_monotonicity}};
}

inline TrajectoryStats stats_from_json(const json& j) {
    require_version(j, "trajectory stats");
    TrajectoryStats s;
    try {
        s.n_points = j.at("n_points").get<std::size_t>();
        s.n_events = j.at("n_events").get<std::size_t>();
        s.unique_points = j.at("unique_points").get<std::size_t>();
        s.coverage = j.at("coverage").get<double>();
        s.total_dwell_ms = j.at("total_dwell_ms").get<std::int64_t>();
        for (const auto& [c, ms] : j.at("dwell_by_cluster").items()) {
            s.dwell_by_cluster[std::stoi(c)] = ms.get<std::int64_t>();
        }
        s.transitions = j.at("transition_matrix").get<std::vector<std::vector<std::int64_t>>>();
        s.within_cluster_ratio = j.at("within_cluster_ratio").get<double>();
        s.revisit_rate = j.at("revisit_rate").get<double>();
        s.angular_monotonicity = j.at("angular_monotonicity").get<double>();
    } catch (const json::exception& e) {
        throw Error(std::string("trajectory stats: ") + e.what());
    }
    return s;
}

/// Writes stats.json, dwell.csv (one row per visited cluster) and transitions.csv
/// (one row per non-zero cluster pair) into `dir`.
inline void export_stats(const TrajectoryStats& s, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
    write_json_file(dir / "stats.json", to_json(s));

    std::ofstream dwell(dir / "dwell.csv", std::ios::trunc | std::ios::binary);
    dwell << "cluster,dwell_ms\n";
    for (const auto& [c, ms] : s.dwell_by_cluster) dwell << c << ',' << ms << '\n';

    std::ofstream trans(dir / "transitions.csv", std::ios::trunc | std::ios::binary);
    trans << "from_cluster,to_cluster,count\n";
    for (std::size_t a = 0; a < s.transitions.size(); ++a) {
        for (std::size_t b = 0; b < s.transitions[a].size(); ++b) {
            if (s.transitions[a][b] != 0) trans << a << ',' << b << ',' << s.transitions[a][b] << '\n';
        }
    }
    if (!dwell || !trans) throw Error("failed writing stats report in " + dir.string());
}

inline TrajectoryStats load_stats(const std::filesystem::path& dir) {
    return stats_from_json(read_json_file(dir / "stats.json"));
}

} // namespace soundscape::trajectory
