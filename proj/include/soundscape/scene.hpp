#pragma once

// Scene manifest: binds 3D points to segment audio, cluster labels, interaction
// colors and a panorama backdrop. Positions use z as elevation; renderers apply
// their own axis remapping.

#include "soundscape/audio_io.hpp"
#include "soundscape/clustering.hpp"
#include "soundscape/json_io.hpp"
#include "soundscape/spatial.hpp"

#include <cmath>
#include <filesystem>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

namespace soundscape::scene {

struct Colors {
    std::string unexplored = "#FFFFFF";
    std::string playing = "#FF0000";
    std::string explored = "#00FF00";
};

struct ScenePoint {
    std::int64_t id = 0;
    double x = 0.0, y = 0.0, z = 0.0;
    std::string audio; ///< relative to the manifest's directory
    int cluster = 0;
    std::optional<std::string> cluster_name;
    double duration_s = 0.0;
};

struct SceneManifest {
    std::string version = kSchemaVersion;
    std::string source_id;
    double radius = spatial::kDefaultRadius;
    std::optional<std::string> panorama; ///< relative to the manifest's directory
    int n_clusters = 0;
    std::vector<ScenePoint> points;
    Colors colors;
    std::optional<std::pair<std::int64_t, std::int64_t>> seam;
};

struct SceneOptions {
    std::string source_id;
    double radius = spatial::kDefaultRadius;
    double duration_s = 0.0;
    std::optional<std::string> panorama;
    Colors colors;
    std::filesystem::path bundle_dir; ///< directory the manifest will live in
};

struct Violation {
    std::string code;
    std::string detail;
};

inline SceneManifest assemble_scene(const std::vector<spatial::Point3D>& points,
                                    std::optional<spatial::SeamPair> seam,
                                    const clustering::ClusterAssignment& assignment,
                                    const std::vector<audio::SegmentFile>& audio_files,
                                    const SceneOptions& options) {
    const std::size_t n = points.size();
    if (assignment.labels.size() != n || audio_files.size() != n) {
        throw Error("assemble_scene: count mismatch (" + std::to_string(n) + " points, " +
                    std::to_string(assignment.labels.size()) + " labels, " +
                    std::to_string(audio_files.size()) + " audio files)");
    }

    SceneManifest m;
    m.source_id = options.source_id;
    m.radius = options.radius;
    m.panorama = options.panorama;
    m.colors = options.colors;
    m.n_clusters = assignment.n_clusters;
    if (seam) m.seam = {static_cast<std::int64_t>(seam->at_min), static_cast<std::int64_t>(seam->at_max)};

    for (std::size_t i = 0; i < n; ++i) {
        const auto& file = audio_files[i];
        if (file.index != i) throw Error("assemble_scene: audio manifest out of segment order at " + std::to_string(i));
        if (!std::filesystem::exists(options.bundle_dir / file.path)) {
            throw Error("assemble_scene: missing audio file " + (options.bundle_dir / file.path).string());
        }
        const int label = assignment.labels[i];
        if (label < 0 || label >= assignment.n_clusters) {
            throw Error("assemble_scene: point " + std::to_string(i) + " has unassigned label " +
                        std::to_string(label));
        }
        ScenePoint p;
        p.id = static_cast<std::int64_t>(i);
        p.x = points[i].x;
        p.y = points[i].y;
        p.z = points[i].z;
        p.audio = file.path;
        p.cluster = label;
        if (auto it = assignment.names.find(label); it != assignment.names.end()) p.cluster_name = it->second;
        p.duration_s = options.duration_s;
        m.points.push_back(std::move(p));
    }
    if (options.panorama && !std::filesystem::exists(options.bundle_dir / *options.panorama)) {
        throw Error("assemble_scene: missing panorama " + (options.bundle_dir / *options.panorama).string());
    }
    return m;
}

/// Floats are rounded to 9 significant digits so the bytes are reproducible.
inline json to_json(const SceneManifest& m) {
    using detail::round_significant;
    json points = json::array();
    for (const auto& p : m.points) {
        json jp = {
            {"id", p.id},
            {"position", {{"x", round_significant(p.x)}, {"y", round_significant(p.y)}, {"z", round_significant(p.z)}}},
            {"audio", p.audio},
            {"cluster", p.cluster},
            {"duration_s", round_significant(p.duration_s)},
        };
        if (p.cluster_name) jp["cluster_name"] = *p.cluster_name;
        points.push_back(std::move(jp));
    }
    json j = {
        {"version", m.version},
        {"source_id", m.source_id},
        {"radius", round_significant(m.radius)},
        {"panorama", m.panorama ? json(*m.panorama) : json(nullptr)},
        {"n_clusters", m.n_clusters},
        {"up_axis", "z"},
        {"points", std::move(points)},
        {"colors", {{"unexplored", m.colors.unexplored}, {"playing", m.colors.playing}, {"explored", m.colors.explored}}},
    };
    if (m.seam) j["seam_diagnostic"] = {m.seam->first, m.seam->second};
    return j;
}

inline void export_scene(const SceneManifest& m, const std::filesystem::path& path) {
    write_json_file(path, to_json(m));
}

inline bool is_hex_color(const json& v) {
    static const std::regex pattern("^#[0-9A-Fa-f]{6}$");
    return v.is_string() && std::regex_match(v.get<std::string>(), pattern);
}

/// Checks every manifest invariant and returns all violations found (empty = valid).
/// Asset paths are resolved against `base_dir`.
inline std::vector<Violation> validate_scene(const json& j, const std::filesystem::path& base_dir) {
    std::vector<Violation> out;
    auto add = [&](std::string code, std::string detail) { out.push_back({std::move(code), std::move(detail)}); };

    if (!j.is_object()) {
        add("invalid_type", "manifest root must be an object");
        return out;
    }
    if (!j.contains("version") || !j["version"].is_string() || j["version"] != kSchemaVersion) {
        add("unsupported_version", "expected version \"" + std::string(kSchemaVersion) + "\"");
    }
    bool complete = true;
    for (const char* key : {"source_id", "radius", "panorama", "n_clusters", "points", "colors"}) {
        if (!j.contains(key)) {
            add("missing_field", key);
            complete = false;
        }
    }
    if (!complete) return out;

    const json& radius_j = j["radius"];
    double radius = 0.0;
    if (!radius_j.is_number() || !(radius_j.get<double>() > 0.0) || !std::isfinite(radius_j.get<double>())) {
        add("invalid_radius", "radius must be a positive number");
    } else {
        radius = radius_j.get<double>();
    }
    const json& nc = j["n_clusters"];
    const bool nc_ok = nc.is_number_integer() && nc.get<std::int64_t>() >= 1;
    if (!nc_ok) add("invalid_type", "n_clusters must be a positive integer");

    const json& colors = j["colors"];
    for (const char* key : {"unexplored", "playing", "explored"}) {
        if (!colors.is_object() || !colors.contains(key) || !is_hex_color(colors[key])) {
            add("invalid_color", std::string("colors.") + key + " must be #RRGGBB");
        }
    }

    const json& pano = j["panorama"];
    if (!pano.is_null()) {
        if (!pano.is_string()) {
            add("invalid_type", "panorama must be a string or null");
        } else if (!std::filesystem::exists(base_dir / pano.get<std::string>())) {
            add("missing_panorama", pano.get<std::string>());
        }
    }

    const json& points = j["points"];
    if (!points.is_array()) {
        add("invalid_type", "points must be an array");
        return out;
    }
    if (points.empty()) add("invalid_type", "points must not be empty");

    std::set<std::int64_t> seen;
    const double tol = 1e-6 * std::max(1.0, radius);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const json& p = points[i];
        const std::string at = "points[" + std::to_string(i) + "]";
        if (!p.is_object()) {
            add("invalid_type", at + " must be an object");
            continue;
        }
        complete = true;
        for (const char* key : {"id", "position", "audio", "cluster", "duration_s"}) {
            if (!p.contains(key)) {
                add("missing_field", at + "." + key);
                complete = false;
            }
        }
        if (!complete) continue;

        if (!p["id"].is_number_integer()) {
            add("invalid_type", at + ".id must be an integer");
        } else {
            const auto id = p["id"].get<std::int64_t>();
            if (!seen.insert(id).second) add("duplicate_point_id", at + " repeats id " + std::to_string(id));
            if (id != static_cast<std::int64_t>(i)) {
                add("point_id_mismatch", at + " has id " + std::to_string(id) + ", expected segment index " +
                                             std::to_string(i));
            }
        }

        const json& pos = p["position"];
        bool pos_ok = pos.is_object();
        for (const char* axis : {"x", "y", "z"}) {
            if (!pos_ok || !pos.contains(axis) || !pos[axis].is_number() || !std::isfinite(pos[axis].get<double>())) {
                add("non_finite_value", at + ".position." + axis);
                pos_ok = false;
                break;
            }
        }
        if (pos_ok && radius > 0.0) {
            const double r = std::hypot(pos["x"].get<double>(), pos["y"].get<double>());
            if (std::abs(r - radius) > tol) {
                add("position_radius_mismatch", at + " lies at horizontal distance " + std::to_string(r) +
                                                    ", radius is " + std::to_string(radius));
            }
        }

        if (!p["audio"].is_string()) {
            add("invalid_type", at + ".audio must be a string");
        } else if (!std::filesystem::exists(base_dir / p["audio"].get<std::string>())) {
            add("missing_audio", at + " -> " + p["audio"].get<std::string>());
        }

        if (!p["cluster"].is_number_integer()) {
            add("invalid_type", at + ".cluster must be an integer");
        } else if (nc_ok) {
            const auto c = p["cluster"].get<std::int64_t>();
            if (c < 0 || c >= nc.get<std::int64_t>()) {
                add("cluster_out_of_range", at + " has cluster " + std::to_string(c));
            }
        }
        if (p.contains("cluster_name") && !p["cluster_name"].is_string()) {
            add("invalid_type", at + ".cluster_name must be a string");
        }
        if (!p["duration_s"].is_number() || !(p["duration_s"].get<double>() > 0.0)) {
            add("invalid_duration", at + ".duration_s must be positive");
        }
    }

    if (j.contains("seam_diagnostic")) {
        const json& s = j["seam_diagnostic"];
        bool ok = s.is_array() && s.size() == 2;
        for (std::size_t k = 0; ok && k < 2; ++k) {
            ok = s[k].is_number_integer() && seen.count(s[k].get<std::int64_t>()) == 1;
        }
        if (!ok) add("seam_out_of_range", "seam_diagnostic must name two existing point ids");
    }
    return out;
}

inline std::vector<Violation> validate_scene(const std::filesystem::path& path) {
    json j;
    try {
        j = read_json_file(path);
    } catch (const Error& e) {
        return {{"invalid_json", e.what()}};
    }
    return validate_scene(j, path.parent_path());
}

inline SceneManifest from_json(const json& j) {
    require_version(j, "scene manifest");
    SceneManifest m;
    try {
        m.source_id = j.at("source_id").get<std::string>();
        m.radius = j.at("radius").get<double>();
        if (!j.at("panorama").is_null()) m.panorama = j.at("panorama").get<std::string>();
        m.n_clusters = j.at("n_clusters").get<int>();
        const auto& c = j.at("colors");
        m.colors = {c.at("unexplored").get<std::string>(), c.at("playing").get<std::string>(),
                    c.at("explored").get<std::string>()};
        for (const auto& jp : j.at("points")) {
            ScenePoint p;
            p.id = jp.at("id").get<std::int64_t>();
            p.x = jp.at("position").at("x").get<double>();
            p.y = jp.at("position").at("y").get<double>();
            p.z = jp.at("position").at("z").get<double>();
            p.audio = jp.at("audio").get<std::string>();
            p.cluster = jp.at("cluster").get<int>();
            if (jp.contains("cluster_name")) p.cluster_name = jp.at("cluster_name").get<std::string>();
            p.duration_s = jp.at("duration_s").get<double>();
            m.points.push_back(std::move(p));
        }
        if (j.contains("seam_diagnostic")) {
            m.seam = {j["seam_diagnostic"].at(0).get<std::int64_t>(), j["seam_diagnostic"].at(1).get<std::int64_t>()};
        }
    } catch (const json::exception& e) {
        throw Error(std::string("scene manifest: ") + e.what());
    }
    return m;
}

/// Loads a manifest, failing with every violation listed if it does not validate.
inline SceneManifest load_scene(const std::filesystem::path& path) {
    auto violations = validate_scene(path);
    if (!violations.empty()) {
        std::string msg = path.string() + ": invalid scene manifest:";
        for (const auto& v : violations) msg += "\n  " + v.code + ": " + v.detail;
        throw Error(msg);
    }
    return from_json(read_json_file(path));
}

} // namespace soundscape::scene
