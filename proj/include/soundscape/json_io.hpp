#pragma once

#include "soundscape/common.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace soundscape {

using json = nlohmann::json;

namespace detail {

/// Rounds to `digits` significant decimal digits. The JSON writer emits the
/// shortest round-trip representation, so rounded values print with at most
/// that many digits.
inline double round_significant(double v, int digits = 9) {
    if (!std::isfinite(v) || v == 0.0) return v == 0.0 ? 0.0 : v;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return std::strtod(buf, nullptr);
}

} // namespace detail

/// Pretty-printed, key-sorted, newline-terminated. Identical values give identical bytes.
inline std::string canonical_dump(const json& j) { return j.dump(2) + "\n"; }

inline void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << canonical_dump(j);
    if (!out) throw Error("write failed: " + path.string());
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(path.string() + ": malformed JSON: " + e.what());
    }
}

inline void require_version(const json& j, const std::string& what) {
    if (!j.is_object() || !j.contains("version")) {
        throw VersionError(what + ": missing schema version (expected " + kSchemaVersion + ")");
    }
    const auto& v = j.at("version");
    if (!v.is_string() || v.get<std::string>() != kSchemaVersion) {
        throw VersionError(what + ": unsupported schema version " + v.dump() + " (expected \"" +
                           kSchemaVersion + "\")");
    }
}

} // namespace soundscape
