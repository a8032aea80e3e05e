#pragma once

// JSON forms of the intermediate pipeline artifacts: segments.json,
// features.json, embedding.json and clusters.json.

#include "soundscape/audio_io.hpp"
#include "soundscape/clustering.hpp"
#include "soundscape/embedding.hpp"
#include "soundscape/features.hpp"
#include "soundscape/json_io.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace soundscape {

// ---- segments -------------------------------------------------------------

struct SegmentsManifest {
    std::string source_id;
    int sample_rate = 0;
    double segment_duration_s = 0.0;
    std::size_t segment_samples = 0;
    std::size_t dropped_samples = 0;
    std::vector<audio::SegmentFile> files; ///< relative to the manifest's directory
};

inline json to_json(const SegmentsManifest& m) {
    json files = json::array();
    for (const auto& f : m.files) files.push_back({{"index", f.index}, {"path", f.path}});
    return {{"version", kSchemaVersion},
            {"source_id", m.source_id},
            {"sample_rate", m.sample_rate},
            {"segment_duration_s", m.segment_duration_s},
            {"segment_samples", m.segment_samples},
            {"tail_policy", "drop"},
            {"dropped_samples", m.dropped_samples},
            {"segments", std::move(files)}};
}

inline SegmentsManifest segments_from_json(const json& j) {
    require_version(j, "segments manifest");
    SegmentsManifest m;
    try {
        m.source_id = j.at("source_id").get<std::string>();
        m.sample_rate = j.at("sample_rate").get<int>();
        m.segment_duration_s = j.at("segment_duration_s").get<double>();
        m.segment_samples = j.at("segment_samples").get<std::size_t>();
        m.dropped_samples = j.at("dropped_samples").get<std::size_t>();
        for (const auto& f : j.at("segments")) {
            m.files.push_back({f.at("index").get<std::size_t>(), f.at("path").get<std::string>()});
        }
    } catch (const json::exception& e) {
        throw Error(std::string("segments manifest: ") + e.what());
    }
    for (std::size_t i = 0; i < m.files.size(); ++i) {
        if (m.files[i].index != i) throw Error("segments manifest: segments out of order at " + std::to_string(i));
    }
    return m;
}

/// Reads every segment WAV listed in a manifest located in `base_dir`.
inline audio::SegmentSet load_segment_set(const SegmentsManifest& m, const std::filesystem::path& base_dir) {
    audio::SegmentSet set;
    set.source_id = m.source_id;
    set.sample_rate = m.sample_rate;
    set.segment_duration_s = m.segment_duration_s;
    for (const auto& f : m.files) {
        auto pcm = audio::load_audio(base_dir / f.path);
        if (pcm.sample_rate != m.sample_rate || pcm.size() != m.segment_samples) {
            throw Error(f.path + ": does not match manifest (rate/length)");
        }
        set.segments.push_back(std::move(pcm));
    }
    return set;
}

// ---- features -------------------------------------------------------------

inline json to_json(const features::FeatureTable& t) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
        std::vector<double> row(t.values.row(r).begin(), t.values.row(r).end());
        rows.push_back(std::move(row));
    }
    return {{"version", kSchemaVersion}, {"columns", t.column_names()}, {"rows", std::move(rows)}};
}

inline features::FeatureTable table_from_json(const json& j) {
    require_version(j, "feature table");
    features::FeatureTable t;
    try {
        const auto& rows = j.at("rows");
        const auto cols = j.at("columns").size();
        t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            auto row = rows[r].get<std::vector<double>>();
            if (row.size() != cols) throw Error("feature table: ragged row " + std::to_string(r));
            for (std::size_t c = 0; c < cols; ++c) {
                t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
            }
        }
    } catch (const json::exception& e) {
        throw Error(std::string("feature table: ") + e.what());
    }
    return t;
}

/// Accepts features.csv or features.json.
inline features::FeatureTable load_table(const std::filesystem::path& path) {
    if (path.extension() == ".json") return table_from_json(read_json_file(path));
    return features::read_table_csv(path);
}

// ---- embedding ------------------------------------------------------------

namespace embedding {

inline json to_json(const TsneParams& p) {
    return {{"perplexity", p.perplexity},
            {"learning_rate", p.learning_rate},
            {"n_iter", p.n_iter},
            {"early_exaggeration", p.early_exaggeration},
            {"exaggeration_iters", p.exaggeration_iters},
            {"initial_momentum", p.initial_momentum},
            {"final_momentum", p.final_momentum},
            {"momentum_switch_iter", p.momentum_switch_iter},
            {"seed", p.seed},
            {"init_scale", p.init_scale}};
}

inline TsneParams params_from_json(const json& j) {
    TsneParams p;
    p.perplexity = j.value("perplexity", p.perplexity);
    p.learning_rate = j.value("learning_rate", p.learning_rate);
    p.n_iter = j.value("n_iter", p.n_iter);
    p.early_exaggeration = j.value("early_exaggeration", p.early_exaggeration);
    p.exaggeration_iters = j.value("exaggeration_iters", p.exaggeration_iters);
    p.initial_momentum = j.value("initial_momentum", p.initial_momentum);
    p.final_momentum = j.value("final_momentum", p.final_momentum);
    p.momentum_switch_iter = j.value("momentum_switch_iter", p.momentum_switch_iter);
    p.seed = j.value("seed", p.seed);
    p.init_scale = j.value("init_scale", p.init_scale);
    return p;
}

inline json to_json(const GridResult& g) {
    const auto& e = g.best;
    json coords = json::array();
    for (Eigen::Index i = 0; i < e.coords.rows(); ++i) coords.push_back({e.coords(i, 0), e.coords(i, 1)});
    json runs = json::array();
    for (const auto& r : g.runs) {
        runs.push_back({{"cell", r.cell},
                        {"run", r.run},
                        {"perplexity", r.params.perplexity},
                        {"learning_rate", r.params.learning_rate},
                        {"seed", r.params.seed},
                        {"final_kl", r.final_kl},
                        {"calibration_converged", r.calibration_converged}});
    }
    return {{"version", kSchemaVersion},
            {"coords", std::move(coords)},
            {"final_kl", e.final_kl},
            {"kl_after_exaggeration", e.kl_after_exaggeration},
            {"params", to_json(e.params)},
            {"converged_gate", to_string(e.gate)},
            {"best_cell", g.best_cell},
            {"best_run", g.best_run},
            {"runs", std::move(runs)}};
}

inline Embedding2D embedding_from_json(const json& j) {
    require_version(j, "embedding");
    Embedding2D e;
    try {
        const auto& coords = j.at("coords");
        e.coords.resize(static_cast<Eigen::Index>(coords.size()), 2);
        for (std::size_t i = 0; i < coords.size(); ++i) {
            e.coords(static_cast<Eigen::Index>(i), 0) = coords[i].at(0).get<double>();
            e.coords(static_cast<Eigen::Index>(i), 1) = coords[i].at(1).get<double>();
        }
        e.final_kl = j.at("final_kl").get<double>();
        e.kl_after_exaggeration = j.value("kl_after_exaggeration", 0.0);
        e.params = params_from_json(j.at("params"));
        e.gate = gate_from_string(j.at("converged_gate").get<std::string>());
    } catch (const json::exception& ex) {
        throw Error(std::string("embedding: ") + ex.what());
    }
    return e;
}

} // namespace embedding

// ---- clusters -------------------------------------------------------------

namespace clustering {

inline json to_json(const ClusterAssignment& a) {
    json j = {{"version", kSchemaVersion},
              {"labels", a.labels},
              {"n_clusters", a.n_clusters},
              {"eps_used", a.eps_used},
              {"min_samples", a.min_samples},
              {"core_flags", a.core_flags},
              {"raw_noise_count", a.noise_count},
              {"all_noise", a.all_noise}};
    if (!a.names.empty()) {
        json names = json::object();
        for (const auto& [id, name] : a.names) names[std::to_string(id)] = name;
        j["names"] = std::move(names);
    }
    return j;
}

/// Parses a `{ "<cluster_id>": "display name" }` annotation object.
inline std::map<int, std::string> names_from_json(const json& j, int n_clusters) {
    if (!j.is_object()) throw Error("cluster names must be an object of id -> name");
    std::map<int, std::string> names;
    for (const auto& [key, value] : j.items()) {
        int id = -1;
        try {
            std::size_t used = 0;
            id = std::stoi(key, &used);
            if (used != key.size()) id = -1;
        } catch (const std::exception&) {
            id = -1;
        }
        if (id < 0 || id >= n_clusters) {
            throw Error("cluster names: '" + key + "' is not a cluster id in [0, " + std::to_string(n_clusters) + ")");
        }
        if (!value.is_string()) throw Error("cluster names: value for " + key + " must be a string");
        names[id] = value.get<std::string>();
    }
    return names;
}

inline ClusterAssignment assignment_from_json(const json& j) {
    require_version(j, "cluster assignment");
    ClusterAssignment a;
    try {
        a.labels = j.at("labels").get<std::vector<int>>();
        a.n_clusters = j.at("n_clusters").get<int>();
        a.eps_used = j.at("eps_used").get<double>();
        a.min_samples = j.at("min_samples").get<int>();
        a.core_flags = j.at("core_flags").get<std::vector<bool>>();
        a.noise_count = j.value("raw_noise_count", std::size_t{0});
        a.all_noise = j.value("all_noise", false);
        if (j.contains("names")) a.names = names_from_json(j["names"], a.n_clusters);
    } catch (const json::exception& e) {
        throw Error(std::string("cluster assignment: ") + e.what());
    }
    return a;
}

} // namespace clustering
} // namespace soundscape
