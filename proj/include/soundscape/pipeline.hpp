#pragma once

// Stage-wise pipeline driven by the command-line tool. Each stage reads the
// previous stage's artifact from disk and writes its own, so running the stages
// one by one produces the same bytes as a full run.

#include "soundscape/artifacts.hpp"
#include "soundscape/audio_io.hpp"
#include "soundscape/clustering.hpp"
#include "soundscape/embedding.hpp"
#include "soundscape/features.hpp"
#include "soundscape/json_io.hpp"
#include "soundscape/scene.hpp"
#include "soundscape/spatial.hpp"
#include "soundscape/trajectory.hpp"

#include <openssl/evp.h>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace soundscape::pipeline {

namespace fs = std::filesystem;

enum class GatePolicy { strict, loose, allow_failed };

inline GatePolicy gate_policy_from_string(const std::string& s) {
    if (s == "strict") return GatePolicy::strict;
    if (s == "loose") return GatePolicy::loose;
    if (s == "allow-failed" || s == "allow_failed") return GatePolicy::allow_failed;
    throw Error("unknown gate policy '" + s + "' (expected strict, loose or allow-failed)");
}

inline const char* to_string(GatePolicy p) {
    switch (p) {
    case GatePolicy::strict: return "strict";
    case GatePolicy::loose: return "loose";
    case GatePolicy::allow_failed: return "allow-failed";
    }
    return "loose";
}

inline bool gate_allowed(embedding::Gate gate, GatePolicy policy) {
    switch (policy) {
    case GatePolicy::strict: return gate == embedding::Gate::strict;
    case GatePolicy::loose: return gate != embedding::Gate::failed;
    case GatePolicy::allow_failed: return true;
    }
    return false;
}

enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitGate = 2, kExitValidation = 3 };

/// Error tagged with the pipeline stage that raised it.
class StageError : public Error {
public:
    StageError(const std::string& stage, const std::string& what, bool version = false)
        : Error("[" + stage + "] " + what), stage_(stage), version_(version) {}
    const std::string& stage() const { return stage_; }
    bool version_mismatch() const { return version_; }

private:
    std::string stage_;
    bool version_;
};

template <typename Fn>
auto run_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const VersionError& e) {
        throw StageError(stage, e.what(), true);
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

struct TsneGrid {
    std::vector<double> perplexities = {5.0, 15.0, 30.0};
    std::vector<double> learning_rates = {200.0};
    std::size_t runs_per_cell = 2;
    embedding::TsneParams base; ///< seed, iterations, schedule
};

struct EpsSweep {
    std::vector<double> values; ///< empty: derived from pairwise-distance percentiles
    std::size_t count = 40;
    int min_samples = clustering::kDefaultMinSamples;
};

struct PipelineConfig {
    std::vector<std::string> inputs;
    bool mix = false;
    std::optional<std::string> source_id;
    double segment_duration_s = 10.0;
    features::MfccConfig mfcc;
    bool standardize = false;
    TsneGrid tsne;
    GatePolicy gate_policy = GatePolicy::loose;
    EpsSweep eps;
    double radius = spatial::kDefaultRadius;
    std::optional<spatial::ZRange> vertical_fit;
    std::optional<std::string> panorama;
    std::optional<std::string> names;
    std::string output_dir;
    std::size_t threads = 0;
    double diversity_threshold = 0.9;
};

inline json to_json(const PipelineConfig& c) {
    json mfcc = {{"frame_len", c.mfcc.frame_len}, {"hop", c.mfcc.hop},           {"n_fft", c.mfcc.n_fft},
                 {"n_mels", c.mfcc.n_mels},       {"n_coeffs", c.mfcc.n_coeffs}, {"fmin", c.mfcc.fmin},
                 {"fmax", c.mfcc.fmax},           {"log_floor", c.mfcc.log_floor}, {"delta_width", c.mfcc.delta_width}};
    json tsne = embedding::to_json(c.tsne.base);
    tsne.erase("perplexity");
    tsne.erase("learning_rate");
    tsne["perplexities"] = c.tsne.perplexities;
    tsne["learning_rates"] = c.tsne.learning_rates;
    tsne["runs_per_cell"] = c.tsne.runs_per_cell;
    return {{"inputs", c.inputs},
            {"mix", c.mix},
            {"source_id", c.source_id ? json(*c.source_id) : json(nullptr)},
            {"segment_duration_s", c.segment_duration_s},
            {"mfcc", std::move(mfcc)},
            {"standardize", c.standardize},
            {"tsne", std::move(tsne)},
            {"gate_policy", to_string(c.gate_policy)},
            {"eps_sweep", {{"values", c.eps.values}, {"count", c.eps.count}, {"min_samples", c.eps.min_samples}}},
            {"radius", c.radius},
            {"vertical_fit", c.vertical_fit ? json({c.vertical_fit->lo, c.vertical_fit->hi}) : json(nullptr)},
            {"panorama", c.panorama ? json(*c.panorama) : json(nullptr)},
            {"names", c.names ? json(*c.names) : json(nullptr)},
            {"output_dir", c.output_dir},
            {"diversity_threshold", c.diversity_threshold}};
}

/// Fields absent from `j` keep their defaults.
inline PipelineConfig config_from_json(const json& j, PipelineConfig c = {}) {
    try {
        if (j.contains("inputs")) c.inputs = j["inputs"].get<std::vector<std::string>>();
        c.mix = j.value("mix", c.mix);
        if (j.contains("source_id") && !j["source_id"].is_null()) c.source_id = j["source_id"].get<std::string>();
        c.segment_duration_s = j.value("segment_duration_s", c.segment_duration_s);
        if (j.contains("mfcc")) {
            const auto& m = j["mfcc"];
            c.mfcc.frame_len = m.value("frame_len", c.mfcc.frame_len);
            c.mfcc.hop = m.value("hop", c.mfcc.hop);
            c.mfcc.n_fft = m.value("n_fft", c.mfcc.n_fft);
            c.mfcc.n_mels = m.value("n_mels", c.mfcc.n_mels);
            c.mfcc.n_coeffs = m.value("n_coeffs", c.mfcc.n_coeffs);
            c.mfcc.fmin = m.value("fmin", c.mfcc.fmin);
            c.mfcc.fmax = m.value("fmax", c.mfcc.fmax);
            c.mfcc.log_floor = m.value("log_floor", c.mfcc.log_floor);
            c.mfcc.delta_width = m.value("delta_width", c.mfcc.delta_width);
        }
        c.standardize = j.value("standardize", c.standardize);
        if (j.contains("tsne")) {
            const auto& t = j["tsne"];
            json merged = embedding::to_json(c.tsne.base);
            merged.update(t);
            c.tsne.base = embedding::params_from_json(merged);
            if (t.contains("perplexities")) c.tsne.perplexities = t["perplexities"].get<std::vector<double>>();
            if (t.contains("learning_rates")) c.tsne.learning_rates = t["learning_rates"].get<std::vector<double>>();
            c.tsne.runs_per_cell = t.value("runs_per_cell", c.tsne.runs_per_cell);
        }
        if (j.contains("gate_policy")) c.gate_policy = gate_policy_from_string(j["gate_policy"].get<std::string>());
        if (j.contains("eps_sweep")) {
            const auto& e = j["eps_sweep"];
            if (e.contains("values")) c.eps.values = e["values"].get<std::vector<double>>();
            c.eps.count = e.value("count", c.eps.count);
            c.eps.min_samples = e.value("min_samples", c.eps.min_samples);
        }
        c.radius = j.value("radius", c.radius);
        if (j.contains("vertical_fit") && !j["vertical_fit"].is_null()) {
            const auto& v = j["vertical_fit"];
            c.vertical_fit = spatial::ZRange{v.at(0).get<double>(), v.at(1).get<double>()};
        }
        if (j.contains("panorama") && !j["panorama"].is_null()) c.panorama = j["panorama"].get<std::string>();
        if (j.contains("names") && !j["names"].is_null()) c.names = j["names"].get<std::string>();
        c.output_dir = j.value("output_dir", c.output_dir);
        c.threads = j.value("threads", c.threads);
        c.diversity_threshold = j.value("diversity_threshold", c.diversity_threshold);
    } catch (const json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
    return c;
}

inline std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot hash " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 15];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

inline std::string portable(const fs::path& p) { return p.generic_string(); }

/// Path of `target` relative to `base`, both resolved against the current directory.
inline std::string relative_to(const fs::path& target, const fs::path& base) {
    return portable(fs::weakly_canonical(fs::absolute(target)).lexically_relative(fs::weakly_canonical(fs::absolute(base))));
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
}

// ---- stages ---------------------------------------------------------------

inline constexpr const char* kSegmentsFile = "segments.json";
inline constexpr const char* kFeaturesCsv = "features.csv";
inline constexpr const char* kFeaturesJson = "features.json";
inline constexpr const char* kEmbeddingFile = "embedding.json";
inline constexpr const char* kClustersFile = "clusters.json";
inline constexpr const char* kSceneFile = "scene.json";
inline constexpr const char* kRunManifest = "run_manifest.json";
inline constexpr const char* kAudioDir = "audio";

/// Decodes (and mixes) the inputs, cuts segments and writes `<out>/audio/*.wav`
/// plus `<out>/segments.json`.
inline SegmentsManifest stage_segment(const PipelineConfig& cfg, const fs::path& out_dir, std::ostream& log) {
    return run_stage("segment", [&] {
        if (cfg.inputs.empty()) throw Error("no input audio given");
        if (cfg.inputs.size() > 1 && !cfg.mix) {
            throw Error("several inputs given; pass --mix to combine them into one program");
        }
        std::vector<audio::PcmBuffer> tracks;
        for (const auto& in : cfg.inputs) tracks.push_back(audio::load_audio(in));
        audio::PcmBuffer pcm = tracks.size() == 1 ? std::move(tracks.front()) : audio::mix_tracks(tracks);

        std::string source_id = cfg.source_id.value_or("");
        if (source_id.empty()) {
            for (const auto& in : cfg.inputs) source_id += (source_id.empty() ? "" : "+") + fs::path(in).stem().string();
        }
        auto set = audio::segment(pcm, cfg.segment_duration_s, source_id);

        ensure_dir(out_dir);
        auto files = audio::write_segments(set, out_dir / kAudioDir);
        SegmentsManifest m;
        m.source_id = set.source_id;
        m.sample_rate = set.sample_rate;
        m.segment_duration_s = set.segment_duration_s;
        m.segment_samples = set.segment_samples();
        m.dropped_samples = pcm.size() - set.size() * set.segment_samples();
        for (auto& f : files) m.files.push_back({f.index, portable(fs::path(kAudioDir) / f.path)});
        write_json_file(out_dir / kSegmentsFile, soundscape::to_json(m));
        log << "segment: " << set.size() << " x " << cfg.segment_duration_s << " s segments from '"
            << source_id << "' (" << m.dropped_samples << " trailing samples dropped)\n";
        return m;
    });
}

struct FeaturesResult {
    features::FeatureTable table;
    double max_cosine = 0.0;
};

inline FeaturesResult stage_features(const fs::path& segments_json, const PipelineConfig& cfg,
                                     const fs::path& out_dir, std::ostream& log) {
    return run_stage("features", [&] {
        const auto manifest = segments_from_json(read_json_file(segments_json));
        const auto set = load_segment_set(manifest, segments_json.parent_path());
        FeaturesResult r;
        r.table = features::build_table(set, cfg.mfcc, {cfg.standardize, cfg.threads});
        r.max_cosine = features::diversity_check(r.table);

        ensure_dir(out_dir);
        features::write_table_csv(r.table, out_dir / kFeaturesCsv);
        write_json_file(out_dir / kFeaturesJson, soundscape::to_json(r.table));
        log << "features: " << r.table.rows() << " x " << r.table.cols() << " table, max pairwise cosine "
            << r.max_cosine << '\n';
        if (r.max_cosine > cfg.diversity_threshold) {
            log << "warning: max pairwise cosine similarity " << r.max_cosine << " exceeds "
                << cfg.diversity_threshold << "; segments may be near-duplicates\n";
        }
        return r;
    });
}

/// Grid cells whose perplexity is not below N are skipped with a warning.
inline embedding::GridResult stage_embed(const fs::path& features_path, const PipelineConfig& cfg,
                                         const fs::path& out_dir, std::ostream& log) {
    return run_stage("embed", [&] {
        const auto table = load_table(features_path);
        const auto n = static_cast<double>(table.rows());
        std::vector<double> perplexities;
        for (double p : cfg.tsne.perplexities) {
            if (p < n) {
                perplexities.push_back(p);
            } else {
                log << "warning: skipping perplexity " << p << " (not below N=" << table.rows() << ")\n";
            }
        }
        if (perplexities.empty()) throw Error("no perplexity in the grid is below N=" + std::to_string(table.rows()));
        const auto grid = embedding::make_grid(perplexities, cfg.tsne.learning_rates, cfg.tsne.base);
        auto result = embedding::grid_search(table, grid, cfg.tsne.runs_per_cell, cfg.threads);

        ensure_dir(out_dir);
        write_json_file(out_dir / kEmbeddingFile, embedding::to_json(result));
        log << "embed: best KL " << result.best.final_kl << " (perplexity " << result.best.params.perplexity
            << ", learning_rate " << result.best.params.learning_rate << ", seed " << result.best.params.seed
            << "), gate " << embedding::to_string(result.best.gate) << '\n';
        return result;
    });
}

inline clustering::ClusterAssignment stage_cluster(const fs::path& embedding_json, const PipelineConfig& cfg,
                                                   const fs::path& out_dir, std::ostream& log) {
    return run_stage("cluster", [&] {
        const auto emb = embedding::embedding_from_json(read_json_file(embedding_json));
        const auto eps_values =
            cfg.eps.values.empty() ? clustering::default_eps_values(emb.coords, cfg.eps.count) : cfg.eps.values;
        auto raw = clustering::eps_sweep(emb.coords, eps_values, cfg.eps.min_samples, cfg.threads);
        if (raw.all_noise) {
            throw Error("no eps value produced a cluster (all points are noise)");
        }
        auto assignment = clustering::assign_noise(raw, emb.coords);
        if (cfg.names) assignment.names = clustering::names_from_json(read_json_file(*cfg.names), assignment.n_clusters);

        ensure_dir(out_dir);
        write_json_file(out_dir / kClustersFile, clustering::to_json(assignment));
        log << "cluster: " << assignment.n_clusters << " clusters at eps " << assignment.eps_used << ", "
            << assignment.noise_count << " noise points reassigned\n";
        return assignment;
    });
}

/// Builds `<out>/scene.json`. The panorama, if any, is copied into the bundle.
inline scene::SceneManifest stage_scene(const fs::path& segments_json, const fs::path& embedding_json,
                                        const fs::path& clusters_json, const PipelineConfig& cfg,
                                        const fs::path& out_dir, std::ostream& log) {
    return run_stage("scene", [&] {
        const auto segments = segments_from_json(read_json_file(segments_json));
        const auto emb = embedding::embedding_from_json(read_json_file(embedding_json));
        const auto assignment = clustering::assignment_from_json(read_json_file(clusters_json));
        if (static_cast<std::size_t>(emb.coords.rows()) != segments.files.size()) {
            throw Error("embedding has " + std::to_string(emb.coords.rows()) + " points but there are " +
                        std::to_string(segments.files.size()) + " segments");
        }

        ensure_dir(out_dir);
        std::optional<std::string> panorama;
        if (cfg.panorama) {
            const fs::path src(*cfg.panorama);
            if (!fs::is_regular_file(src)) throw Error("panorama not found: " + src.string());
            const std::string name = "panorama" + src.extension().string();
            if (fs::weakly_canonical(src) != fs::weakly_canonical(out_dir / name)) {
                fs::copy_file(src, out_dir / name, fs::copy_options::overwrite_existing);
            }
            panorama = name;
        }

        auto layout = spatial::cylindrical_map(emb.coords, cfg.radius);
        auto points = spatial::vertical_fit(std::move(layout.points), cfg.vertical_fit);

        std::vector<audio::SegmentFile> audio_files;
        for (const auto& f : segments.files) {
            audio_files.push_back({f.index, relative_to(segments_json.parent_path() / f.path, out_dir)});
        }
        scene::SceneOptions opts;
        opts.source_id = segments.source_id;
        opts.radius = cfg.radius;
        opts.duration_s = segments.segment_duration_s;
        opts.panorama = panorama;
        opts.bundle_dir = out_dir;
        auto manifest = scene::assemble_scene(points, layout.seam, assignment, audio_files, opts);
        scene::export_scene(manifest, out_dir / kSceneFile);
        log << "scene: " << manifest.points.size() << " points on radius " << cfg.radius << "; seam pair ("
            << layout.seam.at_min << ", " << layout.seam.at_max << ") shares theta 0 = 2pi\n";
        return manifest;
    });
}

inline trajectory::TrajectoryStats stage_analyze(const fs::path& scene_json, const fs::path& trajectory_json,
                                                 const fs::path& out_dir, std::ostream& log) {
    return run_stage("analyze", [&] {
        const auto manifest = scene::load_scene(scene_json);
        const auto traj = trajectory::parse_log(trajectory_json, manifest);
        auto stats = trajectory::compute_stats(traj, manifest);
        trajectory::export_stats(stats, out_dir);
        log << "analyze: " << stats.n_events << " events, coverage " << stats.coverage << ", within-cluster ratio "
            << stats.within_cluster_ratio << '\n';
        return stats;
    });
}

struct RunOutcome {
    int exit_code = kExitOk;
    embedding::Gate gate = embedding::Gate::failed;
    fs::path bundle_dir;
};

/// segment -> features -> embed -> cluster -> scene, then run_manifest.json.
/// Stops after the embedding with kExitGate when the gate policy rejects it.
inline RunOutcome run_pipeline(const PipelineConfig& cfg, std::ostream& log) {
    if (cfg.output_dir.empty()) throw Error("no output directory given");
    const fs::path out(cfg.output_dir);
    if (cfg.panorama && !fs::is_regular_file(*cfg.panorama)) {
        throw StageError("scene", "panorama not found: " + *cfg.panorama);
    }

    RunOutcome outcome;
    outcome.bundle_dir = out;
    stage_segment(cfg, out, log);
    auto feats = stage_features(out / kSegmentsFile, cfg, out, log);
    auto grid = stage_embed(out / kFeaturesCsv, cfg, out, log);
    outcome.gate = grid.best.gate;

    json manifest = {{"version", kSchemaVersion},
                     {"config", to_json(cfg)},
                     {"max_pairwise_cosine", feats.max_cosine},
                     {"gate", embedding::to_string(grid.best.gate)},
                     {"gate_policy", to_string(cfg.gate_policy)},
                     {"best_params", embedding::to_json(grid.best.params)}};
    json seeds = json::array();
    for (const auto& r : grid.runs) seeds.push_back(r.params.seed);
    manifest["seeds"] = std::move(seeds);

    std::vector<const char*> artifacts = {kSegmentsFile, kFeaturesCsv, kFeaturesJson, kEmbeddingFile};
    if (!gate_allowed(grid.best.gate, cfg.gate_policy)) {
        log << "error: embedding gate '" << embedding::to_string(grid.best.gate) << "' (KL " << grid.best.final_kl
            << ") violates gate policy '" << to_string(cfg.gate_policy) << "'\n";
        outcome.exit_code = kExitGate;
    } else {
        if (grid.best.gate == embedding::Gate::loose) {
            log << "warning: best KL " << grid.best.final_kl << " passes only the loose gate (< 1.0)\n";
        }
        if (grid.best.gate == embedding::Gate::failed) {
            log << "warning: best KL " << grid.best.final_kl << " fails the KL gate; continuing (allow-failed)\n";
        }
        stage_cluster(out / kEmbeddingFile, cfg, out, log);
        stage_scene(out / kSegmentsFile, out / kEmbeddingFile, out / kClustersFile, cfg, out, log);
        artifacts.push_back(kClustersFile);
        artifacts.push_back(kSceneFile);
    }

    json hashes = json::object();
    for (const char* name : artifacts) hashes[name] = sha256_file(out / name);
    manifest["artifacts"] = std::move(hashes);
    manifest["exit_code"] = outcome.exit_code;
    write_json_file(out / kRunManifest, manifest);
    return outcome;
}

} // namespace soundscape::pipeline
