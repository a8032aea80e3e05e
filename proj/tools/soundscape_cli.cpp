// soundscape: turn a long recording into a navigable 3D soundscape bundle and
// analyze exploration logs recorded in it.

#include "soundscape/pipeline.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace soundscape;
using pipeline::PipelineConfig;

namespace {

/// Flag values are captured here and applied on top of the config file, so any
/// flag the user actually passed wins over the file.
struct Overrides {
    std::string config_path;
    std::vector<std::string> inputs;
    bool mix = false;
    std::string source_id;
    double segment_duration_s = 0;
    std::size_t frame_len = 0, hop = 0, n_fft = 0, n_mels = 0;
    bool standardize = false;
    std::vector<double> perplexities, learning_rates;
    std::size_t runs_per_cell = 0;
    std::uint64_t seed = 0;
    int n_iter = 0;
    std::string gate_policy;
    bool allow_failed_gate = false;
    std::vector<double> eps_values;
    std::size_t eps_count = 0;
    int min_samples = 0;
    double radius = 0;
    std::vector<double> vertical_fit;
    std::string panorama, names, out;
    std::size_t threads = 0;
};

struct Flags {
    CLI::App* app = nullptr;
    Overrides v;

    bool given(const char* name) const {
        const auto* opt = app->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    }
};

void add_config(Flags& f) {
    f.app->add_option("--config", f.v.config_path, "JSON pipeline config; flags override its fields")
        ->check(CLI::ExistingFile);
    f.app->add_option("--threads", f.v.threads, "Worker threads (0 = all cores)");
}

void add_out(Flags& f) {
    f.app->add_option("-o,--out", f.v.out, "Output directory (default: $SOUNDSCAPE_OUTPUT_DIR or current dir)");
}

void add_segment_flags(Flags& f) {
    f.app->add_flag("--mix", f.v.mix, "Mix several input tracks into one program");
    f.app->add_option("--source-id", f.v.source_id, "Identifier used in segment file names");
    f.app->add_option("--segment-duration", f.v.segment_duration_s, "Segment length in seconds (default 10)")
        ->check(CLI::PositiveNumber);
}

void add_mfcc_flags(Flags& f) {
    f.app->add_option("--frame-len", f.v.frame_len, "Analysis frame in samples (default 25 ms)");
    f.app->add_option("--hop", f.v.hop, "Hop in samples (default 10 ms)");
    f.app->add_option("--n-fft", f.v.n_fft, "FFT size (power of two)");
    f.app->add_option("--n-mels", f.v.n_mels, "Mel bands (default 40)");
    f.app->add_flag("--standardize", f.v.standardize, "z-score feature columns");
}

void add_tsne_flags(Flags& f) {
    f.app->add_option("--perplexities", f.v.perplexities, "Perplexity grid")->expected(1, -1);
    f.app->add_option("--learning-rates", f.v.learning_rates, "Learning-rate grid")->expected(1, -1);
    f.app->add_option("--runs-per-cell", f.v.runs_per_cell, "Runs per grid cell (seed + run index)");
    f.app->add_option("--seed", f.v.seed, "Base RNG seed");
    f.app->add_option("--n-iter", f.v.n_iter, "Gradient-descent iterations (>= 250)");
    f.app->add_option("--gate-policy", f.v.gate_policy, "strict (KL < 0.5), loose (KL < 1) or allow-failed")
        ->check(CLI::IsMember({"strict", "loose", "allow-failed"}));
    f.app->add_flag("--allow-failed-gate", f.v.allow_failed_gate, "Continue even when KL >= 1");
}

void add_cluster_flags(Flags& f) {
    f.app->add_option("--eps", f.v.eps_values, "Explicit eps values to sweep")->expected(1, -1);
    f.app->add_option("--eps-count", f.v.eps_count, "Number of derived eps values (default 40)");
    f.app->add_option("--min-samples", f.v.min_samples, "DBSCAN min_samples (default 5)");
    f.app->add_option("--names", f.v.names, "Cluster annotation file {\"<id>\": \"name\"}")->check(CLI::ExistingFile);
}

void add_scene_flags(Flags& f) {
    f.app->add_option("--radius", f.v.radius, "Cylinder radius in scene units (default 5)")->check(CLI::PositiveNumber);
    f.app->add_option("--vertical-fit", f.v.vertical_fit, "Rescale elevation into [LO HI]")->expected(2);
    f.app->add_option("--panorama", f.v.panorama, "Panorama image copied into the bundle");
}

PipelineConfig resolve(const Flags& f) {
    PipelineConfig c;
    if (!f.v.config_path.empty()) c = pipeline::config_from_json(read_json_file(f.v.config_path));
    const auto& v = f.v;
    if (f.given("inputs")) c.inputs = v.inputs;
    if (f.given("--mix")) c.mix = true;
    if (f.given("--source-id")) c.source_id = v.source_id;
    if (f.given("--segment-duration")) c.segment_duration_s = v.segment_duration_s;
    if (f.given("--frame-len")) c.mfcc.frame_len = v.frame_len;
    if (f.given("--hop")) c.mfcc.hop = v.hop;
    if (f.given("--n-fft")) c.mfcc.n_fft = v.n_fft;
    if (f.given("--n-mels")) c.mfcc.n_mels = v.n_mels;
    if (f.given("--standardize")) c.standardize = true;
    if (f.given("--perplexities")) c.tsne.perplexities = v.perplexities;
    if (f.given("--learning-rates")) c.tsne.learning_rates = v.learning_rates;
    if (f.given("--runs-per-cell")) c.tsne.runs_per_cell = v.runs_per_cell;
    if (f.given("--seed")) c.tsne.base.seed = v.seed;
    if (f.given("--n-iter")) c.tsne.base.n_iter = v.n_iter;
    if (f.given("--gate-policy")) c.gate_policy = pipeline::gate_policy_from_string(v.gate_policy);
    if (f.given("--allow-failed-gate")) c.gate_policy = pipeline::GatePolicy::allow_failed;
    if (f.given("--eps")) c.eps.values = v.eps_values;
    if (f.given("--eps-count")) c.eps.count = v.eps_count;
    if (f.given("--min-samples")) c.eps.min_samples = v.min_samples;
    if (f.given("--names")) c.names = v.names;
    if (f.given("--radius")) c.radius = v.radius;
    if (f.given("--vertical-fit")) c.vertical_fit = spatial::ZRange{v.vertical_fit[0], v.vertical_fit[1]};
    if (f.given("--panorama")) c.panorama = v.panorama;
    if (f.given("--threads")) c.threads = v.threads;
    if (f.given("--out")) {
        c.output_dir = v.out;
    } else if (c.output_dir.empty()) {
        const char* env = std::getenv("SOUNDSCAPE_OUTPUT_DIR");
        c.output_dir = env && *env ? env : ".";
    }
    return c;
}

int report_violations(const std::vector<scene::Violation>& violations, const std::string& what) {
    if (violations.empty()) {
        std::cout << what << ": ok\n";
        return pipeline::kExitOk;
    }
    std::cout << what << ": " << violations.size() << " violation(s)\n";
    for (const auto& v : violations) std::cout << "  " << v.code << ": " << v.detail << '\n';
    return pipeline::kExitValidation;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Temporal audio to spatial soundscape pipeline"};
    app.require_subcommand(1);

    auto make = [&](const char* name, const char* help) {
        Flags f;
        f.app = app.add_subcommand(name, help);
        return f;
    };

    Flags run = make("run", "Full pipeline: segment, features, embed, cluster, scene");
    run.app->add_option("inputs", run.v.inputs, "Input WAV file(s)");
    add_config(run);
    add_out(run);
    add_segment_flags(run);
    add_mfcc_flags(run);
    add_tsne_flags(run);
    add_cluster_flags(run);
    add_scene_flags(run);

    Flags seg = make("segment", "Cut input audio into equal-length segments");
    seg.app->add_option("inputs", seg.v.inputs, "Input WAV file(s)");
    add_config(seg);
    add_out(seg);
    add_segment_flags(seg);

    std::string segments_path, features_path, embedding_path, clusters_path, scene_path, trajectory_path;

    Flags feat = make("features", "MFCC feature table from segments.json");
    feat.app->add_option("segments", segments_path, "segments.json")->required()->check(CLI::ExistingFile);
    add_config(feat);
    add_out(feat);
    add_mfcc_flags(feat);

    Flags emb = make("embed", "t-SNE grid search over a feature table");
    emb.app->add_option("features", features_path, "features.csv or features.json")->required()->check(CLI::ExistingFile);
    add_config(emb);
    add_out(emb);
    add_tsne_flags(emb);

    Flags clu = make("cluster", "DBSCAN eps sweep and noise reassignment");
    clu.app->add_option("embedding", embedding_path, "embedding.json")->required()->check(CLI::ExistingFile);
    add_config(clu);
    add_out(clu);
    add_cluster_flags(clu);

    Flags scn = make("scene", "Assemble scene.json from stage artifacts");
    scn.app->add_option("--segments", segments_path, "segments.json")->required()->check(CLI::ExistingFile);
    scn.app->add_option("--embedding", embedding_path, "embedding.json")->required()->check(CLI::ExistingFile);
    scn.app->add_option("--clusters", clusters_path, "clusters.json")->required()->check(CLI::ExistingFile);
    add_config(scn);
    add_out(scn);
    add_scene_flags(scn);

    Flags ana = make("analyze", "Exploration statistics from a trajectory log");
    ana.app->add_option("scene", scene_path, "scene.json")->required()->check(CLI::ExistingFile);
    ana.app->add_option("trajectory", trajectory_path, "trajectory.json")->required()->check(CLI::ExistingFile);
    add_out(ana);

    Flags val = make("validate", "Validate a scene manifest (and optionally a trajectory log)");
    val.app->add_option("scene", scene_path, "scene.json")->required();
    val.app->add_option("--trajectory", trajectory_path, "trajectory.json to check against the scene");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? pipeline::kExitOk : pipeline::kExitError;
    }

    try {
        if (*run.app) {
            auto cfg = resolve(run);
            auto outcome = pipeline::run_pipeline(cfg, std::cerr);
            if (outcome.exit_code == pipeline::kExitOk) {
                std::cout << (fs::path(cfg.output_dir) / pipeline::kSceneFile).string() << '\n';
            }
            return outcome.exit_code;
        }
        if (*seg.app) {
            auto cfg = resolve(seg);
            pipeline::stage_segment(cfg, cfg.output_dir, std::cerr);
            return pipeline::kExitOk;
        }
        if (*feat.app) {
            auto cfg = resolve(feat);
            pipeline::stage_features(segments_path, cfg, cfg.output_dir, std::cerr);
            return pipeline::kExitOk;
        }
        if (*emb.app) {
            auto cfg = resolve(emb);
            auto result = pipeline::stage_embed(features_path, cfg, cfg.output_dir, std::cerr);
            if (!pipeline::gate_allowed(result.best.gate, cfg.gate_policy)) {
                std::cerr << "error: gate '" << embedding::to_string(result.best.gate) << "' violates policy '"
                          << pipeline::to_string(cfg.gate_policy) << "'\n";
                return pipeline::kExitGate;
            }
            return pipeline::kExitOk;
        }
        if (*clu.app) {
            auto cfg = resolve(clu);
            pipeline::stage_cluster(embedding_path, cfg, cfg.output_dir, std::cerr);
            return pipeline::kExitOk;
        }
        if (*scn.app) {
            auto cfg = resolve(scn);
            pipeline::stage_scene(segments_path, embedding_path, clusters_path, cfg, cfg.output_dir, std::cerr);
            return pipeline::kExitOk;
        }
        if (*ana.app) {
            auto cfg = resolve(ana);
            pipeline::stage_analyze(scene_path, trajectory_path, cfg.output_dir, std::cerr);
            return pipeline::kExitOk;
        }
        if (*val.app) {
            int code = report_violations(scene::validate_scene(fs::path(scene_path)), scene_path);
            if (code == pipeline::kExitOk && !trajectory_path.empty()) {
                try {
                    auto manifest = scene::load_scene(scene_path);
                    trajectory::parse_log(fs::path(trajectory_path), manifest);
                    std::cout << trajectory_path << ": ok\n";
                } catch (const Error& e) {
                    std::cout << trajectory_path << ": " << e.what() << '\n';
                    code = pipeline::kExitValidation;
                }
            }
            return code;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return pipeline::kExitError;
    }
    return pipeline::kExitError;
}
