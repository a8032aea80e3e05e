#include "soundscape/scene.hpp"
#include "scene_fixture.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace soundscape;
using namespace soundscape::scene;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> codes(const std::vector<Violation>& v) {
    std::vector<std::string> out;
    for (const auto& x : v) out.push_back(x.code);
    return out;
}

bool has(const std::vector<Violation>& v, const std::string& code) {
    auto c = codes(v);
    return std::find(c.begin(), c.end(), code) != c.end();
}

const double kPi = std::numbers::pi;

} // namespace

TEST(Scene, ExportedBundleValidates) {
    TempDir dir;
    auto m = testing_support::make_bundle(dir.path(), {0, kPi / 2, kPi, 1.5 * kPi}, {0, 0, 1, 1}, 2);
    EXPECT_TRUE(validate_scene(dir / "scene.json").empty());
    auto back = load_scene(dir / "scene.json");
    ASSERT_EQ(back.points.size(), 4u);
    EXPECT_EQ(back.points[2].cluster, 1);
    EXPECT_EQ(back.points[2].audio, "audio/fx_0002.wav");
    EXPECT_FALSE(back.panorama.has_value());
    EXPECT_EQ(back.n_clusters, 2);
    auto j = read_json_file(dir / "scene.json");
    EXPECT_EQ(j["version"], "1.0");
    EXPECT_EQ(j["colors"]["playing"], "#FF0000");
    EXPECT_TRUE(j["panorama"].is_null());
}

TEST(Scene, ExportIsByteDeterministic) {
    TempDir a, b;
    testing_support::make_bundle(a.path(), {0.3, 1.1, 2.9}, {0, 1, 0}, 2);
    testing_support::make_bundle(b.path(), {0.3, 1.1, 2.9}, {0, 1, 0}, 2);
    EXPECT_EQ(testing_support::slurp(a / "scene.json"), testing_support::slurp(b / "scene.json"));
}

TEST(Scene, DuplicateIdIsReported) {
    TempDir dir;
    testing_support::make_bundle(dir.path(), {0, 1, 2}, {0, 0, 0}, 1);
    auto j = read_json_file(dir / "scene.json");
    j["points"][2]["id"] = 1;
    auto v = validate_scene(j, dir.path());
    EXPECT_TRUE(has(v, "duplicate_point_id"));
}

TEST(Scene, RadiusPerturbationIsReported) {
    TempDir dir;
    testing_support::make_bundle(dir.path(), {0, 1, 2}, {0, 0, 0}, 1);
    auto j = read_json_file(dir / "scene.json");
    j["points"][1]["position"]["x"] = j["points"][1]["position"]["x"].get<double>() + 0.1;
    auto v = validate_scene(j, dir.path());
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].code, "position_radius_mismatch");
}

TEST(Scene, StructuralViolations) {
    TempDir dir;
    testing_support::make_bundle(dir.path(), {0, 1, 2}, {0, 0, 0}, 1);
    const auto good = read_json_file(dir / "scene.json");

    auto j = good;
    j["version"] = "0.9";
    EXPECT_TRUE(has(validate_scene(j, dir.path()), "unsupported_version"));
    j = good;
    j.erase("colors");
    EXPECT_TRUE(has(validate_scene(j, dir.path()), "missing_field"));
    j = good;
    j["colors"]["explored"] = "green";
    EXPECT_TRUE(has(validate_scene(j, dir.path()), "invalid_color"));
    j = good;
    j["radius"] = -1;
    EXPECT_TRUE(has(validate_scene(j, dir.path()), "invalid_radius"));
    j = good;
    j["panorama"] = "pano.jpg";
    EXPECT_TRUE(has(validate_scene(j, dir.path()), "missing_panorama"));
    j = good;
    j["points"][0]["audio"] = "audio/nope.wav";
    EXPECT_TRUE(has(validate_scene(j, dir.path()), "missing_audio"));
    j = good;
    j["points"][0]["cluster"] = 4;
    EXPECT_TRUE(has(validate_scene(j, dir.path()), "cluster_out_of_range"));
    j = good;
    j["points"][0]["duration_s"] = 0;
    EXPECT_TRUE(has(validate_scene(j, dir.path()), "invalid_duration"));
    j = good;
    j["points"][0]["position"]["z"] = "high";
    EXPECT_TRUE(has(validate_scene(j, dir.path()), "non_finite_value"));
    j = good;
    j["points"][0]["id"] = 2;
    j["points"][2]["id"] = 0;
    EXPECT_TRUE(has(validate_scene(j, dir.path()), "point_id_mismatch"));
    j = good;
    j["seam_diagnostic"] = {0, 9};
    EXPECT_TRUE(has(validate_scene(j, dir.path()), "seam_out_of_range"));
    j = good;
    j["points"].erase(1);
    j["points"].erase(1);
    j["points"].erase(0);
    EXPECT_TRUE(has(validate_scene(j, dir.path()), "invalid_type"));

    testing_support::spit(dir / "broken.json", "{ not json");
    EXPECT_TRUE(has(validate_scene(dir / "broken.json"), "invalid_json"));
    EXPECT_THROW(load_scene(dir / "broken.json"), Error);
}

TEST(Scene, PanoramaAndNamesAreCarried) {
    TempDir dir;
    testing_support::spit(dir / "pano.png", "png");
    std::vector<spatial::Point3D> pts(2);
    pts[0].x = 5;
    pts[1].x = -5;
    fs::create_directories(dir / "a");
    audio::write_wav(dir / "a/0.wav", {{0.0, 0.0}, 8000});
    audio::write_wav(dir / "a/1.wav", {{0.0, 0.0}, 8000});
    clustering::ClusterAssignment a;
    a.labels = {0, 0};
    a.n_clusters = 1;
    a.names = {{0, "birds"}};
    SceneOptions opts;
    opts.source_id = "s";
    opts.duration_s = 1;
    opts.panorama = "pano.png";
    opts.bundle_dir = dir.path();
    auto m = assemble_scene(pts, spatial::SeamPair{0, 1}, a, {{0, "a/0.wav"}, {1, "a/1.wav"}}, opts);
    export_scene(m, dir / "scene.json");
    EXPECT_TRUE(validate_scene(dir / "scene.json").empty());
    auto back = load_scene(dir / "scene.json");
    EXPECT_EQ(back.panorama, "pano.png");
    EXPECT_EQ(back.points[1].cluster_name, "birds");
    ASSERT_TRUE(back.seam.has_value());
    EXPECT_EQ(back.seam->second, 1);

    opts.panorama = "missing.png";
    EXPECT_THROW(assemble_scene(pts, std::nullopt, a, {{0, "a/0.wav"}, {1, "a/1.wav"}}, opts), Error);
    opts.panorama.reset();
    EXPECT_THROW(assemble_scene(pts, std::nullopt, a, {{0, "a/0.wav"}, {1, "a/gone.wav"}}, opts), Error);
    a.labels = {0, -1};
    EXPECT_THROW(assemble_scene(pts, std::nullopt, a, {{0, "a/0.wav"}, {1, "a/1.wav"}}, opts), Error);
}

TEST(JsonIo, SignificantDigitRounding) {
    EXPECT_EQ(detail::round_significant(1.0 / 3.0), 0.333333333);
    EXPECT_EQ(detail::round_significant(-2.0), -2.0);
    EXPECT_EQ(detail::round_significant(0.0), 0.0);
}
