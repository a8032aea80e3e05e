#include "soundscape/artifacts.hpp"
#include "soundscape/clustering.hpp"
#include "oracles/dbscan_oracle.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace soundscape;
using namespace soundscape::clustering;

namespace {

std::vector<std::pair<double, double>> as_pairs(const Matrix& m) {
    std::vector<std::pair<double, double>> v;
    for (Eigen::Index i = 0; i < m.rows(); ++i) v.emplace_back(m(i, 0), m(i, 1));
    return v;
}

} // namespace

TEST(Dbscan, ThreeSeparatedBlobs) {
    std::mt19937_64 rng(1);
    auto x = testing_support::blobs(rng, {{0, 0}, {20, 0}, {0, 20}}, 20, 0.5);
    auto a = dbscan(x, 2.0, 5);
    EXPECT_EQ(a.n_clusters, 3);
    EXPECT_EQ(a.noise_count, 0u);
    // blobs are interleaved, so point k belongs to blob k % 3
    for (std::size_t i = 0; i < a.labels.size(); ++i) EXPECT_EQ(a.labels[i], a.labels[i % 3]);
    EXPECT_NE(a.labels[0], a.labels[1]);
    EXPECT_NE(a.labels[1], a.labels[2]);
}

TEST(Dbscan, IdenticalPoints) {
    Matrix x = Matrix::Constant(6, 2, 1.5);
    auto a = dbscan(x, 0.1, 5);
    EXPECT_EQ(a.n_clusters, 1);
    for (int l : a.labels) EXPECT_EQ(l, 0);
}

TEST(Dbscan, TooFewPointsAreAllNoise) {
    Matrix x(3, 2);
    x << 0, 0, 0.1, 0, 0, 0.1;
    auto a = dbscan(x, 10.0, 5);
    EXPECT_EQ(a.n_clusters, 0);
    EXPECT_EQ(a.noise_count, 3u);
    auto s = eps_sweep(x, {0.5, 1.0, 10.0}, 5);
    EXPECT_TRUE(s.all_noise);
    EXPECT_THROW(assign_noise(s, x), Error);
}

TEST(Dbscan, BorderJoinsLowestLabel) {
    // Two dense columns with a border point in between reachable from both.
    Matrix x(11, 2);
    x << 0, 0, 0, 0.1, 0, 0.2, 0, 0.3, 0, 0.4, //
        2, 0, 2, 0.1, 2, 0.2, 2, 0.3, 2, 0.4,  //
        1, 0;
    auto a = dbscan(x, 1.0, 5);
    EXPECT_EQ(a.n_clusters, 2);
    EXPECT_FALSE(a.core_flags[10]);
    EXPECT_EQ(a.labels[10], 0);
}

TEST(Dbscan, MatchesOracleOnRandomInstances) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.05, 1.5);
    for (int trial = 0; trial < 25; ++trial) {
        auto x = testing_support::blobs(rng, {{0, 0}, {4, 1}, {1, 5}}, 12, 0.3 + 0.1 * (trial % 5));
        const double eps = u(rng);
        const int min_samples = 2 + trial % 5;
        auto got = dbscan(x, eps, min_samples);
        auto want = oracle::dbscan(as_pairs(x), eps, min_samples);
        EXPECT_EQ(got.labels, want.labels);
        EXPECT_EQ(got.core_flags, want.core);
        EXPECT_EQ(got.n_clusters, want.n_clusters);
        if (got.n_clusters > 0) {
            EXPECT_EQ(assign_noise(got, x).labels, oracle::assign_noise(as_pairs(x), want));
        }
    }
}

TEST(Dbscan, InvalidArguments) {
    Matrix x = Matrix::Zero(3, 2);
    EXPECT_THROW(dbscan(x, 0.0, 5), Error);
    EXPECT_THROW(dbscan(x, 1.0, 0), Error);
    EXPECT_THROW(eps_sweep(x, {}, 5), Error);
}

TEST(Percentile, LinearInterpolation) {
    EXPECT_EQ(percentile({1, 2, 3, 4}, 0), 1.0);
    EXPECT_EQ(percentile({1, 2, 3, 4}, 100), 4.0);
    EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 50), 2.5);
    EXPECT_DOUBLE_EQ(percentile({0, 10}, 1), 0.1);
}

TEST(EpsGrid, GeometricBetweenPercentiles) {
    std::mt19937_64 rng(3);
    auto x = testing_support::random_matrix(rng, 30, 2);
    auto v = default_eps_values(x, 40);
    ASSERT_EQ(v.size(), 40u);
    for (std::size_t i = 1; i < v.size(); ++i) {
        EXPECT_GT(v[i], v[i - 1]);
        EXPECT_NEAR(v[i] / v[i - 1], v[1] / v[0], 1e-9);
    }
    Matrix dup = Matrix::Zero(10, 2);
    dup(9, 0) = 1.0;
    auto w = default_eps_values(dup, 5);
    EXPECT_GT(w.front(), 0.0);
}

TEST(EpsSweep, LexicographicSelection) {
    std::mt19937_64 rng(5);
    auto x = testing_support::blobs(rng, {{0, 0}, {10, 0}}, 15, 0.5);
    std::vector<double> eps = {0.01, 0.5, 1.0, 2.0, 3.0, 50.0};
    auto best = eps_sweep(x, eps, 5, 2);
    std::vector<ClusterAssignment> runs;
    for (double e : eps) runs.push_back(dbscan(x, e, 5));
    for (const auto& r : runs) {
        EXPECT_LE(r.n_clusters, best.n_clusters);
        if (r.n_clusters == best.n_clusters) {
            EXPECT_GE(r.noise_count, best.noise_count);
            if (r.noise_count == best.noise_count) {
                EXPECT_GE(r.eps_used, best.eps_used);
            }
        }
    }
    EXPECT_EQ(best.n_clusters, 2);
    EXPECT_FALSE(best.all_noise);
}

TEST(AssignNoise, NearestCoreWithLowIndexTies) {
    Matrix x(11, 2);
    // cluster A around x=0, cluster B around x=4, noise at x=2
    x << 0, 0, 0, 0.125, 0, -0.125, 0.125, 0, -0.125, 0, //
        4, 0, 4, 0.125, 4, -0.125, 4.125, 0, 3.875, 0,   //
        2, 0;
    auto raw = dbscan(x, 0.3, 5);
    ASSERT_EQ(raw.n_clusters, 2);
    ASSERT_EQ(raw.labels[10], kNoise);
    auto out = assign_noise(raw, x);
    // nearest cores: index 3 (0.125, 0) and index 9 (3.875, 0), both at 1.875; tie -> index 3
    EXPECT_EQ(out.labels[10], raw.labels[3]);
    EXPECT_EQ(out.noise_count, 1u);
    for (int l : out.labels) EXPECT_GE(l, 0);
}

TEST(Artifact, ClustersJsonRoundTripAndNames) {
    std::mt19937_64 rng(9);
    auto x = testing_support::blobs(rng, {{0, 0}, {10, 0}}, 10, 0.5);
    auto a = assign_noise(eps_sweep(x, {1.0, 2.0}, 5), x);
    a.names = names_from_json(json{{"0", "birds"}, {"1", "wind"}}, a.n_clusters);
    auto back = assignment_from_json(json::parse(clustering::to_json(a).dump()));
    EXPECT_EQ(back.labels, a.labels);
    EXPECT_EQ(back.core_flags, a.core_flags);
    EXPECT_EQ(back.names, a.names);
    EXPECT_THROW(names_from_json(json{{"7", "x"}}, a.n_clusters), Error);
    EXPECT_THROW(names_from_json(json{{"zero", "x"}}, a.n_clusters), Error);
}
