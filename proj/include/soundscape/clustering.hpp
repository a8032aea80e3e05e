#pragma once

// DBSCAN over 2D embedding coordinates, eps sweep selection and nearest-core
// reassignment of noise points.

#include "soundscape/common.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace soundscape::clustering {

inline constexpr int kNoise = -1;
inline constexpr int kDefaultMinSamples = 5;

struct ClusterAssignment {
    std::vector<int> labels;      ///< -1 marks noise until assign_noise() runs
    int n_clusters = 0;
    double eps_used = 0.0;
    int min_samples = kDefaultMinSamples;
    std::vector<bool> core_flags;
    std::size_t noise_count = 0;  ///< noise points found by DBSCAN, before reassignment
    bool all_noise = false;       ///< no eps in the sweep produced a cluster
    std::map<int, std::string> names;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> neighborhoods(const Matrix& coords, double eps) {
    const auto n = static_cast<std::size_t>(coords.rows());
    const double eps2 = eps * eps;
    std::vector<std::vector<std::size_t>> nbrs(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if ((coords.row(static_cast<Eigen::Index>(i)) - coords.row(static_cast<Eigen::Index>(j)))
                    .squaredNorm() <= eps2) {
                nbrs[i].push_back(j);
            }
        }
    }
    return nbrs;
}

} // namespace detail

/// Standard DBSCAN. A point is core when its closed eps-ball (itself included) holds at
/// least `min_samples` points. Seeds are visited in ascending index order and each
/// cluster is fully expanded before the next starts, so a border point reachable from
/// several clusters joins the one with the lowest label.
inline ClusterAssignment dbscan(const Matrix& coords, double eps, int min_samples = kDefaultMinSamples) {
    if (coords.rows() < 1) throw Error("dbscan: no points");
    if (!(eps > 0.0)) throw Error("dbscan: eps must be positive");
    if (min_samples < 1) throw Error("dbscan: min_samples must be at least 1");

    const auto n = static_cast<std::size_t>(coords.rows());
    const auto nbrs = detail::neighborhoods(coords, eps);
    constexpr int unvisited = -2;

    ClusterAssignment out;
    out.eps_used = eps;
    out.min_samples = min_samples;
    out.labels.assign(n, unvisited);
    out.core_flags.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        out.core_flags[i] = nbrs[i].size() >= static_cast<std::size_t>(min_samples);
    }

    int cluster = 0;
    std::deque<std::size_t> queue;
    for (std::size_t seed = 0; seed < n; ++seed) {
        if (out.labels[seed] != unvisited) continue;
        if (!out.core_flags[seed]) {
            out.labels[seed] = kNoise;
            continue;
        }
        out.labels[seed] = cluster;
        queue.assign(nbrs[seed].begin(), nbrs[seed].end());
        while (!queue.empty()) {
            const std::size_t q = queue.front();
            queue.pop_front();
            if (out.labels[q] == kNoise) out.labels[q] = cluster;
            if (out.labels[q] != unvisited) continue;
            out.labels[q] = cluster;
            if (out.core_flags[q]) queue.insert(queue.end(), nbrs[q].begin(), nbrs[q].end());
        }
        ++cluster;
    }

    out.n_clusters = cluster;
    out.noise_count = static_cast<std::size_t>(std::count(out.labels.begin(), out.labels.end(), kNoise));
    return out;
}

/// Linear-interpolated percentile of the values (q in [0, 100]).
inline double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw Error("percentile of empty set");
    std::sort(values.begin(), values.end());
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

/// `count` eps values spaced geometrically between the 1st and 99th percentile of
/// pairwise distances. A zero lower bound (duplicate points) is raised to the
/// smallest positive distance.
inline std::vector<double> default_eps_values(const Matrix& coords, std::size_t count = 40,
                                              double lo_pct = 1.0, double hi_pct = 99.0) {
    const auto n = coords.rows();
    if (n < 2) throw Error("eps grid needs at least 2 points");
    if (count == 0) throw Error("eps grid needs at least one value");
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    double smallest_positive = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d = (coords.row(i) - coords.row(j)).norm();
            dists.push_back(d);
            if (d > 0.0) smallest_positive = std::min(smallest_positive, d);
        }
    }
    if (std::isinf(smallest_positive)) throw Error("eps grid: all points coincide");
    double lo = std::max(percentile(dists, lo_pct), smallest_positive);
    double hi = std::max(percentile(dists, hi_pct), lo);

    std::vector<double> eps(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double t = count == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(count - 1);
        eps[k] = lo * std::pow(hi / lo, t);
    }
    eps.front() = lo;
    eps.back() = count == 1 ? lo : hi;
    return eps;
}

/// Runs DBSCAN for every eps and keeps the run with the most clusters, then the
/// fewest noise points, then the smallest eps. The result still carries -1 noise labels.
inline ClusterAssignment eps_sweep(const Matrix& coords, const std::vector<double>& eps_values,
                                   int min_samples = kDefaultMinSamples, std::size_t threads = 0) {
    if (eps_values.empty()) throw Error("eps_sweep: empty eps list");

    std::vector<ClusterAssignment> runs(eps_values.size());
    soundscape::detail::parallel_for(eps_values.size(), threads, [&](std::size_t k) {
        runs[k] = dbscan(coords, eps_values[k], min_samples);
    });

    std::size_t best = 0;
    for (std::size_t k = 1; k < runs.size(); ++k) {
        const auto& a = runs[k];
        const auto& b = runs[best];
        if (a.n_clusters != b.n_clusters) {
            if (a.n_clusters > b.n_clusters) best = k;
        } else if (a.noise_count != b.noise_count) {
            if (a.noise_count < b.noise_count) best = k;
        } else if (a.eps_used < b.eps_used) {
            best = k;
        }
    }
    ClusterAssignment out = std::move(runs[best]);
    out.all_noise = out.n_clusters == 0;
    return out;
}

/// Gives every noise point the label of its nearest core point (ties: lower point index).
inline ClusterAssignment assign_noise(const ClusterAssignment& raw, const Matrix& coords) {
    const auto n = static_cast<std::size_t>(coords.rows());
    if (raw.labels.size() != n || raw.core_flags.size() != n) {
        throw Error("assign_noise: labels/core flags do not match point count");
    }
    if (raw.n_clusters == 0) throw Error("assign_noise: no clusters to reassign noise points into");

    ClusterAssignment out = raw;
    for (std::size_t i = 0; i < n; ++i) {
        if (raw.labels[i] != kNoise) continue;
        double best = std::numeric_limits<double>::infinity();
        int label = kNoise;
        for (std::size_t j = 0; j < n; ++j) {
            if (!raw.core_flags[j]) continue;
            const double d = (coords.row(static_cast<Eigen::Index>(i)) - coords.row(static_cast<Eigen::Index>(j)))
                                 .squaredNorm();
            if (d < best) {
                best = d;
                label = raw.labels[j];
            }
        }
        out.labels[i] = label;
    }
    return out;
}

} // namespace soundscape::clustering
