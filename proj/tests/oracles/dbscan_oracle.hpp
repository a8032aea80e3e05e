#pragma once

// Reference DBSCAN by graph components: core points are connected when within
// eps; components are numbered by their smallest core index; a border point takes
// the smallest label among the core points that reach it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

struct DbscanResult {
    std::vector<int> labels;
    std::vector<bool> core;
    int n_clusters = 0;
};

/// Squared Euclidean distance; the eps test is done on squares.
inline double dist2(const std::vector<std::pair<double, double>>& pts, std::size_t a, std::size_t b) {
    const double dx = pts[a].first - pts[b].first, dy = pts[a].second - pts[b].second;
    return dx * dx + dy * dy;
}

inline DbscanResult dbscan(const std::vector<std::pair<double, double>>& pts, double eps, int min_samples) {
    const std::size_t n = pts.size();
    const double eps2 = eps * eps;
    DbscanResult r;
    r.core.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        int count = 0;
        for (std::size_t j = 0; j < n; ++j) count += dist2(pts, i, j) <= eps2;
        r.core[i] = count >= min_samples;
    }

    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (r.core[i] && r.core[j] && dist2(pts, i, j) <= eps2) {
                auto a = find(i), b = find(j);
                if (a != b) parent[std::max(a, b)] = std::min(a, b);
            }

    std::vector<int> root_label(n, -1);
    r.labels.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        if (!r.core[i]) continue;
        auto root = find(i);
        if (root_label[root] < 0) root_label[root] = r.n_clusters++;
        r.labels[i] = root_label[root];
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (r.core[i]) continue;
        int best = -1;
        for (std::size_t j = 0; j < n; ++j) {
            if (r.core[j] && dist2(pts, i, j) <= eps2 && (best < 0 || r.labels[j] < best)) best = r.labels[j];
        }
        r.labels[i] = best;
    }
    return r;
}

/// Noise points take the label of the nearest core point (lowest index on ties).
inline std::vector<int> assign_noise(const std::vector<std::pair<double, double>>& pts, const DbscanResult& r) {
    std::vector<int> out = r.labels;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (r.labels[i] >= 0) continue;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (!r.core[j]) continue;
            const double d = dist2(pts, i, j);
            if (d < best) {
                best = d;
                out[i] = r.labels[j];
            }
        }
    }
    return out;
}

} // namespace oracle
