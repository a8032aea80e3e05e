#pragma once

// Cylindrical layout of a 2D embedding around a listener at the origin.
// Coordinates use z as elevation.

#include "soundscape/common.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

namespace soundscape::spatial {

inline constexpr double kDefaultRadius = 5.0;

struct Point3D {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double theta = 0.0;
    std::size_t segment_index = 0;
};

/// Indices of the points with the smallest and largest x2D. They land at
/// theta = 0 and theta = 2*pi, i.e. the same horizontal position.
struct SeamPair {
    std::size_t at_min = 0;
    std::size_t at_max = 0;
};

struct CylinderLayout {
    std::vector<Point3D> points;
    SeamPair seam;
};

/// theta = 2*pi * (x2D - x_min) / (x_max - x_min); x3D = r cos(theta),
/// y3D = r sin(theta), z3D = y2D.
inline CylinderLayout cylindrical_map(const Matrix& coords, double radius = kDefaultRadius) {
    if (coords.cols() != 2) throw Error("cylindrical_map: coords must be N x 2");
    if (coords.rows() < 2) throw Error("cylindrical_map: need at least 2 points");
    if (!(radius > 0.0)) throw Error("cylindrical_map: radius must be positive");

    Eigen::Index imin = 0, imax = 0;
    const double xmin = coords.col(0).minCoeff(&imin);
    const double xmax = coords.col(0).maxCoeff(&imax);
    if (!(xmax > xmin)) throw Error("cylindrical_map: degenerate x range (all x2D equal)");

    CylinderLayout out;
    out.seam = {static_cast<std::size_t>(imin), static_cast<std::size_t>(imax)};
    out.points.reserve(static_cast<std::size_t>(coords.rows()));
    const double span = xmax - xmin;
    for (Eigen::Index i = 0; i < coords.rows(); ++i) {
        Point3D p;
        p.theta = 2.0 * std::numbers::pi * ((coords(i, 0) - xmin) / span);
        p.x = radius * std::cos(p.theta);
        p.y = radius * std::sin(p.theta);
        p.z = coords(i, 1);
        p.segment_index = static_cast<std::size_t>(i);
        out.points.push_back(p);
    }
    return out;
}

struct ZRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// Affine rescale of z into [lo, hi]; if every z is equal, all map to the midpoint.
inline std::vector<Point3D> vertical_fit(std::vector<Point3D> points, ZRange range) {
    if (!(range.hi > range.lo)) throw Error("vertical_fit: require z_hi > z_lo");
    if (points.empty()) return points;
    double zmin = points.front().z, zmax = points.front().z;
    for (const auto& p : points) {
        zmin = std::min(zmin, p.z);
        zmax = std::max(zmax, p.z);
    }
    if (!(zmax > zmin)) {
        for (auto& p : points) p.z = 0.5 * (range.lo + range.hi);
        return points;
    }
    const double width = range.hi - range.lo;
    for (auto& p : points) {
        p.z = std::clamp(range.lo + (p.z - zmin) * width / (zmax - zmin), range.lo, range.hi);
    }
    return points;
}

/// Identity when `range` is empty.
inline std::vector<Point3D> vertical_fit(std::vector<Point3D> points, const std::optional<ZRange>& range) {
    return range ? vertical_fit(std::move(points), *range) : points;
}

} // namespace soundscape::spatial
