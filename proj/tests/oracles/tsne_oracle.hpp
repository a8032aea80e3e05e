#pragma once

// Direct-sum KL(P||Q) for a 2-D Student-t embedding and its central-difference
// gradient.

#include "soundscape/common.hpp"

#include <cmath>

namespace oracle {

inline double kl(const soundscape::Matrix& p, const soundscape::Matrix& y) {
    const auto n = y.rows();
    double z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j) z += 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j || p(i, j) <= 0.0) continue;
            const double q = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm()) / z;
            total += p(i, j) * std::log(p(i, j) / q);
        }
    return total;
}

inline soundscape::Matrix numeric_gradient(const soundscape::Matrix& p, const soundscape::Matrix& y, double h) {
    soundscape::Matrix g(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (Eigen::Index d = 0; d < y.cols(); ++d) {
            soundscape::Matrix plus = y, minus = y;
            plus(i, d) += h;
            minus(i, d) -= h;
            g(i, d) = (kl(p, plus) - kl(p, minus)) / (2.0 * h);
        }
    return g;
}

/// Random symmetric joint distribution with zero diagonal summing to 1.
template <typename Rng>
soundscape::Matrix random_joint(Rng& rng, Eigen::Index n) {
    std::uniform_real_distribution<double> u(0.01, 1.0);
    soundscape::Matrix p = soundscape::Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) p(i, j) = p(j, i) = u(rng);
    return p / p.sum();
}

} // namespace oracle
