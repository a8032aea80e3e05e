#pragma once

// Exact t-SNE: perplexity-calibrated affinities, Student-t low-dimensional
// kernel, momentum gradient descent with early exaggeration, and a parameter
// grid search that records which KL-divergence gate the best run passed.

#include "soundscape/common.hpp"
#include "soundscape/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace soundscape::embedding {

/// Quality tier of a finished embedding: strict is KL < 0.5, loose is KL < 1.
enum class Gate { strict, loose, failed };

inline constexpr double kStrictKl = 0.5;
inline constexpr double kLooseKl = 1.0;

inline Gate classify_gate(double kl) {
    if (kl < kStrictKl) return Gate::strict;
    if (kl < kLooseKl) return Gate::loose;
    return Gate::failed;
}

inline const char* to_string(Gate g) {
    switch (g) {
    case Gate::strict: return "strict";
    case Gate::loose: return "loose";
    case Gate::failed: return "failed";
    }
    return "failed";
}

inline Gate gate_from_string(const std::string& s) {
    if (s == "strict") return Gate::strict;
    if (s == "loose") return Gate::loose;
    if (s == "failed") return Gate::failed;
    throw Error("unknown gate tier '" + s + "'");
}

struct TsneParams {
    double perplexity = 30.0;
    double learning_rate = 200.0;
    int n_iter = 1000;
    double early_exaggeration = 12.0;
    int exaggeration_iters = 250;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch_iter = 250;
    std::uint64_t seed = 0;
    double init_scale = 1e-4;

    void validate() const {
        if (!(perplexity > 1.0)) throw Error("perplexity must exceed 1");
        if (!(learning_rate > 0.0)) throw Error("learning_rate must be positive");
        if (n_iter < 250 || n_iter < exaggeration_iters) {
            throw Error("n_iter must be at least 250 and cover the exaggeration phase");
        }
        if (!(init_scale > 0.0)) throw Error("init_scale must be positive");
    }

    bool operator==(const TsneParams&) const = default;
};

struct Embedding2D {
    Matrix coords; ///< N x 2
    double final_kl = 0.0;
    double kl_after_exaggeration = 0.0;
    TsneParams params;
    Gate gate = Gate::failed;
};

/// Squared Euclidean distances between rows.
inline Matrix pairwise_sq_dists(const Matrix& x) {
    const auto n = x.rows();
    if (n < 2) throw Error("need at least 2 rows for pairwise distances");
    Matrix d = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = (x.row(i) - x.row(j)).squaredNorm();
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    return d;
}

struct Conditionals {
    Matrix p;                      ///< row i is P(. | i), zero diagonal
    std::vector<double> precision; ///< beta_i = 1 / (2 sigma_i^2)
    std::vector<std::size_t> unconverged_rows;

    bool converged() const { return unconverged_rows.empty(); }
};

/// Binary search on each row's Gaussian precision so that the row's perplexity
/// 2^H(P(.|i)) equals `perplexity` within `tol`. Rows that do not reach the target
/// in `max_iter` steps keep their best precision and are listed in `unconverged_rows`.
inline Conditionals calibrate_conditionals(const Matrix& d2, double perplexity, double tol = 1e-5,
                                           int max_iter = 50) {
    const auto n = d2.rows();
    if (n < 2 || d2.cols() != n) throw Error("distance matrix must be square with N >= 2");
    if (!(perplexity > 1.0) || !(perplexity < static_cast<double>(n))) {
        throw Error("perplexity " + std::to_string(perplexity) + " must lie in (1, N=" +
                    std::to_string(n) + ")");
    }

    Conditionals out;
    out.p = Matrix::Zero(n, n);
    out.precision.assign(static_cast<std::size_t>(n), 1.0);
    std::vector<double> row(static_cast<std::size_t>(n));

    for (Eigen::Index i = 0; i < n; ++i) {
        // Shift by the nearest-neighbour distance so exp() cannot underflow for every j.
        double dmin = std::numeric_limits<double>::infinity();
        double dsum = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            dmin = std::min(dmin, d2(i, j));
            dsum += d2(i, j);
        }
        const double spread = dsum / static_cast<double>(n - 1) - dmin;
        double beta = spread > 0.0 ? 1.0 / spread : 1.0;
        double lo = 0.0, hi = std::numeric_limits<double>::infinity();

        // Returns the realized perplexity at beta, leaving unnormalized weights in row.
        auto evaluate = [&](double b, double& sum) {
            sum = 0.0;
            double weighted = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) {
                    row[static_cast<std::size_t>(j)] = 0.0;
                    continue;
                }
                const double shifted = d2(i, j) - dmin;
                const double w = std::exp(-b * shifted);
                row[static_cast<std::size_t>(j)] = w;
                sum += w;
                weighted += w * shifted;
            }
            return std::exp(std::log(sum) + b * weighted / sum);
        };

        double sum = 0.0;
        double best_beta = beta, best_err = std::numeric_limits<double>::infinity();
        bool ok = false;
        for (int it = 0; it < max_iter; ++it) {
            const double perp = evaluate(beta, sum);
            const double err = perp - perplexity;
            if (std::abs(err) < best_err) {
                best_err = std::abs(err);
                best_beta = beta;
            }
            if (std::abs(err) < tol) {
                ok = true;
                break;
            }
            if (err > 0.0) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
            // Bracket collapsed to machine precision; no further progress possible.
            if (!std::isinf(hi) && hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
        }
        if (!ok) {
            beta = best_beta;
            out.unconverged_rows.push_back(static_cast<std::size_t>(i));
        }
        evaluate(beta, sum);
        out.precision[static_cast<std::size_t>(i)] = beta;
        for (Eigen::Index j = 0; j < n; ++j) out.p(i, j) = row[static_cast<std::size_t>(j)] / sum;
    }
    return out;
}

/// Perplexity 2^H of one conditional row (natural-log form, zero entries skipped).
inline double row_perplexity(const Matrix& p, Eigen::Index i) {
    double h = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double v = p(i, j);
        if (v > 0.0) h -= v * std::log(v);
    }
    return std::exp(h);
}

inline constexpr double kJointFloor = 1e-12;

/// p_ij = (p_j|i + p_i|j) / 2N, off-diagonal entries floored at 1e-12 and the result
/// renormalized to unit mass.
inline Matrix symmetrize(const Matrix& conditional) {
    const auto n = conditional.rows();
    Matrix p = (conditional + conditional.transpose()) / (2.0 * static_cast<double>(n));
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        p(i, i) = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i) {
                p(i, j) = std::max(p(i, j), kJointFloor);
                total += p(i, j);
            }
        }
    }
    p /= total;
    return p;
}

namespace detail {

/// Student-t kernel w_ij = 1 / (1 + |y_i - y_j|^2) with zero diagonal; returns sum.
inline double student_kernel(const Matrix& y, Matrix& w) {
    const auto n = y.rows();
    w.resize(n, n);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        w(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double dx = y(i, 0) - y(j, 0);
            const double dy = y(i, 1) - y(j, 1);
            const double v = 1.0 / (1.0 + dx * dx + dy * dy);
            w(i, j) = v;
            w(j, i) = v;
            sum += 2.0 * v;
        }
    }
    return sum;
}

/// Gradient of KL(P || Q) scaled by `exaggeration` on P.
inline void kl_gradient(const Matrix& p, const Matrix& y, double exaggeration, Matrix& w, Matrix& grad) {
    const auto n = y.rows();
    const double inv_sum = 1.0 / student_kernel(y, w);
    grad.setZero(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        double gx = 0.0, gy = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double mult = (exaggeration * p(i, j) - w(i, j) * inv_sum) * w(i, j);
            gx += mult * (y(i, 0) - y(j, 0));
            gy += mult * (y(i, 1) - y(j, 1));
        }
        grad(i, 0) = 4.0 * gx;
        grad(i, 1) = 4.0 * gy;
    }
}

} // namespace detail

inline void check_joint(const Matrix& p, const Matrix& y) {
    if (p.rows() != p.cols()) throw Error("joint P must be square");
    if (y.rows() != p.rows() || y.cols() != 2) throw Error("coords must be N x 2 matching P");
}

/// KL(P || Q) with Q the normalized Student-t kernel of `coords`; 0 log 0 = 0.
inline double kl_divergence(const Matrix& p, const Matrix& coords) {
    check_joint(p, coords);
    Matrix w;
    const double sum = detail::student_kernel(coords, w);
    double kl = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
            if (i == j || p(i, j) <= 0.0) continue;
            kl += p(i, j) * std::log(p(i, j) * sum / w(i, j));
        }
    }
    return std::max(kl, 0.0);
}

/// dKL/dy_i = 4 sum_j (p_ij - q_ij)(y_i - y_j) / (1 + |y_i - y_j|^2).
inline Matrix kl_gradient(const Matrix& p, const Matrix& coords) {
    check_joint(p, coords);
    Matrix w, grad;
    detail::kl_gradient(p, coords, 1.0, w, grad);
    return grad;
}

/// Deterministic in (P, params): Gaussian init from params.seed, then gradient
/// descent with momentum, per-coordinate gains and early exaggeration. Coordinates
/// are re-centered to zero mean after every step.
inline Embedding2D tsne_optimize(const Matrix& p, const TsneParams& params) {
    params.validate();
    const auto n = p.rows();
    if (n < 2 || p.cols() != n) throw Error("joint P must be square with N >= 2");

    std::mt19937_64 rng(params.seed);
    std::normal_distribution<double> normal(0.0, params.init_scale);
    Matrix y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i, 0) = normal(rng);
        y(i, 1) = normal(rng);
    }

    Matrix update = Matrix::Zero(n, 2);
    Matrix gains = Matrix::Ones(n, 2);
    Matrix w, grad;
    Embedding2D out;
    out.params = params;

    for (int iter = 0; iter < params.n_iter; ++iter) {
        if (iter == params.exaggeration_iters) out.kl_after_exaggeration = kl_divergence(p, y);
        const double exaggeration = iter < params.exaggeration_iters ? params.early_exaggeration : 1.0;
        const double momentum = iter < params.momentum_switch_iter ? params.initial_momentum
                                                                   : params.final_momentum;
        detail::kl_gradient(p, y, exaggeration, w, grad);

        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index d = 0; d < 2; ++d) {
                double& g = gains(i, d);
                g = (grad(i, d) > 0.0) != (update(i, d) > 0.0) ? g + 0.2 : g * 0.8;
                g = std::max(g, 0.01);
                update(i, d) = momentum * update(i, d) - params.learning_rate * g * grad(i, d);
                y(i, d) += update(i, d);
            }
        }
        y.rowwise() -= y.colwise().mean();

        if (!y.allFinite()) {
            throw Error("t-SNE diverged at iteration " + std::to_string(iter) +
                        " (learning_rate " + std::to_string(params.learning_rate) + " too large?)");
        }
    }
    if (params.n_iter == params.exaggeration_iters) out.kl_after_exaggeration = kl_divergence(p, y);

    out.coords = std::move(y);
    out.final_kl = kl_divergence(p, out.coords);
    out.gate = classify_gate(out.final_kl);
    return out;
}

struct RunSummary {
    std::size_t cell = 0;
    std::size_t run = 0;
    TsneParams params;
    double final_kl = 0.0;
    bool calibration_converged = true;
};

struct GridResult {
    Embedding2D best;
    std::size_t best_cell = 0;
    std::size_t best_run = 0;
    std::vector<RunSummary> runs; ///< ordered by (cell, run)
};

/// Builds the cartesian product of perplexities x learning rates sharing `base`.
inline std::vector<TsneParams> make_grid(const std::vector<double>& perplexities,
                                         const std::vector<double>& learning_rates,
                                         const TsneParams& base) {
    std::vector<TsneParams> grid;
    for (double perp : perplexities) {
        for (double lr : learning_rates) {
            TsneParams p = base;
            p.perplexity = perp;
            p.learning_rate = lr;
            grid.push_back(p);
        }
    }
    return grid;
}

/// Runs every cell `runs_per_cell` times (seed = cell seed + run index) and keeps the
/// run with the smallest final KL. Ties go to the earliest (cell, run), so the
/// result does not depend on how runs were scheduled across threads.
inline GridResult grid_search(const features::FeatureTable& table, const std::vector<TsneParams>& grid,
                              std::size_t runs_per_cell, std::size_t threads = 0) {
    if (grid.empty()) throw Error("grid_search: empty parameter grid");
    if (runs_per_cell == 0) throw Error("grid_search: runs_per_cell must be positive");
    const auto n = static_cast<double>(table.rows());
    for (const auto& cell : grid) {
        cell.validate();
        if (!(cell.perplexity < n)) {
            throw Error("grid_search: perplexity " + std::to_string(cell.perplexity) +
                        " is not below N=" + std::to_string(table.rows()));
        }
    }

    const Matrix d2 = pairwise_sq_dists(table.values);

    // Calibrate once per distinct perplexity.
    std::vector<double> perplexities;
    for (const auto& cell : grid) {
        if (std::find(perplexities.begin(), perplexities.end(), cell.perplexity) == perplexities.end()) {
            perplexities.push_back(cell.perplexity);
        }
    }
    std::vector<Matrix> joints(perplexities.size());
    std::vector<bool> calibrated(perplexities.size());
    soundscape::detail::parallel_for(perplexities.size(), threads, [&](std::size_t k) {
        Conditionals c = calibrate_conditionals(d2, perplexities[k]);
        calibrated[k] = c.converged();
        joints[k] = symmetrize(c.p);
    });
    auto joint_index = [&](double perp) {
        return static_cast<std::size_t>(
            std::find(perplexities.begin(), perplexities.end(), perp) - perplexities.begin());
    };

    const std::size_t jobs = grid.size() * runs_per_cell;
    std::vector<Embedding2D> results(jobs);
    soundscape::detail::parallel_for(jobs, threads, [&](std::size_t job) {
        TsneParams p = grid[job / runs_per_cell];
        p.seed += job % runs_per_cell;
        results[job] = tsne_optimize(joints[joint_index(p.perplexity)], p);
    });

    GridResult out;
    std::size_t best = 0;
    for (std::size_t job = 0; job < jobs; ++job) {
        const auto& r = results[job];
        out.runs.push_back({job / runs_per_cell, job % runs_per_cell, r.params, r.final_kl,
                            static_cast<bool>(calibrated[joint_index(r.params.perplexity)])});
        if (r.final_kl < results[best].final_kl) best = job;
    }
    out.best_cell = best / runs_per_cell;
    out.best_run = best % runs_per_cell;
    out.best = std::move(results[best]);
    return out;
}

} // namespace soundscape::embedding
