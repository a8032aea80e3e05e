#pragma once

// MFCC + delta + delta-delta extraction, per-segment aggregation and the
// flattened feature table that feeds the embedding.

#include "soundscape/audio_io.hpp"
#include "soundscape/common.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace soundscape::features {

/// Statistics computed per coefficient row, in flattened order.
inline constexpr std::array<const char*, 4> kStatNames = {"mean", "std", "min", "max"};
inline constexpr std::size_t kStatsPerRow = kStatNames.size();

/// Frame sizes are in samples. Zero-valued `frame_len`, `hop`, `n_fft` and `fmax`
/// mean "derive from the sample rate" (25 ms, 10 ms, next power of two, Nyquist);
/// call resolved() before use.
struct MfccConfig {
    std::size_t frame_len = 0;
    std::size_t hop = 0;
    std::size_t n_fft = 0;
    std::size_t n_mels = 40;
    std::size_t n_coeffs = 13;
    double fmin = 0.0;
    double fmax = 0.0;
    double log_floor = 1e-10;
    std::size_t delta_width = 2;

    MfccConfig resolved(int sample_rate) const {
        if (sample_rate <= 0) throw Error("MfccConfig: sample rate must be positive");
        MfccConfig c = *this;
        if (c.frame_len == 0) c.frame_len = static_cast<std::size_t>(std::lround(0.025 * sample_rate));
        if (c.hop == 0) c.hop = static_cast<std::size_t>(std::lround(0.010 * sample_rate));
        if (c.n_fft == 0) c.n_fft = std::bit_ceil(c.frame_len);
        if (c.fmax == 0.0) c.fmax = sample_rate / 2.0;
        c.validate(sample_rate);
        return c;
    }

    void validate(int sample_rate) const {
        auto fail = [](const std::string& m) { throw Error("MfccConfig: " + m); };
        if (frame_len == 0 || hop == 0) fail("frame_len and hop must be positive");
        if (!std::has_single_bit(n_fft)) fail("n_fft must be a power of two");
        if (frame_len > n_fft) fail("frame_len exceeds n_fft");
        if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0)) {
            fail("require 0 <= fmin < fmax <= sample_rate/2");
        }
        if (n_coeffs == 0 || n_coeffs > n_mels) fail("require 0 < n_coeffs <= n_mels");
        if (!(log_floor > 0.0)) fail("log_floor must be positive");
        if (delta_width == 0) fail("delta_width must be at least 1");
    }

    std::size_t frame_count(std::size_t segment_samples) const {
        return segment_samples < frame_len ? 0 : 1 + (segment_samples - frame_len) / hop;
    }
};

/// (3 * n_coeffs) x F: MFCC rows, then delta rows, then delta-delta rows.
struct SegmentFeatures {
    Matrix matrix;

    std::size_t frames() const { return static_cast<std::size_t>(matrix.cols()); }
};

/// N x (3 * n_coeffs * 4). Entry 4i+k of a row holds statistic k of coefficient row i.
struct FeatureTable {
    Matrix values;

    std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }

    std::vector<std::string> column_names() const {
        std::vector<std::string> names;
        names.reserve(cols());
        for (std::size_t i = 0; i < cols() / kStatsPerRow; ++i) {
            for (const char* stat : kStatNames) {
                names.push_back("c" + std::to_string(i) + "_" + stat);
            }
        }
        return names;
    }
};

// HTK mel scale.
inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular filters, n_mels x (n_fft/2 + 1), unit peak height.
inline Matrix mel_filterbank(const MfccConfig& cfg, int sample_rate) {
    const std::size_t bins = cfg.n_fft / 2 + 1;
    const double mel_lo = hz_to_mel(cfg.fmin);
    const double mel_hi = hz_to_mel(cfg.fmax);
    std::vector<double> edges(cfg.n_mels + 2);
    for (std::size_t m = 0; m < edges.size(); ++m) {
        edges[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(m) /
                                          static_cast<double>(cfg.n_mels + 1));
    }

    Matrix fb = Matrix::Zero(static_cast<Eigen::Index>(cfg.n_mels), static_cast<Eigen::Index>(bins));
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
        const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / static_cast<double>(cfg.n_fft);
            const double rise = (f - left) / (center - left);
            const double fall = (right - f) / (right - center);
            fb(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) =
                std::max(0.0, std::min(rise, fall));
        }
    }
    return fb;
}

/// Orthonormal DCT-II basis truncated to the first `n_out` coefficients.
inline Matrix dct_matrix(std::size_t n_out, std::size_t n_in) {
    Matrix d(static_cast<Eigen::Index>(n_out), static_cast<Eigen::Index>(n_in));
    const double n = static_cast<double>(n_in);
    for (std::size_t k = 0; k < n_out; ++k) {
        const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
        for (std::size_t m = 0; m < n_in; ++m) {
            d(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)) =
                scale * std::cos(std::numbers::pi * static_cast<double>(k) *
                                 (2.0 * static_cast<double>(m) + 1.0) / (2.0 * n));
        }
    }
    return d;
}

/// Periodic Hann window of length n.
inline std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    }
    return w;
}

/// n_coeffs x F cepstral coefficients. Frames are not centered or padded:
/// F = 1 + floor((len - frame_len) / hop).
inline Matrix mfcc(const audio::PcmBuffer& segment, const MfccConfig& config) {
    const MfccConfig cfg = config.resolved(segment.sample_rate);
    const std::size_t frames = cfg.frame_count(segment.size());
    if (frames == 0) {
        throw Error("segment of " + std::to_string(segment.size()) +
                    " samples is shorter than one frame (" + std::to_string(cfg.frame_len) + ")");
    }

    const Matrix fb = mel_filterbank(cfg, segment.sample_rate);
    const Matrix dct = dct_matrix(cfg.n_coeffs, cfg.n_mels);
    const std::vector<double> window = hann_window(cfg.frame_len);
    const std::size_t bins = cfg.n_fft / 2 + 1;

    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<double> frame(cfg.n_fft, 0.0);
    std::vector<std::complex<double>> spectrum;
    Vector power(static_cast<Eigen::Index>(bins));

    Matrix out(static_cast<Eigen::Index>(cfg.n_coeffs), static_cast<Eigen::Index>(frames));
    for (std::size_t t = 0; t < frames; ++t) {
        const std::size_t start = t * cfg.hop;
        for (std::size_t i = 0; i < cfg.frame_len; ++i) {
            frame[i] = segment.samples[start + i] * window[i];
        }
        fft.fwd(spectrum, frame);
        for (std::size_t k = 0; k < bins; ++k) {
            power[static_cast<Eigen::Index>(k)] = std::norm(spectrum[k]);
        }
        Vector mel = fb * power;
        for (Eigen::Index m = 0; m < mel.size(); ++m) {
            mel[m] = std::log(std::max(mel[m], cfg.log_floor));
        }
        out.col(static_cast<Eigen::Index>(t)) = dct * mel;
    }
    return out;
}

/// Regression deltas over +/- width frames with replicated edge frames.
inline Matrix deltas(const Matrix& coeffs, std::size_t width) {
    const auto frames = static_cast<std::size_t>(coeffs.cols());
    if (width == 0) throw Error("delta width must be at least 1");
    if (frames < 2 * width + 1) {
        throw Error("deltas need at least " + std::to_string(2 * width + 1) + " frames, got " +
                    std::to_string(frames));
    }

    double denom = 0.0;
    for (std::size_t w = 1; w <= width; ++w) denom += static_cast<double>(w * w);
    denom *= 2.0;

    const auto last = static_cast<std::ptrdiff_t>(frames) - 1;
    Matrix out(coeffs.rows(), coeffs.cols());
    for (Eigen::Index r = 0; r < coeffs.rows(); ++r) {
        for (std::ptrdiff_t t = 0; t <= last; ++t) {
            double acc = 0.0;
            for (std::size_t w = 1; w <= width; ++w) {
                const auto sw = static_cast<std::ptrdiff_t>(w);
                const auto ahead = std::min(t + sw, last);
                const auto behind = std::max<std::ptrdiff_t>(t - sw, 0);
                acc += static_cast<double>(w) * (coeffs(r, ahead) - coeffs(r, behind));
            }
            out(r, t) = acc / denom;
        }
    }
    return out;
}

inline SegmentFeatures feature_stack(const audio::PcmBuffer& segment, const MfccConfig& config) {
    const Matrix base = mfcc(segment, config);
    const Matrix d1 = deltas(base, config.delta_width);
    const Matrix d2 = deltas(d1, config.delta_width);

    SegmentFeatures f;
    f.matrix.resize(3 * base.rows(), base.cols());
    f.matrix << base, d1, d2;
    return f;
}

/// Per-row (mean, population std, min, max), flattened coefficient-major.
inline Vector aggregate_and_flatten(const SegmentFeatures& feats) {
    const Matrix& m = feats.matrix;
    if (m.cols() == 0) throw Error("cannot aggregate a segment with zero frames");

    const auto n = static_cast<double>(m.cols());
    Vector out(m.rows() * static_cast<Eigen::Index>(kStatsPerRow));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        const double lo = row.minCoeff();
        const double hi = row.maxCoeff();
        // Shifting by the minimum keeps constant rows exact.
        double shifted = 0.0;
        for (Eigen::Index t = 0; t < m.cols(); ++t) shifted += row[t] - lo;
        const double mean = std::clamp(lo + shifted / n, lo, hi);
        double ss = 0.0;
        for (Eigen::Index t = 0; t < m.cols(); ++t) ss += (row[t] - mean) * (row[t] - mean);

        const Eigen::Index base = r * static_cast<Eigen::Index>(kStatsPerRow);
        out[base + 0] = mean;
        out[base + 1] = std::sqrt(ss / n);
        out[base + 2] = lo;
        out[base + 3] = hi;
    }
    return out;
}

/// Column-wise z-scoring; constant columns become zero.
inline void standardize_columns(Matrix& values) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
        auto col = values.col(c);
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().mean());
        if (sd > 0.0) {
            col = (col.array() - mean) / sd;
        } else {
            col.setZero();
        }
    }
}

struct TableOptions {
    bool standardize = false;
    std::size_t threads = 0; ///< 0 = hardware concurrency
};

inline FeatureTable build_table(const audio::SegmentSet& set, const MfccConfig& cfg,
                                const TableOptions& options = {}) {
    if (set.size() < 2) throw Error("feature table needs at least 2 segments");

    std::vector<Vector> rows(set.size());
    detail::parallel_for(set.size(), options.threads, [&](std::size_t i) {
        rows[i] = aggregate_and_flatten(feature_stack(set.segments[i], cfg));
    });

    FeatureTable table;
    table.values.resize(static_cast<Eigen::Index>(rows.size()), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        table.values.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    }
    if (options.standardize) standardize_columns(table.values);
    return table;
}

/// Largest cosine similarity between two distinct rows.
inline double diversity_check(const FeatureTable& table) {
    const auto n = table.values.rows();
    if (n < 2) throw Error("diversity_check needs at least 2 rows");
    Vector norms = table.values.rowwise().norm();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (norms[i] == 0.0) throw Error("diversity_check: row " + std::to_string(i) + " has zero norm");
    }
    double best = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double cos = table.values.row(i).dot(table.values.row(j)) / (norms[i] * norms[j]);
            best = std::max(best, cos);
        }
    }
    return best;
}

inline void write_table_csv(const FeatureTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << "segment";
    for (const auto& name : table.column_names()) out << ',' << name;
    out << '\n';
    char buf[32];
    for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
        out << r;
        for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", table.values(r, c));
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

inline FeatureTable read_table_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("segment,", 0) != 0) {
        throw Error(path.string() + ": missing feature header");
    }
    const auto cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
    if (cols == 0 || cols % kStatsPerRow != 0) throw Error(path.string() + ": bad column count");

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        if (std::stoul(cell) != rows.size()) {
            throw Error(path.string() + ": rows out of segment order at line " + std::to_string(rows.size() + 2));
        }
        while (std::getline(ss, cell, ',')) {
            double v = 0.0;
            auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || p != cell.data() + cell.size() || !std::isfinite(v)) {
                throw Error(path.string() + ": bad value '" + cell + "'");
            }
            row.push_back(v);
        }
        if (row.size() != cols) throw Error(path.string() + ": ragged row " + std::to_string(rows.size()));
        rows.push_back(std::move(row));
    }

    FeatureTable table;
    table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return table;
}

} // namespace soundscape::features
