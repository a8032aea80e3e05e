#pragma once

// Synthetic three-timbre recordings with known segment labels, used by the
// demo tool and the end-to-end tests.

#include "soundscape/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace soundscape::synthetic {

enum class Timbre : int { sine = 0, band_noise = 1, chirp = 2 };

struct Corpus {
    audio::PcmBuffer pcm;
    std::vector<int> labels; ///< timbre of each consecutive segment
};

struct CorpusOptions {
    std::size_t per_class = 30;
    double segment_s = 1.0;
    int sample_rate = 16000;
    std::uint64_t seed = 1;
    double sine_hz = 220.0;
    double band_lo_hz = 2000.0;
    double band_hi_hz = 4000.0;
    double chirp_from_hz = 500.0;
    double chirp_to_hz = 4000.0;
    double noise_floor = 0.01;
};

namespace detail {

/// RBJ band-pass biquad (constant 0 dB peak gain).
inline std::vector<double> band_pass(const std::vector<double>& x, double lo, double hi, int rate) {
    const double center = std::sqrt(lo * hi);
    const double q = center / (hi - lo);
    const double w0 = 2.0 * std::numbers::pi * center / rate;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    const double b0 = alpha / a0, b2 = -alpha / a0;
    const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
    std::vector<double> y(x.size());
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = b0 * x[i] + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = x[i];
        y2 = y1;
        y1 = y[i];
    }
    return y;
}

} // namespace detail

/// Renders one segment of the requested timbre.
inline std::vector<double> render(Timbre timbre, const CorpusOptions& o, std::mt19937_64& rng) {
    const auto n = audio::segment_length(o.segment_s, o.sample_rate);
    std::uniform_real_distribution<double> amp_dist(0.4, 0.8);
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double amp = amp_dist(rng);
    const double phase = phase_dist(rng);
    const double rate = o.sample_rate;

    std::vector<double> s(n);
    switch (timbre) {
    case Timbre::sine:
        for (std::size_t i = 0; i < n; ++i) s[i] = amp * std::sin(2.0 * std::numbers::pi * o.sine_hz * i / rate + phase);
        break;
    case Timbre::band_noise: {
        std::vector<double> white(n);
        for (auto& v : white) v = noise(rng);
        s = detail::band_pass(white, o.band_lo_hz, o.band_hi_hz, o.sample_rate);
        double peak = 0.0;
        for (double v : s) peak = std::max(peak, std::abs(v));
        for (auto& v : s) v *= amp / peak;
        break;
    }
    case Timbre::chirp: {
        const double rate_hz = (o.chirp_to_hz - o.chirp_from_hz) / o.segment_s;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = i / rate;
            s[i] = amp * std::sin(2.0 * std::numbers::pi * (o.chirp_from_hz * t + 0.5 * rate_hz * t * t) + phase);
        }
        break;
    }
    }
    for (auto& v : s) v = std::clamp(v + o.noise_floor * noise(rng), -1.0, 1.0);
    return s;
}

/// per_class segments of each timbre in shuffled order, concatenated.
inline Corpus three_timbres(const CorpusOptions& o = {}) {
    std::mt19937_64 rng(o.seed);
    Corpus c;
    for (int t = 0; t < 3; ++t) c.labels.insert(c.labels.end(), o.per_class, t);
    std::shuffle(c.labels.begin(), c.labels.end(), rng);

    c.pcm.sample_rate = o.sample_rate;
    for (int label : c.labels) {
        auto seg = render(static_cast<Timbre>(label), o, rng);
        c.pcm.samples.insert(c.pcm.samples.end(), seg.begin(), seg.end());
    }
    return c;
}

} // namespace soundscape::synthetic
