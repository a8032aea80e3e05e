#pragma once

// WAV decoding/encoding, track mixing and equal-length segmentation.

#include "soundscape/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

namespace soundscape::audio {

/// Mono PCM audio with samples in [-1, 1].
struct PcmBuffer {
    std::vector<double> samples;
    int sample_rate = 0;

    std::size_t size() const { return samples.size(); }
    double duration_s() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

/// N equal-length, contiguous, non-overlapping slices of one source recording.
struct SegmentSet {
    std::vector<PcmBuffer> segments;
    double segment_duration_s = 0.0;
    std::string source_id;
    int sample_rate = 0;

    std::size_t size() const { return segments.size(); }
    std::size_t segment_samples() const {
        return segments.empty() ? 0 : segments.front().size();
    }
};

/// One written segment file, path relative to the directory it was written into.
struct SegmentFile {
    std::size_t index = 0;
    std::string path;
};

namespace detail {

inline std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
}

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<unsigned char>((v >> s) & 0xff));
}

inline void put_tag(std::vector<unsigned char>& out, const char* tag) {
    out.insert(out.end(), tag, tag + 4);
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

} // namespace detail

/// Decodes an in-memory RIFF/WAVE file. Accepts 16-bit PCM and 32-bit float,
/// mono or stereo; stereo is downmixed by the per-sample mean.
inline PcmBuffer decode_wav(std::span<const unsigned char> bytes) {
    using namespace detail;
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw Error("not a RIFF/WAVE file");
    }

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        std::size_t len = read_u32(chunk + 4);
        std::size_t body = pos + 8;
        std::size_t avail = bytes.size() - body;
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (len < 16 || len > avail) throw Error("truncated fmt chunk");
            const unsigned char* f = chunk + 8;
            format = read_u16(f);
            channels = read_u16(f + 2);
            rate = read_u32(f + 4);
            bits = read_u16(f + 14);
            if (format == kFormatExtensible) {
                if (len < 40) throw Error("truncated WAVE_FORMAT_EXTENSIBLE header");
                format = read_u16(f + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = chunk + 8;
            // Some writers leave the data size unset when streaming.
            data_len = std::min(len, avail);
            break;
        }
        pos = body + len + (len & 1u);
    }

    if (!have_fmt) throw Error("missing fmt chunk");
    if (data == nullptr) throw Error("missing data chunk");
    if (channels != 1 && channels != 2) {
        throw Error("unsupported channel count " + std::to_string(channels));
    }
    if (rate == 0) throw Error("sample rate is zero");
    const bool pcm16 = format == kFormatPcm && bits == 16;
    const bool f32 = format == kFormatFloat && bits == 32;
    if (!pcm16 && !f32) {
        throw Error("unsupported encoding (format " + std::to_string(format) + ", " +
                    std::to_string(bits) + " bits); expected 16-bit PCM or 32-bit float");
    }

    const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
    const std::size_t frames = data_len / frame_bytes;
    if (frames == 0) throw Error("zero-length audio");

    PcmBuffer out;
    out.sample_rate = static_cast<int>(rate);
    out.samples.resize(frames);
    auto sample_at = [&](std::size_t frame, std::size_t ch) -> double {
        const unsigned char* p = data + frame * frame_bytes + ch * (bits / 8);
        if (pcm16) {
            return static_cast<std::int16_t>(read_u16(p)) / 32768.0;
        }
        std::uint32_t raw = read_u32(p);
        float v;
        std::memcpy(&v, &raw, sizeof v);
        if (!std::isfinite(v)) throw Error("non-finite float sample");
        return std::clamp(static_cast<double>(v), -1.0, 1.0);
    };
    for (std::size_t i = 0; i < frames; ++i) {
        out.samples[i] = channels == 1 ? sample_at(i, 0)
                                       : 0.5 * (sample_at(i, 0) + sample_at(i, 1));
    }
    return out;
}

inline PcmBuffer load_audio(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open audio file: " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    try {
        return decode_wav(bytes);
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

/// Encodes mono 16-bit PCM. Samples are scaled by 32768 and clipped, so any value
/// k/32768 survives a write/read round trip exactly.
inline std::vector<unsigned char> encode_wav(const PcmBuffer& pcm) {
    using namespace detail;
    const auto data_len = static_cast<std::uint32_t>(pcm.size() * 2);
    std::vector<unsigned char> out;
    out.reserve(44 + data_len);
    put_tag(out, "RIFF");
    put_u32(out, 36 + data_len);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, kFormatPcm);
    put_u16(out, 1);
    put_u32(out, static_cast<std::uint32_t>(pcm.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(pcm.sample_rate) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    put_tag(out, "data");
    put_u32(out, data_len);
    for (double s : pcm.samples) {
        double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
        put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    return out;
}

inline void write_wav(const std::filesystem::path& path, const PcmBuffer& pcm) {
    auto bytes = encode_wav(pcm);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write audio file: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + path.string());
}

/// Sums tracks sample by sample (shorter tracks are zero-padded) and
/// peak-normalizes to 1.0 unless the sum is silent.
///
/// The per-sample contributions are summed in sorted order, which makes the
/// result bit-identical under any permutation of `buffers`.
inline PcmBuffer mix_tracks(std::span<const PcmBuffer> buffers) {
    if (buffers.empty()) throw Error("mix_tracks: empty track list");
    const int rate = buffers.front().sample_rate;
    std::size_t length = 0;
    for (const auto& b : buffers) {
        if (b.sample_rate != rate) {
            throw Error("mix_tracks: mismatched sample rates (" + std::to_string(rate) + " vs " +
                        std::to_string(b.sample_rate) + ")");
        }
        length = std::max(length, b.size());
    }

    PcmBuffer out;
    out.sample_rate = rate;
    out.samples.resize(length);
    std::vector<double> parts(buffers.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < length; ++i) {
        for (std::size_t k = 0; k < buffers.size(); ++k) {
            parts[k] = i < buffers[k].size() ? buffers[k].samples[i] : 0.0;
        }
        std::sort(parts.begin(), parts.end());
        double sum = 0.0;
        for (double p : parts) sum += p;
        out.samples[i] = sum;
        peak = std::max(peak, std::abs(sum));
    }
    if (peak > 0.0) {
        for (double& s : out.samples) s /= peak;
    }
    return out;
}

inline std::size_t segment_length(double duration_s, int sample_rate) {
    return static_cast<std::size_t>(std::llround(duration_s * sample_rate));
}

/// Cuts `pcm` into floor(len / segment_samples) segments; the trailing remainder is dropped.
inline SegmentSet segment(const PcmBuffer& pcm, double duration_s, std::string source_id) {
    if (!(duration_s > 0.0)) throw Error("segment duration must be positive");
    if (pcm.sample_rate <= 0) throw Error("invalid sample rate");
    const std::size_t seg = segment_length(duration_s, pcm.sample_rate);
    if (seg == 0) throw Error("segment duration shorter than one sample");
    if (pcm.size() < seg) {
        throw Error("audio (" + std::to_string(pcm.duration_s()) + " s) is shorter than one " +
                    std::to_string(duration_s) + " s segment");
    }

    SegmentSet set;
    set.segment_duration_s = duration_s;
    set.source_id = std::move(source_id);
    set.sample_rate = pcm.sample_rate;
    const std::size_t n = pcm.size() / seg;
    set.segments.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        PcmBuffer s;
        s.sample_rate = pcm.sample_rate;
        auto first = pcm.samples.begin() + static_cast<std::ptrdiff_t>(i * seg);
        s.samples.assign(first, first + static_cast<std::ptrdiff_t>(seg));
        set.segments.push_back(std::move(s));
    }
    return set;
}

/// `<source_id>_<NNNN>.wav`, zero-padded to at least four digits.
inline std::string segment_filename(const std::string& source_id, std::size_t index, std::size_t count) {
    std::size_t width = 4;
    for (std::size_t v = count > 0 ? count - 1 : 0; v >= 10000; v /= 10) ++width;
    std::string digits = std::to_string(index);
    if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
    return source_id + "_" + digits + ".wav";
}

inline std::vector<SegmentFile> write_segments(const SegmentSet& set, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());

    std::vector<SegmentFile> files;
    files.reserve(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        std::string name = segment_filename(set.source_id, i, set.size());
        write_wav(dir / name, set.segments[i]);
        files.push_back({i, name});
    }
    return files;
}

} // namespace soundscape::audio
