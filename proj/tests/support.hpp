#pragma once

#include "soundscape/common.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace testing_support {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = fs::temp_directory_path() /
                ("soundscape_" + tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

  private:
    fs::path path_;
};

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

inline soundscape::Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                                        double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    soundscape::Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = d(rng);
    return m;
}

/// Gaussian blobs around `centers`, `per` points each, point order interleaved.
inline soundscape::Matrix blobs(std::mt19937_64& rng, const std::vector<std::pair<double, double>>& centers,
                                std::size_t per, double spread) {
    std::normal_distribution<double> d(0.0, spread);
    soundscape::Matrix m(static_cast<Eigen::Index>(centers.size() * per), 2);
    Eigen::Index r = 0;
    for (std::size_t k = 0; k < per; ++k) {
        for (const auto& [cx, cy] : centers) {
            m(r, 0) = cx + d(rng);
            m(r, 1) = cy + d(rng);
            ++r;
        }
    }
    return m;
}

} // namespace testing_support
