#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "vox3d/rng.hpp"
#include "vox3d/tensor.hpp"

namespace testutil {

inline vox3d::Tensor random_tensor(std::vector<int64_t> shape, uint64_t seed,
                                   float mean = 0.0f, float stddev = 1.0f) {
    vox3d::Tensor t(std::move(shape));
    vox3d::Rng rng(seed);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(mean, stddev);
    return t;
}

inline bool bitwise_equal(const vox3d::Tensor& a, const vox3d::Tensor& b) {
    return a.shape() == b.shape() && a.buffer() == b.buffer();
}

inline double max_rel_dev(const vox3d::Tensor& got, const vox3d::Tensor& want) {
    double worst = 0.0;
    for (int64_t i = 0; i < got.numel(); ++i) {
        double denom = std::max(1.0, std::abs(static_cast<double>(want[i])));
        worst = std::max(worst, std::abs(static_cast<double>(got[i] - want[i])) / denom);
    }
    return worst;
}

// Unique scratch directory under the system temp dir, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 rng{std::random_device{}()};
        path = std::filesystem::temp_directory_path() /
               ("vox3d_test_" + tag + "_" + std::to_string(rng()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

}  // namespace testutil
