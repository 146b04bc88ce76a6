#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ditreuse/errors.hpp"

namespace ditreuse {

// Row-major float32 matrix. All model math runs in 32-bit floats; scalar
// statistics (norms, metrics) accumulate in double.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0f) {}

    float* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const float* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }

    float& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    float at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    std::size_t size() const { return data.size(); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
    bool operator==(const Mat& o) const { return rows == o.rows && cols == o.cols && data == o.data; }
};

// 4-D latent tensor (frames, channels, height, width), row-major.
struct Latent {
    int frames = 0;
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    Latent() = default;
    Latent(int f, int c, int h, int w)
        : frames(f), channels(c), height(h), width(w),
          data(static_cast<std::size_t>(f) * c * h * w, 0.0f) {}

    float& at(int f, int c, int h, int w) {
        return data[((static_cast<std::size_t>(f) * channels + c) * height + h) * width + w];
    }
    float at(int f, int c, int h, int w) const {
        return data[((static_cast<std::size_t>(f) * channels + c) * height + h) * width + w];
    }

    std::size_t size() const { return data.size(); }

    bool same_shape(const Latent& o) const {
        return frames == o.frames && channels == o.channels && height == o.height && width == o.width;
    }
    bool operator==(const Latent& o) const { return same_shape(o) && data == o.data; }
};

inline double l1_norm(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += std::fabs(static_cast<double>(x));
    return s;
}

inline double l1_diff(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw DimensionError("l1_diff: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    return s;
}

inline bool all_finite(std::span<const float> v) {
    for (float x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace ditreuse
