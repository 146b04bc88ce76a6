#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ditreuse/model.hpp"

namespace ditreuse::test {

// Small model for fast unit tests; the acceptance suite runs the full toy.
inline ModelConfig small_config(std::uint64_t seed = 42) {
    ModelConfig c;
    c.n_blocks = 3;
    c.hidden_dim = 16;
    c.n_heads = 2;
    c.mlp_ratio = 2.0;
    c.patch = {1, 2, 2};
    c.latent_shape = {2, 4, 4, 4};
    c.cond_tokens = 4;
    c.cond_dim = 8;
    c.seed = seed;
    return c;
}

inline Latent random_latent(const ModelConfig& cfg, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    Latent x(cfg.latent_shape[0], cfg.latent_shape[1], cfg.latent_shape[2], cfg.latent_shape[3]);
    for (float& v : x.data) v = dist(rng);
    return x;
}

inline bool bitwise_equal(const Mat& a, const Mat& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

inline bool bitwise_equal(const Latent& a, const Latent& b) {
    return a.same_shape(b) && a.data == b.data;
}

inline double max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

}  // namespace ditreuse::test
