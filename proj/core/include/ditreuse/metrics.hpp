#pragma once

#include "ditreuse/sampler.hpp"
#include "ditreuse/tensor.hpp"

namespace ditreuse {

// RGB frames in [0, 1], (frames x 3 x H' x W') with H' = 2H, W' = 2W.
struct FrameStack {
    int frames = 0;
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    FrameStack() = default;
    FrameStack(int f, int c, int h, int w)
        : frames(f), channels(c), height(h), width(w),
          data(static_cast<std::size_t>(f) * c * h * w, 0.0f) {}

    float& at(int f, int c, int h, int w) {
        return data[((static_cast<std::size_t>(f) * channels + c) * height + h) * width + w];
    }
    float at(int f, int c, int h, int w) const {
        return data[((static_cast<std::size_t>(f) * channels + c) * height + h) * width + w];
    }

    bool same_shape(const FrameStack& o) const {
        return frames == o.frames && channels == o.channels && height == o.height &&
               width == o.width;
    }
};

// Fixed seeded linear decoder (a 2x upsampling 1x1 projection to RGB) followed
// by a sigmoid squash. Stands in for a VAE decoder so the full-reference
// metrics operate on image-like data.
FrameStack decode(const Latent& latent, const ModelConfig& config);

// 10*log10(1/MSE) at peak 1.0; identical inputs report the 100 dB cap.
double psnr(const FrameStack& a, const FrameStack& b);

inline constexpr double kPsnrCapDb = 100.0;

// Mean SSIM over 8x8 sliding windows (stride 1, uniform weighting, population
// moments) per frame and channel, stabilized with C1 = 0.01^2, C2 = 0.03^2.
double ssim(const FrameStack& a, const FrameStack& b);

inline constexpr int kSsimWindow = 8;

struct RunStats {
    double psnr_db = 0.0;
    double ssim = 0.0;
    double reuse_ratio = 0.0;
    double flop_speedup = 0.0;
};

// fast and base must come from the same prompt, seeds and step count; only the
// reuse setting may differ.
RunStats run_stats(const GenerationResult& fast, const GenerationResult& base,
                   const ModelConfig& config);

}  // namespace ditreuse
