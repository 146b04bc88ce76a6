#include "ditreuse/metrics.hpp"

#include <cmath>

#include "ditreuse/rng.hpp"

namespace ditreuse {

namespace {

constexpr std::uint64_t kDecoderStream = 0x44454343;  // decoder weights
constexpr int kUpsample = 2;

float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

}  // namespace

FrameStack decode(const Latent& latent, const ModelConfig& config) {
    const auto [F, C, H, W] = config.latent_shape;
    if (latent.frames != F || latent.channels != C || latent.height != H || latent.width != W)
        throw DimensionError("decode: latent shape does not match config");

    // One linear map per latent pixel: C channels -> 3 RGB x 2x2 subpixels.
    const int out_per_pixel = 3 * kUpsample * kUpsample;
    Rng rng(seed_mix(config.seed, kDecoderStream));
    Mat weight(out_per_pixel, C);
    std::vector<float> bias(out_per_pixel);
    const float scale = 1.0f / std::sqrt(static_cast<float>(C));
    for (float& v : weight.data) v = rng.uniform_pm1() * scale;
    for (float& v : bias) v = rng.uniform_pm1() * scale;

    FrameStack out(F, 3, H * kUpsample, W * kUpsample);
    for (int f = 0; f < F; ++f)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w)
                for (int rgb = 0; rgb < 3; ++rgb)
                    for (int dh = 0; dh < kUpsample; ++dh)
                        for (int dw = 0; dw < kUpsample; ++dw) {
                            const int o = (rgb * kUpsample + dh) * kUpsample + dw;
                            float acc = bias[o];
                            const float* wr = weight.row(o);
                            for (int c = 0; c < C; ++c) acc += wr[c] * latent.at(f, c, h, w);
                            out.at(f, rgb, h * kUpsample + dh, w * kUpsample + dw) = sigmoid(acc);
                        }
    return out;
}

double psnr(const FrameStack& a, const FrameStack& b) {
    if (!a.same_shape(b)) throw DimensionError("psnr: shape mismatch");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse == 0.0) return kPsnrCapDb;
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const FrameStack& a, const FrameStack& b) {
    if (!a.same_shape(b)) throw DimensionError("ssim: shape mismatch");
    if (a.height < kSsimWindow || a.width < kSsimWindow)
        throw ArgumentError("ssim: frame smaller than the 8x8 window");
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    constexpr int win = kSsimWindow;
    constexpr double win_count = static_cast<double>(win * win);

    double total = 0.0;
    std::size_t windows = 0;
    for (int f = 0; f < a.frames; ++f)
        for (int c = 0; c < a.channels; ++c)
            for (int y = 0; y + win <= a.height; ++y)
                for (int x = 0; x + win <= a.width; ++x) {
                    double sum_a = 0.0, sum_b = 0.0;
                    for (int dy = 0; dy < win; ++dy)
                        for (int dx = 0; dx < win; ++dx) {
                            sum_a += a.at(f, c, y + dy, x + dx);
                            sum_b += b.at(f, c, y + dy, x + dx);
                        }
                    const double mu_a = sum_a / win_count;
                    const double mu_b = sum_b / win_count;
                    double var_a = 0.0, var_b = 0.0, cov = 0.0;
                    for (int dy = 0; dy < win; ++dy)
                        for (int dx = 0; dx < win; ++dx) {
                            const double da = a.at(f, c, y + dy, x + dx) - mu_a;
                            const double db = b.at(f, c, y + dy, x + dx) - mu_b;
                            var_a += da * da;
                            var_b += db * db;
                            cov += da * db;
                        }
                    var_a /= win_count;
                    var_b /= win_count;
                    cov /= win_count;
                    const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
                    const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
                    total += num / den;
                    ++windows;
                }
    return total / static_cast<double>(windows);
}

RunStats run_stats(const GenerationResult& fast, const GenerationResult& base,
                   const ModelConfig& config) {
    if (fast.prompt_id != base.prompt_id || fast.model_seed != base.model_seed ||
        fast.sched_seed != base.sched_seed || fast.decisions.size() != base.decisions.size())
        throw ArgumentError("run_stats: runs do not share prompt, seeds and step count");
    if (!fast.final_latent.same_shape(base.final_latent))
        throw ArgumentError("run_stats: latent shapes differ");

    RunStats s;
    const FrameStack fa = decode(fast.final_latent, config);
    const FrameStack fb = decode(base.final_latent, config);
    s.psnr_db = psnr(fa, fb);
    s.ssim = ssim(fa, fb);
    s.reuse_ratio = fast.reuse_ratio();
    s.flop_speedup =
        static_cast<double>(base.flops.total()) / static_cast<double>(fast.flops.total());
    return s;
}

}  // namespace ditreuse
