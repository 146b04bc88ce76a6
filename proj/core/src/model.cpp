#include "ditreuse/model.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "ditreuse/rng.hpp"

namespace ditreuse {

namespace {

constexpr float kLayerNormEps = 1e-5f;
constexpr std::uint64_t kWeightStream = 0x57454947;  // weight init
constexpr std::uint64_t kCondStream = 0x434F4E44;    // prompt embeddings

void fill_uniform(Rng& rng, std::span<float> dst, int fan_in) {
    const float scale = 1.0f / std::sqrt(static_cast<float>(fan_in));
    for (float& x : dst) x = rng.uniform_pm1() * scale;
}

Linear make_linear(Rng& rng, int out_features, int in_features, bool zero_bias = false) {
    Linear l;
    l.weight = Mat(out_features, in_features);
    l.bias.assign(out_features, 0.0f);
    fill_uniform(rng, l.weight.data, in_features);
    if (!zero_bias) fill_uniform(rng, l.bias, in_features);
    return l;
}

// y = x W^T + b, x (rows x in), W (out x in).
Mat linear(const Mat& x, const Linear& l, FlopCounter* fc, Phase phase) {
    const int in = l.weight.cols;
    const int out = l.weight.rows;
    if (x.cols != in) throw DimensionError("linear: input has " + std::to_string(x.cols) +
                                           " features, weight expects " + std::to_string(in));
    Mat y(x.rows, out);
    for (int r = 0; r < x.rows; ++r) {
        const float* xr = x.row(r);
        float* yr = y.row(r);
        for (int o = 0; o < out; ++o) {
            const float* wr = l.weight.row(o);
            float acc = 0.0f;
            for (int i = 0; i < in; ++i) acc += xr[i] * wr[i];
            yr[o] = acc + l.bias[o];
        }
    }
    if (fc) fc->add(phase, 2ull * x.rows * in * out);
    return y;
}

std::vector<float> linear_vec(const std::vector<float>& x, const Linear& l,
                              FlopCounter* fc, Phase phase) {
    const int in = l.weight.cols;
    const int out = l.weight.rows;
    if (static_cast<int>(x.size()) != in) throw DimensionError("linear_vec: size mismatch");
    std::vector<float> y(out);
    for (int o = 0; o < out; ++o) {
        const float* wr = l.weight.row(o);
        float acc = 0.0f;
        for (int i = 0; i < in; ++i) acc += x[i] * wr[i];
        y[o] = acc + l.bias[o];
    }
    if (fc) fc->add(phase, 2ull * in * out);
    return y;
}

Mat layernorm(const Mat& x, const std::vector<float>& gain) {
    Mat y(x.rows, x.cols);
    for (int r = 0; r < x.rows; ++r) {
        const float* xr = x.row(r);
        float* yr = y.row(r);
        double mean = 0.0;
        for (int c = 0; c < x.cols; ++c) mean += xr[c];
        mean /= x.cols;
        double var = 0.0;
        for (int c = 0; c < x.cols; ++c) {
            double d = xr[c] - mean;
            var += d * d;
        }
        var /= x.cols;
        const float rstd = 1.0f / std::sqrt(static_cast<float>(var) + kLayerNormEps);
        const float m = static_cast<float>(mean);
        for (int c = 0; c < x.cols; ++c) yr[c] = (xr[c] - m) * rstd * gain[c];
    }
    return y;
}

// x * (1 + scale) + shift, broadcast over rows.
void modulate_inplace(Mat& x, std::span<const float> shift, std::span<const float> scale) {
    for (int r = 0; r < x.rows; ++r) {
        float* xr = x.row(r);
        for (int c = 0; c < x.cols; ++c) xr[c] = xr[c] * (1.0f + scale[c]) + shift[c];
    }
}

void softmax_rows(Mat& s) {
    for (int r = 0; r < s.rows; ++r) {
        float* sr = s.row(r);
        float mx = sr[0];
        for (int c = 1; c < s.cols; ++c) mx = std::max(mx, sr[c]);
        float sum = 0.0f;
        for (int c = 0; c < s.cols; ++c) {
            sr[c] = std::exp(sr[c] - mx);
            sum += sr[c];
        }
        const float inv = 1.0f / sum;
        for (int c = 0; c < s.cols; ++c) sr[c] *= inv;
    }
}

// Multi-head scaled dot-product over pre-projected q/k/v matrices whose rows
// are head-major slices [head0 | head1 | ...] of width head_dim each.
Mat attention(const Mat& q, const Mat& k, const Mat& v, int n_heads,
              FlopCounter* fc, Phase phase) {
    const int t_q = q.rows;
    const int t_k = k.rows;
    const int head_dim = q.cols / n_heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(head_dim));
    Mat out(t_q, q.cols);
    Mat scores(t_q, t_k);
    for (int h = 0; h < n_heads; ++h) {
        const int off = h * head_dim;
        for (int i = 0; i < t_q; ++i) {
            const float* qi = q.row(i) + off;
            float* si = scores.row(i);
            for (int j = 0; j < t_k; ++j) {
                const float* kj = k.row(j) + off;
                float acc = 0.0f;
                for (int d = 0; d < head_dim; ++d) acc += qi[d] * kj[d];
                si[j] = acc * scale;
            }
        }
        softmax_rows(scores);
        for (int i = 0; i < t_q; ++i) {
            const float* si = scores.row(i);
            float* oi = out.row(i) + off;
            for (int d = 0; d < head_dim; ++d) oi[d] = 0.0f;
            for (int j = 0; j < t_k; ++j) {
                const float* vj = v.row(j) + off;
                const float w = si[j];
                for (int d = 0; d < head_dim; ++d) oi[d] += w * vj[d];
            }
        }
    }
    if (fc) fc->add(phase, 2ull * n_heads * t_q * t_k * head_dim * 2);
    return out;
}

float gelu(float x) {
    return 0.5f * x * (1.0f + std::erff(x * 0.70710678118654752440f));
}

Mat add(const Mat& a, const Mat& b) {
    Mat y(a.rows, a.cols);
    for (std::size_t i = 0; i < a.data.size(); ++i) y.data[i] = a.data[i] + b.data[i];
    return y;
}

// a + (1 + gate) ⊙ b, gate broadcast over rows.
Mat add_gated(const Mat& a, const Mat& b, std::span<const float> gate) {
    Mat y(a.rows, a.cols);
    for (int r = 0; r < a.rows; ++r) {
        const float* ar = a.row(r);
        const float* br = b.row(r);
        float* yr = y.row(r);
        for (int c = 0; c < a.cols; ++c) yr[c] = ar[c] + (1.0f + gate[c]) * br[c];
    }
    return y;
}

Mat slice_cols(const Mat& x, int first, int count) {
    Mat y(x.rows, count);
    for (int r = 0; r < x.rows; ++r)
        std::memcpy(y.row(r), x.row(r) + first, sizeof(float) * count);
    return y;
}

}  // namespace

std::string_view tap_name(TapId tap) {
    static constexpr std::array<std::string_view, kNumTaps> names = {
        "block_in", "attn_in", "attn_out", "cross_attn_in",
        "cross_attn_out", "mlp_in", "mlp_out", "block_out",
    };
    return names[static_cast<int>(tap)];
}

TapId tap_from_name(std::string_view name) {
    for (int i = 0; i < kNumTaps; ++i)
        if (tap_name(static_cast<TapId>(i)) == name) return static_cast<TapId>(i);
    throw ConfigError("unknown tap id: " + std::string(name));
}

void ModelConfig::validate() const {
    if (n_blocks < 1) throw ConfigError("n_blocks must be positive");
    if (hidden_dim < 1) throw ConfigError("hidden_dim must be positive");
    if (n_heads < 1) throw ConfigError("n_heads must be positive");
    if (hidden_dim % n_heads != 0)
        throw ConfigError("hidden_dim " + std::to_string(hidden_dim) +
                          " not divisible by n_heads " + std::to_string(n_heads));
    if (mlp_ratio <= 0.0 || mlp_dim() < 1) throw ConfigError("mlp_ratio must be positive");
    for (int p : patch)
        if (p < 1) throw ConfigError("patch sizes must be positive");
    for (int d : latent_shape)
        if (d < 1) throw ConfigError("latent dimensions must be positive");
    if (latent_shape[0] % patch[0] != 0 || latent_shape[2] % patch[1] != 0 ||
        latent_shape[3] % patch[2] != 0)
        throw ConfigError("patch sizes must divide the latent shape");
    if (token_count() < 2) throw ConfigError("token count must be at least 2");
    if (cond_tokens < 1 || cond_dim < 1) throw ConfigError("condition shape must be positive");
}

DiTWeights init_weights(const ModelConfig& config) {
    config.validate();
    Rng rng(seed_mix(config.seed, kWeightStream));
    DiTWeights w;
    w.config = config;
    const int h = config.hidden_dim;
    w.patch_embed = make_linear(rng, h, config.patch_dim());
    w.out_proj = make_linear(rng, config.patch_dim(), h);
    w.blocks.resize(config.n_blocks);
    for (BlockWeights& b : w.blocks) {
        b.norm_attn_gain.assign(h, 1.0f);
        b.norm_cross_gain.assign(h, 1.0f);
        b.norm_mlp_gain.assign(h, 1.0f);
        b.qkv = make_linear(rng, 3 * h, h);
        b.attn_proj = make_linear(rng, h, h);
        b.cross_q = make_linear(rng, h, h);
        b.cross_kv = make_linear(rng, 2 * h, config.cond_dim);
        b.cross_proj = make_linear(rng, h, h);
        b.mlp_fc1 = make_linear(rng, config.mlp_dim(), h);
        b.mlp_fc2 = make_linear(rng, h, config.mlp_dim());
        b.modulation = make_linear(rng, 6 * h, h, /*zero_bias=*/true);
    }
    return w;
}

ConditionEmbedding condition_for_prompt(const ModelConfig& config, std::uint64_t prompt_id) {
    Rng rng(seed_mix(config.seed, kCondStream, prompt_id));
    ConditionEmbedding c;
    c.tokens = Mat(config.cond_tokens, config.cond_dim);
    for (float& x : c.tokens.data) x = rng.gaussian();
    c.is_null = false;
    return c;
}

ConditionEmbedding null_condition(const ModelConfig& config) {
    ConditionEmbedding c;
    c.tokens = Mat(config.cond_tokens, config.cond_dim);
    c.is_null = true;
    return c;
}

std::vector<float> timestep_embedding(float t, int dim) {
    std::vector<float> emb(dim, 0.0f);
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        const double arg = static_cast<double>(t) * freq;
        emb[i] = static_cast<float>(std::sin(arg));
        emb[half + i] = static_cast<float>(std::cos(arg));
    }
    return emb;
}

Mat patchify_raw(const Latent& x, const ModelConfig& config) {
    const auto [F, C, H, W] = config.latent_shape;
    if (x.frames != F || x.channels != C || x.height != H || x.width != W)
        throw DimensionError("patchify: latent shape does not match config");
    const int pf = config.patch[0], ph = config.patch[1], pw = config.patch[2];
    const int nf = F / pf, nh = H / ph, nw = W / pw;
    Mat patches(config.token_count(), config.patch_dim());
    int tok = 0;
    for (int fi = 0; fi < nf; ++fi)
        for (int hi = 0; hi < nh; ++hi)
            for (int wi = 0; wi < nw; ++wi, ++tok) {
                float* row = patches.row(tok);
                int k = 0;
                for (int c = 0; c < C; ++c)
                    for (int df = 0; df < pf; ++df)
                        for (int dh = 0; dh < ph; ++dh)
                            for (int dw = 0; dw < pw; ++dw)
                                row[k++] = x.at(fi * pf + df, c, hi * ph + dh, wi * pw + dw);
            }
    return patches;
}

Latent unpatchify_raw(const Mat& patches, const ModelConfig& config) {
    if (patches.rows != config.token_count() || patches.cols != config.patch_dim())
        throw DimensionError("unpatchify: expected " + std::to_string(config.token_count()) +
                             " x " + std::to_string(config.patch_dim()) + " patches, got " +
                             std::to_string(patches.rows) + " x " + std::to_string(patches.cols));
    const auto [F, C, H, W] = config.latent_shape;
    const int pf = config.patch[0], ph = config.patch[1], pw = config.patch[2];
    const int nf = F / pf, nh = H / ph, nw = W / pw;
    Latent x(F, C, H, W);
    int tok = 0;
    for (int fi = 0; fi < nf; ++fi)
        for (int hi = 0; hi < nh; ++hi)
            for (int wi = 0; wi < nw; ++wi, ++tok) {
                const float* row = patches.row(tok);
                int k = 0;
                for (int c = 0; c < C; ++c)
                    for (int df = 0; df < pf; ++df)
                        for (int dh = 0; dh < ph; ++dh)
                            for (int dw = 0; dw < pw; ++dw)
                                x.at(fi * pf + df, c, hi * ph + dh, wi * pw + dw) = row[k++];
            }
    return x;
}

TokenSequence patchify(const Latent& x, const DiTWeights& w, FlopCounter* fc, Phase phase) {
    Mat raw = patchify_raw(x, w.config);
    TokenSequence seq;
    seq.tokens = linear(raw, w.patch_embed, fc, phase);
    seq.role = TokenRole::y_in;
    return seq;
}

Latent unpatchify(const TokenSequence& tokens, const DiTWeights& w, FlopCounter* fc, Phase phase) {
    if (tokens.tokens.rows != w.config.token_count())
        throw DimensionError("unpatchify: expected " + std::to_string(w.config.token_count()) +
                             " tokens, got " + std::to_string(tokens.tokens.rows));
    Mat projected = linear(tokens.tokens, w.out_proj, fc, phase);
    return unpatchify_raw(projected, w.config);
}

TokenSequence block_forward(const TokenSequence& tokens, const ConditionEmbedding& cond,
                            const std::vector<float>& t_emb, const BlockWeights& w,
                            const ModelConfig& config, ProxyTapSet* taps,
                            FlopCounter* fc, Phase phase) {
    const int h = config.hidden_dim;
    const Mat& x = tokens.tokens;
    if (x.cols != h) throw DimensionError("block_forward: token width mismatch");
    if (cond.tokens.rows != config.cond_tokens || cond.tokens.cols != config.cond_dim)
        throw DimensionError("block_forward: condition shape mismatch");

    const std::vector<float> mod = linear_vec(t_emb, w.modulation, fc, phase);
    const std::span<const float> shift_a(mod.data(), h), scale_a(mod.data() + h, h),
        gate_a(mod.data() + 2 * h, h), shift_m(mod.data() + 3 * h, h),
        scale_m(mod.data() + 4 * h, h), gate_m(mod.data() + 5 * h, h);

    if (taps) taps->tap(TapId::block_in) = x;

    Mat attn_in = layernorm(x, w.norm_attn_gain);
    modulate_inplace(attn_in, shift_a, scale_a);
    if (taps) taps->tap(TapId::attn_in) = attn_in;

    Mat qkv = linear(attn_in, w.qkv, fc, phase);
    Mat attn = attention(slice_cols(qkv, 0, h), slice_cols(qkv, h, h), slice_cols(qkv, 2 * h, h),
                         config.n_heads, fc, phase);
    Mat attn_out = linear(attn, w.attn_proj, fc, phase);
    if (taps) taps->tap(TapId::attn_out) = attn_out;
    Mat h1 = add_gated(x, attn_out, gate_a);

    Mat cross_in = layernorm(h1, w.norm_cross_gain);
    if (taps) taps->tap(TapId::cross_attn_in) = cross_in;

    Mat q = linear(cross_in, w.cross_q, fc, phase);
    Mat kv = linear(cond.tokens, w.cross_kv, fc, phase);
    Mat cross = attention(q, slice_cols(kv, 0, h), slice_cols(kv, h, h),
                          config.n_heads, fc, phase);
    Mat cross_out = linear(cross, w.cross_proj, fc, phase);
    if (taps) taps->tap(TapId::cross_attn_out) = cross_out;
    Mat h2 = add(h1, cross_out);

    Mat mlp_in = layernorm(h2, w.norm_mlp_gain);
    modulate_inplace(mlp_in, shift_m, scale_m);
    if (taps) taps->tap(TapId::mlp_in) = mlp_in;

    Mat mid = linear(mlp_in, w.mlp_fc1, fc, phase);
    for (float& v : mid.data) v = gelu(v);
    Mat mlp_out = linear(mid, w.mlp_fc2, fc, phase);
    if (taps) taps->tap(TapId::mlp_out) = mlp_out;

    TokenSequence out;
    out.tokens = add_gated(h2, mlp_out, gate_m);
    out.role = TokenRole::intermediate;
    if (taps) taps->tap(TapId::block_out) = out.tokens;

    if (!all_finite(out.tokens.data)) throw NumericError("block output is non-finite");
    return out;
}

Block0Result block0_forward(const Latent& x, const ConditionEmbedding& cond, int step,
                            const DiTWeights& w, bool record_taps, FlopCounter* fc, Phase phase) {
    if (step < 1) throw ArgumentError("step index must be >= 1");
    Block0Result r;
    r.y_in = patchify(x, w, fc, phase);
    const std::vector<float> t_emb = timestep_embedding(static_cast<float>(step), w.config.hidden_dim);
    if (record_taps) r.taps.emplace();
    try {
        r.block0_out = block_forward(r.y_in, cond, t_emb, w.blocks[0], w.config,
                                     record_taps ? &*r.taps : nullptr, fc, phase);
    } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (block 0, step " + std::to_string(step) + ")");
    }
    return r;
}

DitOutput dit_continue(const Block0Result& prefix, const ConditionEmbedding& cond, int step,
                       const DiTWeights& w, FlopCounter* fc, Phase phase) {
    const std::vector<float> t_emb = timestep_embedding(static_cast<float>(step), w.config.hidden_dim);
    TokenSequence cur = prefix.block0_out;
    for (int b = 1; b < w.config.n_blocks; ++b) {
        try {
            cur = block_forward(cur, cond, t_emb, w.blocks[b], w.config, nullptr, fc, phase);
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " (block " + std::to_string(b) +
                               ", step " + std::to_string(step) + ")");
        }
    }
    DitOutput out;
    out.y_in = prefix.y_in;
    out.y_out = cur;
    out.y_out.role = TokenRole::y_out;
    out.eps = unpatchify(out.y_out, w, fc, phase);
    return out;
}

DitOutput dit_forward(const Latent& x, const ConditionEmbedding& cond, int step,
                      const DiTWeights& w, TapRecorder* recorder, FlopCounter* fc, Phase phase) {
    Block0Result prefix = block0_forward(x, cond, step, w, recorder != nullptr, fc, phase);
    if (recorder) recorder->taps = prefix.taps;
    return dit_continue(prefix, cond, step, w, fc, phase);
}

Mat block0_proxy(const Latent& x, const ConditionEmbedding& cond, int step, TapId tap,
                 const DiTWeights& w, FlopCounter* fc) {
    Block0Result r = block0_forward(x, cond, step, w, /*record_taps=*/true, fc, Phase::block0);
    return std::move(r.taps->tap(tap));
}

}  // namespace ditreuse
