#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "ditreuse/flops.hpp"
#include "ditreuse/tensor.hpp"

namespace ditreuse {

// Intermediate tensors of the first DiT block used as reuse proxies.
// attn_in / cross_attn_in / mlp_in are the post-norm layer inputs;
// attn_out / cross_attn_out / mlp_out are the layer outputs before the
// residual add; block_in / block_out bracket the whole block.
enum class TapId : int {
    block_in = 0,
    attn_in,
    attn_out,
    cross_attn_in,
    cross_attn_out,
    mlp_in,
    mlp_out,
    block_out,
};

inline constexpr int kNumTaps = 8;

std::string_view tap_name(TapId tap);
TapId tap_from_name(std::string_view name);  // throws ConfigError on unknown names

struct ModelConfig {
    int n_blocks = 8;
    int hidden_dim = 64;
    int n_heads = 4;
    double mlp_ratio = 4.0;
    std::array<int, 3> patch = {1, 2, 2};            // (pf, ph, pw)
    std::array<int, 4> latent_shape = {4, 8, 8, 8};  // (F, C, H, W)
    int cond_tokens = 8;
    int cond_dim = 32;
    std::uint64_t seed = 0;

    int token_count() const {
        return (latent_shape[0] / patch[0]) * (latent_shape[2] / patch[1]) *
               (latent_shape[3] / patch[2]);
    }
    int patch_dim() const { return latent_shape[1] * patch[0] * patch[1] * patch[2]; }
    int mlp_dim() const { return static_cast<int>(hidden_dim * mlp_ratio); }

    void validate() const;  // throws ConfigError
};

enum class TokenRole : int { y_in = 0, intermediate, y_out };

// Patchified latent flowing through the DiT blocks, (T x hidden_dim).
struct TokenSequence {
    Mat tokens;
    TokenRole role = TokenRole::intermediate;
};

// Condition tokens (n_cond_tokens x cond_dim). The null embedding is the
// all-zero matrix with is_null set.
struct ConditionEmbedding {
    Mat tokens;
    bool is_null = false;
};

// weight is (out_features x in_features); forward computes x W^T + b.
struct Linear {
    Mat weight;
    std::vector<float> bias;
};

struct BlockWeights {
    std::vector<float> norm_attn_gain;
    std::vector<float> norm_cross_gain;
    std::vector<float> norm_mlp_gain;
    Linear qkv;         // hidden -> 3*hidden
    Linear attn_proj;   // hidden -> hidden
    Linear cross_q;     // hidden -> hidden
    Linear cross_kv;    // cond_dim -> 2*hidden
    Linear cross_proj;  // hidden -> hidden
    Linear mlp_fc1;     // hidden -> mlp_dim
    Linear mlp_fc2;     // mlp_dim -> hidden
    Linear modulation;  // t_emb -> 6*hidden (shift/scale/gate for attn and mlp), zero bias
};

struct DiTWeights {
    ModelConfig config;
    Linear patch_embed;  // patch_dim -> hidden
    Linear out_proj;     // hidden -> patch_dim
    std::vector<BlockWeights> blocks;
};

struct ProxyTapSet {
    std::array<Mat, kNumTaps> taps;

    const Mat& tap(TapId id) const { return taps[static_cast<int>(id)]; }
    Mat& tap(TapId id) { return taps[static_cast<int>(id)]; }
};

// Captures the first block's tap set during a full forward.
struct TapRecorder {
    std::optional<ProxyTapSet> taps;
};

// Weights are a pure function of (config, config.seed); repeated calls are
// bit-identical. Tensors draw from a seeded uniform scaled by 1/sqrt(fan_in);
// modulation biases are zero so a zero timestep embedding modulates nothing.
DiTWeights init_weights(const ModelConfig& config);

// Seeded Gaussian stand-in for a text embedding, one per prompt id.
ConditionEmbedding condition_for_prompt(const ModelConfig& config, std::uint64_t prompt_id);
ConditionEmbedding null_condition(const ModelConfig& config);

// Sinusoidal embedding of the step index, dimension dim.
std::vector<float> timestep_embedding(float t, int dim);

// Raw patch layout: (T x patch_dim) with patches ordered (frame, row, col)
// and features ordered (channel, df, dh, dw). unpatchify_raw is its exact
// inverse.
Mat patchify_raw(const Latent& x, const ModelConfig& config);
Latent unpatchify_raw(const Mat& patches, const ModelConfig& config);

TokenSequence patchify(const Latent& x, const DiTWeights& w,
                       FlopCounter* fc = nullptr, Phase phase = Phase::full_pass_cond);
Latent unpatchify(const TokenSequence& tokens, const DiTWeights& w,
                  FlopCounter* fc = nullptr, Phase phase = Phase::full_pass_cond);

// One DiT block: AdaLN-modulated norm -> self-attention (+add) -> plain-norm
// cross-attention over cond (+add) -> AdaLN-modulated MLP (+add). When taps
// is non-null all eight tap tensors are captured; otherwise none are
// allocated. Throws NumericError if the block output is non-finite.
TokenSequence block_forward(const TokenSequence& tokens, const ConditionEmbedding& cond,
                            const std::vector<float>& t_emb, const BlockWeights& w,
                            const ModelConfig& config, ProxyTapSet* taps = nullptr,
                            FlopCounter* fc = nullptr, Phase phase = Phase::full_pass_cond);

struct DitOutput {
    Latent eps;
    TokenSequence y_in;
    TokenSequence y_out;
};

// Patch embedding plus the first block, the shared prefix of a full pass.
struct Block0Result {
    TokenSequence y_in;
    TokenSequence block0_out;
    std::optional<ProxyTapSet> taps;
};

Block0Result block0_forward(const Latent& x, const ConditionEmbedding& cond, int step,
                            const DiTWeights& w, bool record_taps,
                            FlopCounter* fc = nullptr, Phase phase = Phase::block0);

// Remaining blocks plus the output projection, continuing a block0_forward.
DitOutput dit_continue(const Block0Result& prefix, const ConditionEmbedding& cond, int step,
                       const DiTWeights& w, FlopCounter* fc = nullptr,
                       Phase phase = Phase::full_pass_cond);

// Full pass: eps = unpatchify(y_out) after all n_blocks blocks. Internally
// runs block0_forward + dit_continue, so the split path is bit-identical.
DitOutput dit_forward(const Latent& x, const ConditionEmbedding& cond, int step,
                      const DiTWeights& w, TapRecorder* recorder = nullptr,
                      FlopCounter* fc = nullptr, Phase phase = Phase::full_pass_cond);

// Proxy extraction: patch embedding + first block only, returning one tap.
// Costs one block0_prefix, strictly less than a full pass.
Mat block0_proxy(const Latent& x, const ConditionEmbedding& cond, int step, TapId tap,
                 const DiTWeights& w, FlopCounter* fc = nullptr);

}  // namespace ditreuse
