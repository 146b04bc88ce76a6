#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ditreuse/flops.hpp"
#include "ditreuse/model.hpp"
#include "test_util.hpp"

using namespace ditreuse;
using namespace ditreuse::test;

TEST_CASE("init_weights is a pure function of config and seed") {
    const ModelConfig cfg = small_config(7);
    const DiTWeights a = init_weights(cfg);
    const DiTWeights b = init_weights(cfg);
    CHECK(bitwise_equal(a.patch_embed.weight, b.patch_embed.weight));
    CHECK(a.patch_embed.bias == b.patch_embed.bias);
    for (int i = 0; i < cfg.n_blocks; ++i) {
        CHECK(bitwise_equal(a.blocks[i].qkv.weight, b.blocks[i].qkv.weight));
        CHECK(bitwise_equal(a.blocks[i].mlp_fc2.weight, b.blocks[i].mlp_fc2.weight));
        CHECK(bitwise_equal(a.blocks[i].modulation.weight, b.blocks[i].modulation.weight));
    }
}

TEST_CASE("different seeds give different weights") {
    const DiTWeights a = init_weights(small_config(0));
    const DiTWeights b = init_weights(small_config(1));
    CHECK_FALSE(bitwise_equal(a.patch_embed.weight, b.patch_embed.weight));
}

TEST_CASE("modulation biases are zero") {
    const DiTWeights w = init_weights(small_config(3));
    for (const BlockWeights& b : w.blocks)
        for (float v : b.modulation.bias) CHECK(v == 0.0f);
}

TEST_CASE("hidden_dim not divisible by n_heads is rejected") {
    ModelConfig cfg = small_config();
    cfg.hidden_dim = 6;
    cfg.n_heads = 4;
    CHECK_THROWS_AS(init_weights(cfg), ConfigError);
}

TEST_CASE("token count below 2 is rejected") {
    ModelConfig cfg = small_config();
    cfg.latent_shape = {1, 4, 2, 2};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("patchify produces the expected token count") {
    ModelConfig cfg;
    cfg.latent_shape = {4, 8, 8, 8};
    cfg.patch = {1, 2, 2};
    CHECK(cfg.token_count() == 64);
    const DiTWeights w = init_weights(cfg);
    const Latent x = random_latent(cfg, 11);
    const TokenSequence t = patchify(x, w);
    CHECK(t.tokens.rows == 64);
    CHECK(t.tokens.cols == cfg.hidden_dim);
    CHECK(t.role == TokenRole::y_in);
}

TEST_CASE("all-zero latent patchifies to the patch-embedding bias row") {
    const ModelConfig cfg = small_config(5);
    const DiTWeights w = init_weights(cfg);
    Latent x(cfg.latent_shape[0], cfg.latent_shape[1], cfg.latent_shape[2], cfg.latent_shape[3]);
    const TokenSequence t = patchify(x, w);
    for (int r = 0; r < t.tokens.rows; ++r)
        for (int c = 0; c < t.tokens.cols; ++c) CHECK(t.tokens.at(r, c) == w.patch_embed.bias[c]);
}

TEST_CASE("raw patchify/unpatchify are exact inverses") {
    const ModelConfig cfg = small_config();
    const Latent x = random_latent(cfg, 123);
    const Latent back = unpatchify_raw(patchify_raw(x, cfg), cfg);
    CHECK(bitwise_equal(x, back));
}

TEST_CASE("patchify rejects a mismatched latent shape") {
    const ModelConfig cfg = small_config();
    const DiTWeights w = init_weights(cfg);
    Latent wrong(1, cfg.latent_shape[1], cfg.latent_shape[2], cfg.latent_shape[3]);
    CHECK_THROWS_AS(patchify(wrong, w), DimensionError);
}

TEST_CASE("zero tokens unpatchify to the output-projection bias layout") {
    const ModelConfig cfg = small_config(9);
    const DiTWeights w = init_weights(cfg);
    TokenSequence zeros;
    zeros.tokens = Mat(cfg.token_count(), cfg.hidden_dim);
    const Latent out = unpatchify(zeros, w);

    Mat bias_rows(cfg.token_count(), cfg.patch_dim());
    for (int r = 0; r < bias_rows.rows; ++r)
        for (int c = 0; c < bias_rows.cols; ++c) bias_rows.at(r, c) = w.out_proj.bias[c];
    CHECK(bitwise_equal(out, unpatchify_raw(bias_rows, cfg)));
}

TEST_CASE("unpatchify rejects a wrong token count") {
    const ModelConfig cfg = small_config();
    const DiTWeights w = init_weights(cfg);
    TokenSequence bad;
    bad.tokens = Mat(cfg.token_count() - 1, cfg.hidden_dim);
    CHECK_THROWS_AS(unpatchify(bad, w), DimensionError);
}

TEST_CASE("block taps bracket the block input and output") {
    const ModelConfig cfg = small_config(21);
    const DiTWeights w = init_weights(cfg);
    const ConditionEmbedding cond = condition_for_prompt(cfg, 0);
    const Latent x = random_latent(cfg, 3);
    const TokenSequence tokens = patchify(x, w);
    const std::vector<float> t_emb = timestep_embedding(1.0f, cfg.hidden_dim);

    ProxyTapSet taps;
    const TokenSequence out = block_forward(tokens, cond, t_emb, w.blocks[0], cfg, &taps);
    CHECK(bitwise_equal(taps.tap(TapId::block_in), tokens.tokens));
    CHECK(bitwise_equal(taps.tap(TapId::block_out), out.tokens));
    for (int k = 0; k < kNumTaps; ++k) {
        CHECK(taps.taps[k].rows == cfg.token_count());
        CHECK(taps.taps[k].cols == cfg.hidden_dim);
    }
}

TEST_CASE("no tap set is allocated unless requested") {
    const ModelConfig cfg = small_config();
    const DiTWeights w = init_weights(cfg);
    const Latent x = random_latent(cfg, 4);
    const Block0Result r =
        block0_forward(x, condition_for_prompt(cfg, 0), 1, w, /*record_taps=*/false);
    CHECK_FALSE(r.taps.has_value());
}

TEST_CASE("cross-attention is the first condition-dependent tap") {
    const ModelConfig cfg = small_config(33);
    const DiTWeights w = init_weights(cfg);
    const Latent x = random_latent(cfg, 5);
    const TokenSequence tokens = patchify(x, w);
    const std::vector<float> t_emb = timestep_embedding(2.0f, cfg.hidden_dim);

    ProxyTapSet with_cond, with_null;
    block_forward(tokens, condition_for_prompt(cfg, 1), t_emb, w.blocks[0], cfg, &with_cond);
    block_forward(tokens, null_condition(cfg), t_emb, w.blocks[0], cfg, &with_null);

    CHECK(bitwise_equal(with_cond.tap(TapId::block_in), with_null.tap(TapId::block_in)));
    CHECK(bitwise_equal(with_cond.tap(TapId::attn_in), with_null.tap(TapId::attn_in)));
    CHECK(bitwise_equal(with_cond.tap(TapId::attn_out), with_null.tap(TapId::attn_out)));
    CHECK(bitwise_equal(with_cond.tap(TapId::cross_attn_in), with_null.tap(TapId::cross_attn_in)));
    CHECK_FALSE(
        bitwise_equal(with_cond.tap(TapId::cross_attn_out), with_null.tap(TapId::cross_attn_out)));
    CHECK_FALSE(bitwise_equal(with_cond.tap(TapId::mlp_in), with_null.tap(TapId::mlp_in)));
    CHECK_FALSE(bitwise_equal(with_cond.tap(TapId::mlp_out), with_null.tap(TapId::mlp_out)));
    CHECK_FALSE(bitwise_equal(with_cond.tap(TapId::block_out), with_null.tap(TapId::block_out)));
}

TEST_CASE("zero timestep embedding disables modulation") {
    const ModelConfig cfg = small_config(44);
    DiTWeights w = init_weights(cfg);
    const Latent x = random_latent(cfg, 6);
    const TokenSequence tokens = patchify(x, w);
    const ConditionEmbedding cond = condition_for_prompt(cfg, 0);
    const std::vector<float> zero_emb(cfg.hidden_dim, 0.0f);
    const std::vector<float> real_emb = timestep_embedding(3.0f, cfg.hidden_dim);

    const TokenSequence base = block_forward(tokens, cond, zero_emb, w.blocks[0], cfg);
    const TokenSequence base_real = block_forward(tokens, cond, real_emb, w.blocks[0], cfg);
    // Scrambling the modulation map cannot matter when the embedding is zero.
    for (float& v : w.blocks[0].modulation.weight.data) v = -v * 3.0f;
    const TokenSequence scrambled = block_forward(tokens, cond, zero_emb, w.blocks[0], cfg);
    const TokenSequence scrambled_real = block_forward(tokens, cond, real_emb, w.blocks[0], cfg);

    CHECK(bitwise_equal(base.tokens, scrambled.tokens));
    CHECK_FALSE(bitwise_equal(base_real.tokens, scrambled_real.tokens));
}

TEST_CASE("dit_forward is deterministic and records exactly one tap set") {
    const ModelConfig cfg = small_config(55);
    const DiTWeights w = init_weights(cfg);
    const ConditionEmbedding cond = condition_for_prompt(cfg, 2);
    const Latent x = random_latent(cfg, 7);

    TapRecorder rec;
    const DitOutput a = dit_forward(x, cond, 1, w, &rec);
    const DitOutput b = dit_forward(x, cond, 1, w);
    CHECK(bitwise_equal(a.eps, b.eps));
    CHECK(rec.taps.has_value());
    // The recorded set belongs to block 0: its block_in tap is y_in.
    CHECK(bitwise_equal(rec.taps->tap(TapId::block_in), a.y_in.tokens));
}

TEST_CASE("y_out minus y_in telescopes over per-block deltas") {
    const ModelConfig cfg = small_config(66);
    const DiTWeights w = init_weights(cfg);
    const ConditionEmbedding cond = condition_for_prompt(cfg, 1);
    const Latent x = random_latent(cfg, 8);
    const int step = 2;

    const DitOutput out = dit_forward(x, cond, step, w);

    const std::vector<float> t_emb = timestep_embedding(static_cast<float>(step), cfg.hidden_dim);
    TokenSequence cur = patchify(x, w);
    Mat delta_sum(cur.tokens.rows, cur.tokens.cols);
    for (int b = 0; b < cfg.n_blocks; ++b) {
        const TokenSequence next = block_forward(cur, cond, t_emb, w.blocks[b], cfg);
        for (std::size_t i = 0; i < delta_sum.data.size(); ++i)
            delta_sum.data[i] += next.tokens.data[i] - cur.tokens.data[i];
        cur = next;
    }

    double ref_norm = 0.0, err = 0.0;
    for (std::size_t i = 0; i < delta_sum.data.size(); ++i) {
        const double direct = static_cast<double>(out.y_out.tokens.data[i]) - out.y_in.tokens.data[i];
        ref_norm += std::fabs(direct);
        err += std::fabs(direct - delta_sum.data[i]);
    }
    CHECK(err <= 1e-6 * ref_norm);
}

TEST_CASE("block0_proxy matches the recorded tap of a full forward") {
    const ModelConfig cfg = small_config(77);
    const DiTWeights w = init_weights(cfg);
    const ConditionEmbedding cond = condition_for_prompt(cfg, 3);
    const Latent x = random_latent(cfg, 9);

    TapRecorder rec;
    dit_forward(x, cond, 4, w, &rec);
    for (int k = 0; k < kNumTaps; ++k) {
        const TapId tap = static_cast<TapId>(k);
        const Mat proxy = block0_proxy(x, cond, 4, tap, w);
        CHECK(bitwise_equal(proxy, rec.taps->tap(tap)));
    }
}

TEST_CASE("block0_proxy cost is roughly 1/n_blocks of a full pass") {
    const ModelConfig cfg;  // default toy: 8 blocks
    const DiTWeights w = init_weights(cfg);
    const ConditionEmbedding cond = condition_for_prompt(cfg, 0);
    const Latent x = random_latent(cfg, 10);

    FlopCounter fc_proxy, fc_full;
    block0_proxy(x, cond, 1, TapId::block_out, w, &fc_proxy);
    dit_forward(x, cond, 1, w, nullptr, &fc_full);

    const FlopModel model = analytic_flops(cfg);
    CHECK(fc_proxy.total() == model.block0_prefix);
    CHECK(fc_full.total() == model.full_pass);
    const double ratio = static_cast<double>(fc_proxy.total()) / fc_full.total();
    CHECK(ratio == doctest::Approx(1.0 / cfg.n_blocks).epsilon(0.05));
    CHECK(fc_proxy.total() < fc_full.total());
}

TEST_CASE("unknown tap names are rejected") {
    CHECK_THROWS_AS(tap_from_name("block9_out"), ConfigError);
    CHECK(tap_from_name("cross_attn_out") == TapId::cross_attn_out);
    for (int k = 0; k < kNumTaps; ++k)
        CHECK(tap_from_name(tap_name(static_cast<TapId>(k))) == static_cast<TapId>(k));
}

TEST_CASE("non-finite intermediates raise a numeric error with step context") {
    const ModelConfig cfg = small_config(88);
    DiTWeights w = init_weights(cfg);
    for (float& v : w.blocks[1].mlp_fc2.weight.data) v = 3e38f;
    const Latent x = random_latent(cfg, 12);
    try {
        dit_forward(x, condition_for_prompt(cfg, 0), 5, w);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("step 5") != std::string::npos);
    }
}

TEST_CASE("step indices start at one") {
    const ModelConfig cfg = small_config(110);
    const DiTWeights w = init_weights(cfg);
    const Latent x = random_latent(cfg, 13);
    CHECK_THROWS_AS(dit_forward(x, condition_for_prompt(cfg, 0), 0, w), ArgumentError);
}

TEST_CASE("condition embeddings are deterministic, prompt-specific, and null is zero") {
    const ModelConfig cfg = small_config(99);
    const ConditionEmbedding a = condition_for_prompt(cfg, 0);
    const ConditionEmbedding b = condition_for_prompt(cfg, 0);
    const ConditionEmbedding c = condition_for_prompt(cfg, 1);
    CHECK(bitwise_equal(a.tokens, b.tokens));
    CHECK_FALSE(bitwise_equal(a.tokens, c.tokens));
    CHECK_FALSE(a.is_null);

    const ConditionEmbedding n = null_condition(cfg);
    CHECK(n.is_null);
    for (float v : n.tokens.data) CHECK(v == 0.0f);
}
