#include "ditreuse/sampler.hpp"

#include <string>

#include "ditreuse/rng.hpp"

namespace ditreuse {

namespace {

constexpr std::uint64_t kNoiseStream = 0x4E4F4953;  // initial noise
constexpr double kTraceEps = 1e-12;

TokenSequence token_residual(const TokenSequence& y_in, const TokenSequence& y_out) {
    TokenSequence res;
    res.tokens = Mat(y_in.tokens.rows, y_in.tokens.cols);
    for (std::size_t i = 0; i < res.tokens.data.size(); ++i)
        res.tokens.data[i] = y_out.tokens.data[i] - y_in.tokens.data[i];
    return res;
}

}  // namespace

void SchedulerConfig::validate() const {
    if (n_steps < 2) throw ConfigError("n_steps must be at least 2");
    if (guidance_scale < 0.0) throw ConfigError("guidance_scale must be >= 0");
}

float SchedulerConfig::time_at(int step) const {
    return static_cast<float>(n_steps - step + 1) / static_cast<float>(n_steps);
}

Latent cfg_combine(const Latent& eps_cond, const Latent& eps_uncond, double g) {
    if (!eps_cond.same_shape(eps_uncond)) throw DimensionError("cfg_combine: shape mismatch");
    // (1 + g) * cond - g * uncond, computed as cond + g * (cond - uncond) so
    // equal predictions pass through exactly for any g.
    const float gf = static_cast<float>(g);
    Latent out = eps_cond;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = eps_cond.data[i] + gf * (eps_cond.data[i] - eps_uncond.data[i]);
    return out;
}

Latent sampler_step(const Latent& eps_bar, const Latent& x, int step,
                    const SchedulerConfig& sched) {
    if (!eps_bar.same_shape(x)) throw DimensionError("sampler_step: shape mismatch");
    if (step < 1 || step > sched.n_steps)
        throw ArgumentError("sampler_step: step " + std::to_string(step) + " out of range");
    const float dt = sched.time_at(step + 1) - sched.time_at(step);
    Latent out = x;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = x.data[i] + dt * eps_bar.data[i];
    return out;
}

Latent initial_noise(const ModelConfig& config, const SchedulerConfig& sched,
                     std::uint64_t prompt_id) {
    Rng rng(seed_mix(sched.seed, kNoiseStream, prompt_id));
    Latent x(config.latent_shape[0], config.latent_shape[1], config.latent_shape[2],
             config.latent_shape[3]);
    for (float& v : x.data) v = rng.gaussian();
    return x;
}

int GenerationResult::reused_cond_steps() const {
    int n = 0;
    for (const StepDecision& d : decisions) n += d.reused_cond ? 1 : 0;
    return n;
}

int GenerationResult::reused_uncond_steps() const {
    int n = 0;
    for (const StepDecision& d : decisions) n += d.reused_uncond ? 1 : 0;
    return n;
}

double GenerationResult::reuse_ratio() const {
    if (decisions.empty()) return 0.0;
    return static_cast<double>(reused_cond_steps() + reused_uncond_steps()) /
           (2.0 * static_cast<double>(decisions.size()));
}

GenerationResult generate(std::uint64_t prompt_id, const DiTWeights& model,
                          const SchedulerConfig& sched,
                          const std::optional<ReuseConfig>& reuse,
                          const GenerateOptions& options) {
    model.config.validate();
    sched.validate();
    if (reuse) reuse->validate();
    if (reuse && options.record_trace)
        throw ArgumentError("generate: trace recording requires a full-compute run");

    const ConditionEmbedding cond = condition_for_prompt(model.config, prompt_id);
    const ConditionEmbedding uncond = null_condition(model.config);
    const bool independent = reuse && reuse->mode == ReuseMode::independent;

    GenerationResult result;
    result.prompt_id = prompt_id;
    result.model_seed = model.config.seed;
    result.sched_seed = sched.seed;
    result.decisions.reserve(sched.n_steps);

    Latent x = initial_noise(model.config, sched, prompt_id);
    if (options.capture_latents) result.step_latents.push_back(x);

    ReuseState state_cond;    // in aligned mode this one holds both residuals
    ReuseState state_uncond;  // used by independent mode only
    std::optional<ProxyTapSet> prev_taps;
    std::optional<TokenSequence> prev_residual;
    FlopCounter& fc = result.flops;

    for (int step = 1; step <= sched.n_steps; ++step) {
        fc.begin_step();
        Latent eps_c, eps_u;
        StepDecision logged;
        StepKind kind = StepKind::computed;

        if (!reuse) {
            // Full compute. The conditional prefix is still split out when
            // tracing so the tap set comes from the same computation.
            if (options.record_trace) {
                Block0Result prefix =
                    block0_forward(x, cond, step, model, /*record_taps=*/true, &fc, Phase::block0);
                DitOutput out_c = dit_continue(prefix, cond, step, model, &fc, Phase::full_pass_cond);
                DitOutput out_u =
                    dit_forward(x, uncond, step, model, nullptr, &fc, Phase::full_pass_uncond);
                eps_c = std::move(out_c.eps);
                eps_u = std::move(out_u.eps);

                StepTrace tr;
                tr.step = step;
                const ProxyTapSet& taps = *prefix.taps;
                for (int k = 0; k < kNumTaps; ++k) tr.proxy_l1[k] = l1_norm(taps.taps[k].data);
                TokenSequence res = token_residual(out_c.y_in, out_c.y_out);
                tr.residual_l1 = l1_norm(res.tokens.data);
                if (prev_taps && prev_residual) {
                    for (int k = 0; k < kNumTaps; ++k)
                        tr.candidate_metrics[k] =
                            relative_l1(prev_taps->taps[k], taps.taps[k], kTraceEps);
                    tr.oracle = oracle_value(res, *prev_residual, kTraceEps);
                }
                prev_taps = taps;
                prev_residual = std::move(res);
                result.traces.push_back(std::move(tr));
            } else {
                eps_c = dit_forward(x, cond, step, model, nullptr, &fc, Phase::full_pass_cond).eps;
                eps_u = dit_forward(x, uncond, step, model, nullptr, &fc, Phase::full_pass_uncond).eps;
            }
        } else if (!independent) {
            Block0Result prefix =
                block0_forward(x, cond, step, model, /*record_taps=*/true, &fc, Phase::block0);
            const ReuseDecision d = update_and_decide(state_cond, prefix.taps->tap(reuse->proxy_tap),
                                                      step, sched.n_steps, *reuse);
            state_cond.y_in_current = prefix.y_in;
            if (d.use_cache) {
                eps_c = unpatchify(apply_cached(state_cond.y_in_current, state_cond.res_cond),
                                   model, &fc, Phase::unpatchify);
                eps_u = unpatchify(apply_cached(state_cond.y_in_current, state_cond.res_uncond),
                                   model, &fc, Phase::unpatchify);
                kind = StepKind::reused;
            } else {
                DitOutput out_c = dit_continue(prefix, cond, step, model, &fc, Phase::full_pass_cond);
                DitOutput out_u =
                    dit_forward(x, uncond, step, model, nullptr, &fc, Phase::full_pass_uncond);
                store_residuals(state_cond, out_c.y_in, out_c.y_out, out_u.y_in, out_u.y_out);
                eps_c = std::move(out_c.eps);
                eps_u = std::move(out_u.eps);
            }
            logged = {d.use_cache, d.use_cache, d.metric_value, d.metric_value};
        } else {
            Block0Result prefix_c =
                block0_forward(x, cond, step, model, /*record_taps=*/true, &fc, Phase::block0);
            Block0Result prefix_u =
                block0_forward(x, uncond, step, model, /*record_taps=*/true, &fc, Phase::block0);
            const ReuseDecision dc = update_and_decide(
                state_cond, prefix_c.taps->tap(reuse->proxy_tap), step, sched.n_steps, *reuse);
            const ReuseDecision du = update_and_decide(
                state_uncond, prefix_u.taps->tap(reuse->proxy_tap), step, sched.n_steps, *reuse);
            state_cond.y_in_current = prefix_c.y_in;
            state_uncond.y_in_current = prefix_u.y_in;

            if (dc.use_cache) {
                eps_c = unpatchify(apply_cached(state_cond.y_in_current, state_cond.res_cond),
                                   model, &fc, Phase::unpatchify);
            } else {
                DitOutput out_c = dit_continue(prefix_c, cond, step, model, &fc, Phase::full_pass_cond);
                store_residual(state_cond, out_c.y_in, out_c.y_out, Pass::cond);
                eps_c = std::move(out_c.eps);
            }
            if (du.use_cache) {
                eps_u = unpatchify(apply_cached(state_uncond.y_in_current, state_uncond.res_uncond),
                                   model, &fc, Phase::unpatchify);
            } else {
                DitOutput out_u =
                    dit_continue(prefix_u, uncond, step, model, &fc, Phase::full_pass_uncond);
                store_residual(state_uncond, out_u.y_in, out_u.y_out, Pass::uncond);
                eps_u = std::move(out_u.eps);
            }
            kind = dc.use_cache == du.use_cache
                       ? (dc.use_cache ? StepKind::reused : StepKind::computed)
                       : StepKind::mixed;
            logged = {dc.use_cache, du.use_cache, dc.metric_value, du.metric_value};
        }

        const Latent eps_bar = cfg_combine(eps_c, eps_u, sched.guidance_scale);
        x = sampler_step(eps_bar, x, step, sched);
        fc.end_step(kind);
        result.decisions.push_back(logged);
        if (options.capture_latents) result.step_latents.push_back(x);
    }

    result.final_latent = std::move(x);
    return result;
}

}  // namespace ditreuse
