#include "ditreuse/flops.hpp"

#include "ditreuse/model.hpp"

namespace ditreuse {

std::string_view phase_name(Phase p) {
    static constexpr std::array<std::string_view, kNumPhases> names = {
        "block0", "full_pass_cond", "full_pass_uncond", "unpatchify", "sampler",
    };
    return names[static_cast<int>(p)];
}

FlopsReport flops_report(const FlopCounter& counter) {
    if (counter.computed_steps() == 0)
        throw InvalidStateError("flops_report: no computed step recorded");
    if (counter.reused_steps() == 0)
        throw InvalidStateError("flops_report: no reused step recorded");
    FlopsReport r;
    for (int i = 0; i < kNumPhases; ++i)
        r.by_phase[i] = counter.phase_total(static_cast<Phase>(i));
    r.total = counter.total();
    r.computed_steps = counter.computed_steps();
    r.reused_steps = counter.reused_steps();
    r.computed_step_cost =
        static_cast<double>(counter.computed_step_flops()) / counter.computed_steps();
    r.reused_step_cost =
        static_cast<double>(counter.reused_step_flops()) / counter.reused_steps();
    r.cost_ratio = r.reused_step_cost / r.computed_step_cost;
    return r;
}

FlopModel analytic_flops(const ModelConfig& config) {
    config.validate();
    const std::uint64_t T = config.token_count();
    const std::uint64_t h = config.hidden_dim;
    const std::uint64_t p = config.patch_dim();
    const std::uint64_t m = config.mlp_dim();
    const std::uint64_t tc = config.cond_tokens;
    const std::uint64_t cd = config.cond_dim;

    FlopModel f;
    f.patchify = 2 * T * p * h;
    f.unpatchify = 2 * T * h * p;
    f.block = 2 * h * 6 * h           // AdaLN modulation from the timestep embedding
              + 2 * T * h * 3 * h     // qkv
              + 4 * T * T * h         // self-attention scores + value mix
              + 2 * T * h * h         // attention output projection
              + 2 * T * h * h         // cross-attention query
              + 2 * tc * cd * 2 * h   // cross-attention key/value from cond
              + 4 * T * tc * h        // cross-attention scores + value mix
              + 2 * T * h * h         // cross-attention output projection
              + 2 * T * h * m         // mlp fc1
              + 2 * T * m * h;        // mlp fc2
    f.full_pass = f.patchify + static_cast<std::uint64_t>(config.n_blocks) * f.block + f.unpatchify;
    f.block0_prefix = f.patchify + f.block;
    f.reused_step = f.block0_prefix + 2 * f.unpatchify;
    f.computed_step = 2 * f.full_pass;
    return f;
}

}  // namespace ditreuse
