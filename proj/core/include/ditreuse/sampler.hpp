#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ditreuse/flops.hpp"
#include "ditreuse/model.hpp"
#include "ditreuse/reuse.hpp"
#include "ditreuse/trace.hpp"

namespace ditreuse {

// Rectified-flow schedule: t_i = (n_steps - i + 1) / n_steps for step i in
// [1, n_steps], strictly decreasing from 1, with the final Euler update
// landing at t = 0.
struct SchedulerConfig {
    int n_steps = 50;
    double guidance_scale = 5.0;
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError
    float time_at(int step) const;  // step in [1, n_steps + 1]; time_at(n_steps + 1) = 0
};

// (1 + g) * eps_cond - g * eps_uncond, elementwise.
Latent cfg_combine(const Latent& eps_cond, const Latent& eps_uncond, double g);

// Euler update x + (t_{i+1} - t_i) * eps_bar under the velocity convention.
Latent sampler_step(const Latent& eps_bar, const Latent& x, int step,
                    const SchedulerConfig& sched);

// Seeded standard-normal latent for (sched.seed, prompt_id).
Latent initial_noise(const ModelConfig& config, const SchedulerConfig& sched,
                     std::uint64_t prompt_id);

struct StepDecision {
    bool reused_cond = false;
    bool reused_uncond = false;
    double metric_cond = 0.0;
    double metric_uncond = 0.0;
};

struct GenerationResult {
    std::uint64_t prompt_id = 0;
    std::uint64_t model_seed = 0;
    std::uint64_t sched_seed = 0;
    Latent final_latent;
    std::vector<StepDecision> decisions;  // one per step
    FlopCounter flops;
    std::vector<StepTrace> traces;        // filled when record_trace is set
    std::vector<Latent> step_latents;     // x_1 .. x_{n+1} when capture_latents is set

    int reused_cond_steps() const;
    int reused_uncond_steps() const;
    // Reused pass fraction over both CFG passes; equals the per-step reuse
    // fraction in aligned mode.
    double reuse_ratio() const;
};

struct GenerateOptions {
    bool record_trace = false;     // requires no reuse controller
    bool capture_latents = false;  // keep the latent after every step
};

// The denoising loop. Every step extracts the conditional block-0 proxy
// (when a controller is present), accumulates the reuse metric, and either
// serves both passes from cached residuals or runs both full passes and
// refreshes the cache. A computed step costs one full conditional pass plus
// one full unconditional pass: the conditional pass continues from the
// proxy-extraction prefix instead of recomputing it.
GenerationResult generate(std::uint64_t prompt_id, const DiTWeights& model,
                          const SchedulerConfig& sched,
                          const std::optional<ReuseConfig>& reuse,
                          const GenerateOptions& options = {});

}  // namespace ditreuse
