#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "ditreuse/errors.hpp"

namespace ditreuse {

struct ModelConfig;

// Cost attribution buckets for one generation. block0 is the per-step proxy
// prefix (patch embedding + first block); full_pass_cond / full_pass_uncond
// hold the remaining computed-pass work; unpatchify holds the cached-path
// output projections; sampler holds the CFG combine and Euler update, which
// are elementwise and therefore free under the matmul-only FLOP convention.
enum class Phase : int {
    block0 = 0,
    full_pass_cond,
    full_pass_uncond,
    unpatchify,
    sampler,
};

inline constexpr int kNumPhases = 5;

std::string_view phase_name(Phase p);

enum class StepKind : int { computed = 0, reused, mixed };

// Monotone multiply-accumulate counter. Counts 2*m*n*k per (m x k)(k x n)
// matrix product; elementwise and softmax work is not charged. Steps are
// bracketed with begin_step/end_step so per-kind step costs can be reported.
class FlopCounter {
 public:
    void add(Phase p, std::uint64_t flops) {
        by_phase_[static_cast<int>(p)] += flops;
        total_ += flops;
    }

    std::uint64_t phase_total(Phase p) const { return by_phase_[static_cast<int>(p)]; }
    std::uint64_t total() const { return total_; }

    void begin_step() { step_mark_ = total_; }
    void end_step(StepKind kind) {
        std::uint64_t step_flops = total_ - step_mark_;
        switch (kind) {
            case StepKind::computed:
                computed_flops_ += step_flops;
                ++computed_steps_;
                break;
            case StepKind::reused:
                reused_flops_ += step_flops;
                ++reused_steps_;
                break;
            case StepKind::mixed:
                mixed_flops_ += step_flops;
                ++mixed_steps_;
                break;
        }
    }

    int computed_steps() const { return computed_steps_; }
    int reused_steps() const { return reused_steps_; }
    int mixed_steps() const { return mixed_steps_; }
    std::uint64_t computed_step_flops() const { return computed_flops_; }
    std::uint64_t reused_step_flops() const { return reused_flops_; }
    std::uint64_t mixed_step_flops() const { return mixed_flops_; }

 private:
    std::array<std::uint64_t, kNumPhases> by_phase_{};
    std::uint64_t total_ = 0;
    std::uint64_t step_mark_ = 0;
    std::uint64_t computed_flops_ = 0;
    std::uint64_t reused_flops_ = 0;
    std::uint64_t mixed_flops_ = 0;
    int computed_steps_ = 0;
    int reused_steps_ = 0;
    int mixed_steps_ = 0;
};

struct FlopsReport {
    std::array<std::uint64_t, kNumPhases> by_phase{};
    std::uint64_t total = 0;
    int computed_steps = 0;
    int reused_steps = 0;
    double computed_step_cost = 0.0;  // mean FLOPs per fully computed step
    double reused_step_cost = 0.0;    // mean FLOPs per fully reused step
    double cost_ratio = 0.0;          // reused_step_cost / computed_step_cost
};

// Requires at least one fully computed and one fully reused step.
FlopsReport flops_report(const FlopCounter& counter);

// Closed-form per-occurrence costs for one denoising step of a given model,
// under the same matmul-only convention as the counter.
struct FlopModel {
    std::uint64_t patchify = 0;
    std::uint64_t unpatchify = 0;
    std::uint64_t block = 0;      // one DiT block on the full token sequence
    std::uint64_t full_pass = 0;  // patchify + n_blocks * block + unpatchify
    std::uint64_t block0_prefix = 0;  // patchify + one block (proxy extraction)
    std::uint64_t reused_step = 0;    // block0_prefix + 2 * unpatchify
    std::uint64_t computed_step = 0;  // 2 * full_pass (prefix shared with proxy)

    double reuse_cost_ratio() const {
        return static_cast<double>(reused_step) / static_cast<double>(computed_step);
    }
};

FlopModel analytic_flops(const ModelConfig& config);

}  // namespace ditreuse
