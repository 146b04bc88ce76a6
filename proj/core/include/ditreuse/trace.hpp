#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "ditreuse/model.hpp"

namespace ditreuse {

struct SchedulerConfig;

// Per-step record from a full-compute run: the oracle (relative change of
// consecutive conditional residuals) and, for each tap, the per-step
// non-accumulated reuse-metric contribution. Step 1 has no previous step, so
// oracle and candidates are absent there. L1 norms are kept for audit.
struct StepTrace {
    int step = 0;  // 1-based
    std::optional<double> oracle;
    std::array<std::optional<double>, kNumTaps> candidate_metrics;
    double residual_l1 = 0.0;
    std::array<double, kNumTaps> proxy_l1{};
};

// ||res_curr - res_prev||_1 / max(||res_curr||_1, eps).
double oracle_value(const TokenSequence& res_curr, const TokenSequence& res_prev, double eps);

// Full-compute generation recording oracle and all eight candidate metrics at
// every step. Recording never perturbs the generated latents.
std::vector<StepTrace> record_trace(std::uint64_t prompt_id, const DiTWeights& model,
                                    const SchedulerConfig& sched);

}  // namespace ditreuse
