#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ditreuse/model.hpp"

namespace ditreuse {

// aligned: one decision per step drives both CFG passes (derived from the
// conditional proxy). independent: each pass keeps its own proxy history and
// decides on its own; kept as an ablation mode.
enum class ReuseMode : int { aligned = 0, independent };

std::string_view reuse_mode_name(ReuseMode m);
ReuseMode reuse_mode_from_name(std::string_view name);  // throws ConfigError

enum class Pass : int { cond = 0, uncond };

struct ReuseConfig {
    double threshold = 0.0;  // may be +infinity
    double warmup_fraction = 0.2;
    TapId proxy_tap = TapId::cross_attn_out;
    ReuseMode mode = ReuseMode::aligned;
    double norm_epsilon = 1e-12;

    void validate() const;  // throws ConfigError
};

struct ReuseDecision {
    bool use_cache = false;
    double metric_value = 0.0;  // accumulated metric after this step's contribution
    int step = 0;
};

// Per-generation cache state. At most four tensors are retained at any time:
// prev_proxy, res_cond, res_uncond and y_in_current.
struct ReuseState {
    double accumulated_metric = 0.0;
    std::optional<Mat> prev_proxy;
    std::optional<TokenSequence> res_cond;
    std::optional<TokenSequence> res_uncond;
    std::optional<TokenSequence> y_in_current;
    std::vector<ReuseDecision> decisions;

    int retained_tensor_count() const;
    void reset_metric() { accumulated_metric = 0.0; }
};

// ||prev - curr||_1 / max(||curr||_1, eps) over all flattened entries.
double relative_l1(const Mat& prev, const Mat& curr, double eps);

// First reuse-eligible step boundary: reuse requires step > warmup_steps(...).
int warmup_steps(double warmup_fraction, int n_steps);

// Accumulates the proxy change into the metric (zero at step 1), stores the
// proxy for the next step, and decides. The comparison is strict: a metric
// exactly equal to the threshold computes.
ReuseDecision update_and_decide(ReuseState& state, const Mat& proxy, int step, int n_steps,
                                const ReuseConfig& cfg);

// y_in + res in token space; the caller unpatchifies. Absent arguments mean
// reuse was requested before the first computed step.
TokenSequence apply_cached(const std::optional<TokenSequence>& y_in,
                           const std::optional<TokenSequence>& res);

// res := y_out - y_in for both passes, then the metric resets to zero.
void store_residuals(ReuseState& state, const TokenSequence& y_in_cond,
                     const TokenSequence& y_out_cond, const TokenSequence& y_in_uncond,
                     const TokenSequence& y_out_uncond);

// Single-pass variant used by independent mode.
void store_residual(ReuseState& state, const TokenSequence& y_in, const TokenSequence& y_out,
                    Pass pass);

// Element counts of the retained tensors times bytes_per_scalar.
std::uint64_t memory_footprint(const ReuseState& state, int bytes_per_scalar);

// Replays a fixed sequence of per-step metric contributions through the
// decision rule with no feedback: decisions never reset the accumulator, so
// the reused set grows monotonically with the threshold. contributions[i]
// belongs to step i+1 and contributions[0] is ignored (step 1 contributes 0).
std::vector<bool> replay_decisions(const std::vector<double>& contributions, int n_steps,
                                   const ReuseConfig& cfg);

}  // namespace ditreuse
