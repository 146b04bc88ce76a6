#include "ditreuse/reuse.hpp"

#include <cmath>
#include <string>

namespace ditreuse {

std::string_view reuse_mode_name(ReuseMode m) {
    return m == ReuseMode::aligned ? "aligned" : "independent";
}

ReuseMode reuse_mode_from_name(std::string_view name) {
    if (name == "aligned") return ReuseMode::aligned;
    if (name == "independent") return ReuseMode::independent;
    throw ConfigError("unknown reuse mode: " + std::string(name));
}

void ReuseConfig::validate() const {
    if (threshold < 0.0 || std::isnan(threshold))
        throw ConfigError("reuse threshold must be >= 0");
    if (warmup_fraction < 0.0 || warmup_fraction >= 1.0)
        throw ConfigError("warmup_fraction must be in [0, 1)");
    if (norm_epsilon <= 0.0) throw ConfigError("norm_epsilon must be positive");
    const int t = static_cast<int>(proxy_tap);
    if (t < 0 || t >= kNumTaps) throw ConfigError("invalid proxy tap id");
}

int ReuseState::retained_tensor_count() const {
    return static_cast<int>(prev_proxy.has_value()) + static_cast<int>(res_cond.has_value()) +
           static_cast<int>(res_uncond.has_value()) + static_cast<int>(y_in_current.has_value());
}

double relative_l1(const Mat& prev, const Mat& curr, double eps) {
    if (!prev.same_shape(curr)) throw DimensionError("relative_l1: shape mismatch");
    const double num = l1_diff(prev.data, curr.data);
    const double den = std::max(l1_norm(curr.data), eps);
    return num / den;
}

int warmup_steps(double warmup_fraction, int n_steps) {
    // ceil(frac * n), with a small slack so exactly-integer products (e.g.
    // 0.2 * 50) are not pushed up by binary rounding of the fraction.
    const double p = warmup_fraction * n_steps;
    int w = static_cast<int>(std::ceil(p - 1e-9));
    if (w < 0) w = 0;
    if (w > n_steps) w = n_steps;
    return w;
}

ReuseDecision update_and_decide(ReuseState& state, const Mat& proxy, int step, int n_steps,
                                const ReuseConfig& cfg) {
    double contribution = 0.0;  // step 1 has no previous proxy
    if (state.prev_proxy) contribution = relative_l1(*state.prev_proxy, proxy, cfg.norm_epsilon);
    state.accumulated_metric += contribution;
    state.prev_proxy = proxy;

    ReuseDecision d;
    d.step = step;
    d.metric_value = state.accumulated_metric;
    d.use_cache = step > warmup_steps(cfg.warmup_fraction, n_steps) &&
                  state.accumulated_metric < cfg.threshold;
    state.decisions.push_back(d);
    return d;
}

TokenSequence apply_cached(const std::optional<TokenSequence>& y_in,
                           const std::optional<TokenSequence>& res) {
    if (!y_in || !res)
        throw InvalidStateError("apply_cached: cache is empty before the first computed step");
    if (!y_in->tokens.same_shape(res->tokens))
        throw DimensionError("apply_cached: shape mismatch");
    TokenSequence out;
    out.tokens = Mat(y_in->tokens.rows, y_in->tokens.cols);
    for (std::size_t i = 0; i < out.tokens.data.size(); ++i)
        out.tokens.data[i] = y_in->tokens.data[i] + res->tokens.data[i];
    out.role = TokenRole::y_out;
    return out;
}

namespace {

TokenSequence residual_of(const TokenSequence& y_in, const TokenSequence& y_out) {
    if (!y_in.tokens.same_shape(y_out.tokens))
        throw DimensionError("store_residuals: shape mismatch");
    TokenSequence res;
    res.tokens = Mat(y_in.tokens.rows, y_in.tokens.cols);
    for (std::size_t i = 0; i < res.tokens.data.size(); ++i)
        res.tokens.data[i] = y_out.tokens.data[i] - y_in.tokens.data[i];
    res.role = TokenRole::intermediate;
    return res;
}

}  // namespace

void store_residuals(ReuseState& state, const TokenSequence& y_in_cond,
                     const TokenSequence& y_out_cond, const TokenSequence& y_in_uncond,
                     const TokenSequence& y_out_uncond) {
    state.res_cond = residual_of(y_in_cond, y_out_cond);
    state.res_uncond = residual_of(y_in_uncond, y_out_uncond);
    state.reset_metric();
}

void store_residual(ReuseState& state, const TokenSequence& y_in, const TokenSequence& y_out,
                    Pass pass) {
    if (pass == Pass::cond)
        state.res_cond = residual_of(y_in, y_out);
    else
        state.res_uncond = residual_of(y_in, y_out);
    state.reset_metric();
}

std::uint64_t memory_footprint(const ReuseState& state, int bytes_per_scalar) {
    std::uint64_t elems = 0;
    if (state.prev_proxy) elems += state.prev_proxy->size();
    if (state.res_cond) elems += state.res_cond->tokens.size();
    if (state.res_uncond) elems += state.res_uncond->tokens.size();
    if (state.y_in_current) elems += state.y_in_current->tokens.size();
    return elems * static_cast<std::uint64_t>(bytes_per_scalar);
}

std::vector<bool> replay_decisions(const std::vector<double>& contributions, int n_steps,
                                   const ReuseConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(contributions.size()) != n_steps)
        throw ArgumentError("replay_decisions: need one contribution per step");
    const int warmup = warmup_steps(cfg.warmup_fraction, n_steps);
    std::vector<bool> reused(n_steps, false);
    double accumulated = 0.0;
    for (int step = 1; step <= n_steps; ++step) {
        if (step > 1) accumulated += contributions[step - 1];
        reused[step - 1] = step > warmup && accumulated < cfg.threshold;
    }
    return reused;
}

}  // namespace ditreuse
