#include "ditreuse/trace.hpp"

#include "ditreuse/sampler.hpp"

namespace ditreuse {

double oracle_value(const TokenSequence& res_curr, const TokenSequence& res_prev, double eps) {
    if (!res_curr.tokens.same_shape(res_prev.tokens))
        throw DimensionError("oracle_value: shape mismatch");
    const double num = l1_diff(res_curr.tokens.data, res_prev.tokens.data);
    const double den = std::max(l1_norm(res_curr.tokens.data), eps);
    return num / den;
}

std::vector<StepTrace> record_trace(std::uint64_t prompt_id, const DiTWeights& model,
                                    const SchedulerConfig& sched) {
    GenerateOptions options;
    options.record_trace = true;
    return generate(prompt_id, model, sched, std::nullopt, options).traces;
}

}  // namespace ditreuse
