#include "ditreuse/selection.hpp"

#include <cmath>
#include <string>

#include "ditreuse/reuse.hpp"
#include "ditreuse/spearman.hpp"

namespace ditreuse {

namespace {

constexpr double kWarmupFraction = 0.2;

}  // namespace

SelectionReport select_proxy(const std::vector<std::vector<StepTrace>>& traces,
                             bool exclude_warmup) {
    if (traces.empty()) throw ArgumentError("select_proxy: no traces");

    SelectionReport report;
    report.prompt_count = static_cast<int>(traces.size());
    report.exclude_warmup = exclude_warmup;

    std::array<std::vector<double>, kNumTaps> rhos;
    for (const std::vector<StepTrace>& trace : traces) {
        const int n_steps = static_cast<int>(trace.size());
        const int first_step =
            exclude_warmup ? std::max(2, warmup_steps(kWarmupFraction, n_steps) + 1) : 2;

        std::vector<double> oracle;
        std::array<std::vector<double>, kNumTaps> metrics;
        for (const StepTrace& t : trace) {
            if (t.step < first_step) continue;
            if (!t.oracle) throw ArgumentError("select_proxy: missing oracle at step " +
                                               std::to_string(t.step));
            oracle.push_back(*t.oracle);
            for (int k = 0; k < kNumTaps; ++k) {
                if (!t.candidate_metrics[k])
                    throw ArgumentError("select_proxy: missing candidate metric at step " +
                                        std::to_string(t.step));
                metrics[k].push_back(*t.candidate_metrics[k]);
            }
        }
        if (oracle.size() < 3)
            throw ArgumentError("select_proxy: fewer than 3 usable steps in a trace");

        for (int k = 0; k < kNumTaps; ++k) {
            try {
                rhos[k].push_back(spearman_rho(oracle, metrics[k]));
            } catch (const UndefinedCorrelationError&) {
                ++report.degenerate_pairs;
            }
        }
    }

    bool any = false;
    for (int k = 0; k < kNumTaps; ++k) {
        TapStats& s = report.per_tap[k];
        s.prompts_used = static_cast<int>(rhos[k].size());
        if (s.prompts_used == 0) {
            s.mean_rho = std::nan("");
            s.std_rho = std::nan("");
            continue;
        }
        double sum = 0.0;
        for (double r : rhos[k]) sum += r;
        s.mean_rho = sum / s.prompts_used;
        if (s.prompts_used >= 2) {
            double ss = 0.0;
            for (double r : rhos[k]) ss += (r - s.mean_rho) * (r - s.mean_rho);
            s.std_rho = std::sqrt(ss / (s.prompts_used - 1));
        } else {
            s.std_rho = 0.0;
        }
        if (!any || s.mean_rho > report.per_tap[static_cast<int>(report.selected)].mean_rho) {
            report.selected = static_cast<TapId>(k);
            any = true;
        }
    }
    if (!any) throw ArgumentError("select_proxy: every (prompt, tap) pair was degenerate");
    return report;
}

}  // namespace ditreuse
