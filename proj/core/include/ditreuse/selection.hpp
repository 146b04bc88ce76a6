#pragma once

#include <array>
#include <vector>

#include "ditreuse/trace.hpp"

namespace ditreuse {

struct TapStats {
    double mean_rho = 0.0;
    double std_rho = 0.0;   // sample standard deviation across prompts (0 for a single prompt)
    int prompts_used = 0;   // prompts that yielded a defined correlation
};

struct SelectionReport {
    std::array<TapStats, kNumTaps> per_tap{};
    TapId selected = TapId::block_in;
    int prompt_count = 0;
    bool exclude_warmup = false;
    int degenerate_pairs = 0;  // (prompt, tap) pairs dropped for constant sequences
};

// For each prompt and tap, Spearman's rho between the oracle sequence and the
// tap's per-step metric sequence over steps 2..n, dropping the first 20% of
// steps when exclude_warmup is set. The selected tap maximizes the mean rho
// across prompts; ties break toward the lowest tap index.
SelectionReport select_proxy(const std::vector<std::vector<StepTrace>>& traces,
                             bool exclude_warmup);

}  // namespace ditreuse
