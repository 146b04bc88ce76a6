#pragma once

#include <span>
#include <vector>

#include "ditreuse/errors.hpp"

namespace ditreuse {

// Ascending ranks starting at 1; tied values receive the average of the
// positions they occupy, so the ranks always sum to n(n+1)/2.
struct RankVector {
    std::vector<double> ranks;
};

RankVector rank(std::span<const double> values);  // throws ArgumentError on empty input

// Pearson correlation of the rank vectors. With no ties this equals the
// closed form 1 - 6*sum(d^2) / (n(n^2-1)) exactly: ranks are scaled to
// integers and all sums stay below 2^53, so only the final division rounds.
double spearman_rho(std::span<const double> a, std::span<const double> b);

}  // namespace ditreuse
