#include "ditreuse/spearman.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ditreuse {

RankVector rank(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n == 0) throw ArgumentError("rank: empty input");
    for (double v : values)
        if (!std::isfinite(v)) throw ArgumentError("rank: non-finite input");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });

    RankVector r;
    r.ranks.resize(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        // Positions i..j (0-based) share the value; average rank of 1-based positions.
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) r.ranks[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ArgumentError("spearman_rho: length mismatch");
    const std::size_t n = a.size();
    if (n < 2) throw ArgumentError("spearman_rho: need at least 2 samples");

    const RankVector ra = rank(a);
    const RankVector rb = rank(b);

    // Doubled ranks are integers, so every sum below is an exactly
    // representable integer for any realistic n.
    double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = 2.0 * ra.ranks[i];
        const double y = 2.0 * rb.ranks[i];
        sa += x;
        sb += y;
        saa += x * x;
        sbb += y * y;
        sab += x * y;
    }
    const double nn = static_cast<double>(n);
    const double var_a = nn * saa - sa * sa;
    const double var_b = nn * sbb - sb * sb;
    if (var_a == 0.0 || var_b == 0.0)
        throw UndefinedCorrelationError("spearman_rho: constant input vector");
    const double num = nn * sab - sa * sb;
    return num / std::sqrt(var_a * var_b);
}

}  // namespace ditreuse
