#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ditreuse/selection.hpp"
#include "ditreuse/spearman.hpp"

using namespace ditreuse;

namespace {

// Builds a trace whose oracle follows `oracle` (steps 2..n) and whose tap
// metrics are produced by per-tap generators.
std::vector<StepTrace> synthetic_trace(const std::vector<double>& oracle,
                                       const std::array<std::vector<double>, kNumTaps>& metrics) {
    const int n = static_cast<int>(oracle.size()) + 1;
    std::vector<StepTrace> trace(n);
    for (int s = 1; s <= n; ++s) {
        trace[s - 1].step = s;
        for (int k = 0; k < kNumTaps; ++k) trace[s - 1].proxy_l1[k] = 1.0;
        if (s >= 2) {
            trace[s - 1].oracle = oracle[s - 2];
            trace[s - 1].residual_l1 = oracle[s - 2];
            for (int k = 0; k < kNumTaps; ++k)
                trace[s - 1].candidate_metrics[k] = metrics[k][s - 2];
        }
    }
    return trace;
}

std::vector<double> noisy_sequence(std::mt19937& rng, int n) {
    std::uniform_real_distribution<double> dist(0.01, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

}  // namespace

TEST_CASE("a tap that is an increasing transform of the oracle wins with rho 1") {
    std::mt19937 rng(1);
    const int usable = 19;  // steps 2..20
    const std::vector<double> oracle = noisy_sequence(rng, usable);

    std::array<std::vector<double>, kNumTaps> metrics;
    for (int k = 0; k < kNumTaps; ++k) metrics[k] = noisy_sequence(rng, usable);
    const int winner = static_cast<int>(TapId::cross_attn_out);
    metrics[winner].clear();
    for (double o : oracle) metrics[winner].push_back(2.0 * o + 0.5);  // increasing transform

    const std::vector<std::vector<StepTrace>> traces = {synthetic_trace(oracle, metrics),
                                                        synthetic_trace(oracle, metrics)};
    const SelectionReport report = select_proxy(traces, /*exclude_warmup=*/false);
    CHECK(report.selected == TapId::cross_attn_out);
    CHECK(report.per_tap[winner].mean_rho == 1.0);
    CHECK(report.per_tap[winner].std_rho == 0.0);
    CHECK(report.prompt_count == 2);
}

TEST_CASE("a reverse-ordered tap scores rho -1 and is never selected") {
    std::mt19937 rng(2);
    const int usable = 15;
    const std::vector<double> oracle = noisy_sequence(rng, usable);

    std::array<std::vector<double>, kNumTaps> metrics;
    for (int k = 0; k < kNumTaps; ++k) metrics[k] = noisy_sequence(rng, usable);
    const int loser = static_cast<int>(TapId::attn_in);
    metrics[loser].clear();
    for (double o : oracle) metrics[loser].push_back(-o);  // reversed ordering

    const SelectionReport report =
        select_proxy({synthetic_trace(oracle, metrics)}, /*exclude_warmup=*/false);
    CHECK(report.per_tap[loser].mean_rho == -1.0);
    CHECK(report.selected != TapId::attn_in);
}

TEST_CASE("warmup exclusion raises rho for a tap corrupted early") {
    // Oracle over steps 2..20; the tap tracks it exactly except during the
    // first 20% of steps, where it is anti-correlated.
    const int n_steps = 20;
    const int warmup = 4;  // ceil(0.2 * 20)
    std::vector<double> oracle;
    for (int s = 2; s <= n_steps; ++s) oracle.push_back(0.1 * s);

    std::array<std::vector<double>, kNumTaps> metrics;
    for (int k = 0; k < kNumTaps; ++k) metrics[k] = oracle;
    const int tap = static_cast<int>(TapId::mlp_out);
    for (int s = 2; s <= n_steps; ++s) {
        if (s <= warmup) metrics[tap][s - 2] = 100.0 - 0.1 * s;  // wrong order early
    }

    const std::vector<std::vector<StepTrace>> traces = {synthetic_trace(oracle, metrics)};
    const SelectionReport with = select_proxy(traces, /*exclude_warmup=*/true);
    const SelectionReport without = select_proxy(traces, /*exclude_warmup=*/false);
    CHECK(with.per_tap[tap].mean_rho == 1.0);
    CHECK(without.per_tap[tap].mean_rho < with.per_tap[tap].mean_rho);
    CHECK(with.exclude_warmup);
    CHECK_FALSE(without.exclude_warmup);
}

TEST_CASE("degenerate constant sequences are dropped with a warning count") {
    std::mt19937 rng(3);
    const int usable = 12;
    const std::vector<double> oracle = noisy_sequence(rng, usable);
    std::array<std::vector<double>, kNumTaps> metrics;
    for (int k = 0; k < kNumTaps; ++k) metrics[k] = noisy_sequence(rng, usable);
    metrics[0].assign(usable, 0.5);  // constant: undefined correlation

    const SelectionReport report =
        select_proxy({synthetic_trace(oracle, metrics)}, /*exclude_warmup=*/false);
    CHECK(report.degenerate_pairs == 1);
    CHECK(report.per_tap[0].prompts_used == 0);
    CHECK(std::isnan(report.per_tap[0].mean_rho));
    CHECK(report.selected != TapId::block_in);
}

TEST_CASE("ties break toward the lowest tap index") {
    std::mt19937 rng(4);
    const int usable = 10;
    const std::vector<double> oracle = noisy_sequence(rng, usable);
    std::array<std::vector<double>, kNumTaps> metrics;
    for (int k = 0; k < kNumTaps; ++k) metrics[k] = oracle;  // every tap ties at rho 1

    const SelectionReport report =
        select_proxy({synthetic_trace(oracle, metrics)}, /*exclude_warmup=*/false);
    CHECK(report.selected == TapId::block_in);
}

TEST_CASE("selection is invariant under positive rescaling of the metrics") {
    std::mt19937 rng(5);
    const int usable = 16;
    const std::vector<double> oracle = noisy_sequence(rng, usable);
    std::array<std::vector<double>, kNumTaps> metrics;
    for (int k = 0; k < kNumTaps; ++k) metrics[k] = noisy_sequence(rng, usable);

    const SelectionReport base = select_proxy({synthetic_trace(oracle, metrics)}, false);
    std::array<std::vector<double>, kNumTaps> scaled = metrics;
    for (int k = 0; k < kNumTaps; ++k)
        for (double& v : scaled[k]) v *= 1000.0;
    const SelectionReport after = select_proxy({synthetic_trace(oracle, scaled)}, false);
    CHECK(base.selected == after.selected);
    for (int k = 0; k < kNumTaps; ++k)
        CHECK(base.per_tap[k].mean_rho == doctest::Approx(after.per_tap[k].mean_rho));
}

TEST_CASE("select_proxy validates its input") {
    CHECK_THROWS_AS(select_proxy({}, false), ArgumentError);

    // Two usable steps only: below the minimum of three.
    std::vector<double> oracle = {0.1, 0.2};
    std::array<std::vector<double>, kNumTaps> metrics;
    for (int k = 0; k < kNumTaps; ++k) metrics[k] = oracle;
    CHECK_THROWS_AS(select_proxy({synthetic_trace(oracle, metrics)}, false), ArgumentError);
}

TEST_CASE("statistics aggregate across prompts") {
    // Tap rho is +1 on one prompt and -1 on another: mean 0, sample std sqrt(2).
    std::vector<double> oracle = {0.1, 0.2, 0.3, 0.4};
    std::array<std::vector<double>, kNumTaps> aligned, reversed;
    for (int k = 0; k < kNumTaps; ++k) {
        aligned[k] = oracle;
        reversed[k] = {0.4, 0.3, 0.2, 0.1};
    }
    const SelectionReport report = select_proxy(
        {synthetic_trace(oracle, aligned), synthetic_trace(oracle, reversed)}, false);
    for (int k = 0; k < kNumTaps; ++k) {
        CHECK(report.per_tap[k].mean_rho == doctest::Approx(0.0));
        CHECK(report.per_tap[k].std_rho == doctest::Approx(std::sqrt(2.0)));
        CHECK(report.per_tap[k].prompts_used == 2);
    }
}
