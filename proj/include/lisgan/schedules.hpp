#pragma once

#include <vector>

#include "common.hpp"
#include "rng.hpp"

namespace lisgan {

// Stochastic schedules of the two stacked-refinement trainers. Both are pure
// functions of an RNG so they can be simulated in bulk without networks, and
// the trainers call exactly these functions, in the same order.

// Module-count sampler for the stacked-module generator: walk modules
// i = 1..n_r and stop before module i with independent probability
// 0.5^(n_r-(i-1)); if no stop fires, all n_r modules run. n_r = 0 draws
// nothing and returns 0.
inline int sample_module_count(int n_r, Rng& rng) {
    if (n_r < 0) throw ConfigError("module-count sampler: n_r must be >= 0");
    for (int i = 1; i <= n_r; ++i) {
        double stop_p = std::pow(0.5, n_r - (i - 1));
        if (rng.uniform01() < stop_p) return i - 1;
    }
    return n_r;
}

// Analytic P(k) for k = 0..n_r under the sampler above.
inline std::vector<double> module_count_distribution(int n_r) {
    if (n_r < 0) throw ConfigError("module-count distribution: n_r must be >= 0");
    std::vector<double> p(static_cast<std::size_t>(n_r) + 1, 0.0);
    double alive = 1.0;
    for (int i = 1; i <= n_r; ++i) {
        double stop_p = std::pow(0.5, n_r - (i - 1));
        p[static_cast<std::size_t>(i - 1)] = alive * stop_p;
        alive *= 1.0 - stop_p;
    }
    p[static_cast<std::size_t>(n_r)] = alive;
    return p;
}

// Iteration gating of the iterative trainer: iteration t trains with
// probability 1 if the previous iteration trained, else (1+t)/(1+n_r).
// The coin flip is skipped entirely when p >= 1, so configurations whose
// gate is certain consume no schedule randomness.
struct GatingChain {
    bool prev_trained = false;

    bool step(int t, int n_r, Rng& rng) {
        double p = prev_trained ? 1.0 : static_cast<double>(1 + t) / (1 + n_r);
        bool train = p >= 1.0 ? true : rng.uniform01() < p;
        prev_trained = train;
        return train;
    }

    static double probability(int t, int n_r, bool prev_trained) {
        return prev_trained ? 1.0 : static_cast<double>(1 + t) / (1 + n_r);
    }
};

// Number of trained iterations in one batch (t = 0..n_r), with the same
// decision sequence the trainer makes.
inline int simulate_batch_updates(int n_r, Rng& rng) {
    GatingChain chain;
    int updates = 0;
    for (int t = 0; t <= n_r; ++t)
        if (chain.step(t, n_r, rng)) ++updates;
    return updates;
}

// Analytic mean of simulate_batch_updates: E = sum_t P(train at t), where
// P(train at t) = P(prev) + (1-P(prev)) * (1+t)/(1+n_r).
inline double expected_updates_per_batch(int n_r) {
    double p_prev = 0.0;
    double total = 0.0;
    for (int t = 0; t <= n_r; ++t) {
        double p = p_prev + (1.0 - p_prev) * static_cast<double>(1 + t) / (1 + n_r);
        total += p;
        p_prev = p;
    }
    return total;
}

} // namespace lisgan
