#pragma once

#include <cmath>
#include <vector>

#include "common.hpp"
#include "tape.hpp"
#include "tensor.hpp"

namespace lisgan {

struct RmspropConfig {
    double rho = 0.9;
    double eps = 1e-8;
};

// One squared-gradient accumulator per parameter tensor, zero-initialized.
struct OptimizerState {
    RmspropConfig cfg;
    std::vector<Tensor> acc;
};

inline OptimizerState make_rmsprop(const std::vector<Param*>& params, RmspropConfig cfg = {}) {
    if (cfg.rho < 0.0 || cfg.rho >= 1.0)
        throw ConfigError("rmsprop: rho must lie in [0,1), got " + std::to_string(cfg.rho));
    if (cfg.eps <= 0.0) throw ConfigError("rmsprop: eps must be positive");
    OptimizerState st;
    st.cfg = cfg;
    st.acc.reserve(params.size());
    for (Param* p : params) st.acc.emplace_back(p->value.shape);
    return st;
}

//   acc <- rho*acc + (1-rho)*g^2
//   p   <- p - lr * g / (sqrt(acc) + eps)
// Returns false and leaves parameters AND accumulators untouched if any
// gradient entry is non-finite; callers count such batches as flagged.
inline bool rmsprop_step(const std::vector<Param*>& params, OptimizerState& st, double lr) {
    if (!(lr > 0.0)) throw ConfigError("rmsprop: learning rate must be positive, got " + std::to_string(lr));
    if (params.size() != st.acc.size())
        throw ConfigError("rmsprop: state tracks " + std::to_string(st.acc.size()) +
                          " tensors but step got " + std::to_string(params.size()));
    for (Param* p : params)
        if (!p->grad.all_finite()) return false;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Param& p = *params[k];
        Tensor& acc = st.acc[k];
        for (std::int64_t i = 0; i < p.value.numel(); ++i) {
            double g = p.grad[i];
            double a = st.cfg.rho * acc[i] + (1.0 - st.cfg.rho) * g * g;
            acc[i] = static_cast<float>(a);
            p.value[i] = static_cast<float>(p.value[i] - lr * g / (std::sqrt(a) + st.cfg.eps));
        }
    }
    return true;
}

} // namespace lisgan
