#pragma once

#include <cmath>
#include <vector>

#include "common.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace lisgan {

// Isotropic Gaussian mixture over R^d; the desk-scale stand-in for the data
// distribution in the 2-D experiments.
struct MixtureComponent {
    std::vector<double> mean;
    double sigma = 1.0;
    double weight = 1.0;
};

struct MixtureSpec {
    std::vector<MixtureComponent> comps;

    int dim() const { return comps.empty() ? 0 : static_cast<int>(comps[0].mean.size()); }

    void validate() const {
        if (comps.empty()) throw ConfigError("mixture: at least one mode required");
        double wsum = 0.0;
        for (const auto& c : comps) {
            if (c.mean.size() != comps[0].mean.size())
                throw ConfigError("mixture: all mode centers must share a dimension");
            if (c.sigma < 0.0) throw ConfigError("mixture: sigma must be >= 0");
            if (c.weight < 0.0) throw ConfigError("mixture: weights must be >= 0");
            wsum += c.weight;
        }
        if (!(wsum > 0.0)) throw ConfigError("mixture: weights must not all be zero");
    }

    // `modes` equally weighted modes on a circle of the given radius,
    // starting at angle 0.
    static MixtureSpec ring(int modes, double radius, double sigma) {
        if (modes < 1) throw ConfigError("mixture ring: at least one mode required");
        MixtureSpec s;
        for (int k = 0; k < modes; ++k) {
            double ang = 2.0 * 3.14159265358979323846 * k / modes;
            MixtureComponent c;
            c.mean = {radius * std::cos(ang), radius * std::sin(ang)};
            c.sigma = sigma;
            c.weight = 1.0 / modes;
            s.comps.push_back(std::move(c));
        }
        return s;
    }
};

// n i.i.d. draws, shape {n, dim}. Per sample: one uniform for the component
// pick, then dim normals; the draw order is part of the determinism contract.
inline Tensor sample_mixture(const MixtureSpec& spec, int n, Rng& rng) {
    spec.validate();
    if (n < 1) throw ConfigError("sample_mixture: n must be >= 1");
    int d = spec.dim();
    double wsum = 0.0;
    for (const auto& c : spec.comps) wsum += c.weight;
    Tensor out({n, d});
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform01() * wsum;
        std::size_t pick = 0;
        double acc = 0.0;
        for (std::size_t c = 0; c < spec.comps.size(); ++c) {
            acc += spec.comps[c].weight;
            if (u < acc) {
                pick = c;
                break;
            }
            pick = c;
        }
        const auto& comp = spec.comps[pick];
        for (int j = 0; j < d; ++j)
            out.at2(i, j) = static_cast<float>(comp.mean[static_cast<std::size_t>(j)] +
                                               comp.sigma * rng.normal());
    }
    return out;
}

// Posterior P(component | x) rows for each sample; the ground-truth
// class-probability source for the 2-D task's score evaluation. Rows sum
// to 1. Computed in the log domain for stability.
inline Tensor mixture_responsibilities(const MixtureSpec& spec, const Tensor& samples) {
    spec.validate();
    if (samples.rank() != 2 || samples.dim(1) != spec.dim())
        throw ShapeError("mixture responsibilities: samples " + samples.shape_str() +
                         " do not match mixture dimension " + std::to_string(spec.dim()));
    for (const auto& c : spec.comps)
        if (!(c.sigma > 0.0))
            throw ConfigError("mixture responsibilities: requires sigma > 0 for every mode");
    int n = samples.dim(0), d = samples.dim(1);
    int C = static_cast<int>(spec.comps.size());
    Tensor out({n, C});
    std::vector<double> logp(static_cast<std::size_t>(C));
    for (int i = 0; i < n; ++i) {
        double mx = -1e300;
        for (int c = 0; c < C; ++c) {
            const auto& comp = spec.comps[static_cast<std::size_t>(c)];
            double dist2 = 0.0;
            for (int j = 0; j < d; ++j) {
                double diff = samples.at2(i, j) - comp.mean[static_cast<std::size_t>(j)];
                dist2 += diff * diff;
            }
            double lp = std::log(comp.weight) - dist2 / (2.0 * comp.sigma * comp.sigma) -
                        d * std::log(comp.sigma);
            logp[static_cast<std::size_t>(c)] = lp;
            if (lp > mx) mx = lp;
        }
        double denom = 0.0;
        for (int c = 0; c < C; ++c) denom += std::exp(logp[static_cast<std::size_t>(c)] - mx);
        for (int c = 0; c < C; ++c)
            out.at2(i, c) = static_cast<float>(std::exp(logp[static_cast<std::size_t>(c)] - mx) / denom);
    }
    return out;
}

} // namespace lisgan
