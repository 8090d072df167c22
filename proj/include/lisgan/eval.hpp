#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "common.hpp"
#include "mixture.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace lisgan {

// ---------------------------------------------------------------------------
// Mode coverage
// ---------------------------------------------------------------------------

struct CoverageReport {
    int modes_total = 0;
    int modes_covered = 0;
    double hq_fraction = 0.0;               // share of samples within eps of any center
    double covered_threshold = 0.0;         // per-mode sample count needed for "covered"
    std::vector<std::int64_t> per_mode;     // samples within eps, attributed to nearest center
};

// A mode counts as covered when at least max(1, n/(10*modes)) samples lie
// within eps of its center; each in-range sample is attributed to its nearest
// center. Monotone nondecreasing in eps and invariant to sample order.
inline CoverageReport mode_coverage(const Tensor& samples, const MixtureSpec& spec, double eps) {
    spec.validate();
    if (!(eps > 0.0)) throw ConfigError("mode_coverage: eps must be > 0");
    if (samples.rank() != 2 || samples.dim(1) != spec.dim())
        throw ShapeError("mode_coverage: samples " + samples.shape_str() +
                         " do not match mixture dimension " + std::to_string(spec.dim()));
    int n = samples.dim(0), d = samples.dim(1);
    int C = static_cast<int>(spec.comps.size());
    CoverageReport rep;
    rep.modes_total = C;
    rep.per_mode.assign(static_cast<std::size_t>(C), 0);
    std::int64_t hq = 0;
    for (int i = 0; i < n; ++i) {
        double best = 1e300;
        int best_c = -1;
        for (int c = 0; c < C; ++c) {
            double dist2 = 0.0;
            for (int j = 0; j < d; ++j) {
                double diff = samples.at2(i, j) - spec.comps[static_cast<std::size_t>(c)].mean[static_cast<std::size_t>(j)];
                dist2 += diff * diff;
            }
            if (dist2 < best) {
                best = dist2;
                best_c = c;
            }
        }
        if (best_c >= 0 && std::sqrt(best) <= eps) {
            ++hq;
            ++rep.per_mode[static_cast<std::size_t>(best_c)];
        }
    }
    rep.hq_fraction = n > 0 ? static_cast<double>(hq) / n : 0.0;
    rep.covered_threshold = std::max(1.0, static_cast<double>(n) / (10.0 * C));
    for (int c = 0; c < C; ++c)
        if (static_cast<double>(rep.per_mode[static_cast<std::size_t>(c)]) >= rep.covered_threshold)
            ++rep.modes_covered;
    return rep;
}

// ---------------------------------------------------------------------------
// Displacement statistics
// ---------------------------------------------------------------------------

struct DisplacementStats {
    std::vector<double> mean_sq; // per module: mean over examples of per-example MSE vs original z
    std::vector<double> max_sq;  // per module: max over examples of the same quantity
};

inline DisplacementStats displacement_stats(const Tensor& z, const std::vector<Tensor>& z_primes) {
    if (z.rank() != 2) throw ShapeError("displacement_stats: expected (m,n_z) noise, got " + z.shape_str());
    DisplacementStats out;
    int m = z.dim(0), nz = z.dim(1);
    for (std::size_t k = 0; k < z_primes.size(); ++k) {
        const Tensor& zp = z_primes[k];
        if (!zp.same_shape(z))
            throw ShapeError("displacement_stats: module " + std::to_string(k + 1) + " shape " +
                             zp.shape_str() + " does not match " + z.shape_str());
        double mean = 0.0, mx = 0.0;
        for (int i = 0; i < m; ++i) {
            double acc = 0.0;
            for (int j = 0; j < nz; ++j) {
                double d = static_cast<double>(z.at2(i, j)) - zp.at2(i, j);
                acc += d * d;
            }
            acc /= nz;
            mean += acc;
            if (acc > mx) mx = acc;
        }
        out.mean_sq.push_back(mean / m);
        out.max_sq.push_back(mx);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Component histograms
// ---------------------------------------------------------------------------

struct ComponentHistogram {
    double lo = 0.0, hi = 0.0;            // shared range of both populations
    std::vector<double> density_before;   // per bin, integrates to 1
    std::vector<double> density_after;
};

// Density histograms per noise component over the pooled range of both
// populations. A degenerate (all-equal) range is widened by +-1e-6.
inline std::vector<ComponentHistogram> component_histograms(const Tensor& before, const Tensor& after,
                                                            int bins) {
    if (bins < 2) throw ConfigError("component_histograms: bins must be >= 2");
    if (!before.same_shape(after) || before.rank() != 2)
        throw ShapeError("component_histograms: populations must share an (n,d) shape, got " +
                         before.shape_str() + " vs " + after.shape_str());
    int n = before.dim(0), d = before.dim(1);
    if (n < 1) throw ConfigError("component_histograms: empty populations");
    std::vector<ComponentHistogram> out(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
        double lo = 1e300, hi = -1e300;
        for (int i = 0; i < n; ++i) {
            lo = std::min({lo, static_cast<double>(before.at2(i, j)), static_cast<double>(after.at2(i, j))});
            hi = std::max({hi, static_cast<double>(before.at2(i, j)), static_cast<double>(after.at2(i, j))});
        }
        if (!(hi > lo)) {
            lo -= 1e-6;
            hi += 1e-6;
        }
        ComponentHistogram& h = out[static_cast<std::size_t>(j)];
        h.lo = lo;
        h.hi = hi;
        h.density_before.assign(static_cast<std::size_t>(bins), 0.0);
        h.density_after.assign(static_cast<std::size_t>(bins), 0.0);
        double width = (hi - lo) / bins;
        auto bin_of = [&](double x) {
            int b = static_cast<int>((x - lo) / width);
            return std::clamp(b, 0, bins - 1);
        };
        for (int i = 0; i < n; ++i) {
            h.density_before[static_cast<std::size_t>(bin_of(before.at2(i, j)))] += 1.0;
            h.density_after[static_cast<std::size_t>(bin_of(after.at2(i, j)))] += 1.0;
        }
        for (int b = 0; b < bins; ++b) {
            h.density_before[static_cast<std::size_t>(b)] /= n * width;
            h.density_after[static_cast<std::size_t>(b)] /= n * width;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Interpolation and perturbation noise sets
// ---------------------------------------------------------------------------

// steps vectors linear in the index, endpoints included: t_i = i/(steps-1).
inline Tensor interpolate(const Tensor& z_a, const Tensor& z_b, int steps) {
    if (steps < 2) throw ConfigError("interpolate: steps must be >= 2");
    if (!z_a.same_shape(z_b) || z_a.rank() != 1)
        throw ShapeError("interpolate: endpoints must be equal-shape vectors, got " + z_a.shape_str() +
                         " vs " + z_b.shape_str());
    int d = z_a.dim(0);
    Tensor out({steps, d});
    for (int i = 0; i < steps; ++i) {
        float t = static_cast<float>(i) / static_cast<float>(steps - 1);
        for (int j = 0; j < d; ++j)
            out.at2(i, j) = (1.0f - t) * z_a[j] + t * z_b[j];
    }
    return out;
}

// count vectors z + scale*eta with eta ~ N(0, I).
inline Tensor perturb(const Tensor& z, int count, double scale, Rng& rng) {
    if (count < 1) throw ConfigError("perturb: count must be >= 1");
    if (scale < 0.0) throw ConfigError("perturb: scale must be >= 0");
    if (z.rank() != 1) throw ShapeError("perturb: expected a vector, got " + z.shape_str());
    int d = z.dim(0);
    Tensor out({count, d});
    for (int i = 0; i < count; ++i)
        for (int j = 0; j < d; ++j)
            out.at2(i, j) = z[j] + static_cast<float>(scale * rng.normal());
    return out;
}

// ---------------------------------------------------------------------------
// Inception score
// ---------------------------------------------------------------------------

struct InceptionScore {
    double mean = 0.0;
    double stddev = 0.0; // population std over splits
};

inline void validate_prob_matrix(const Tensor& p) {
    if (p.rank() != 2 || p.dim(0) < 1 || p.dim(1) < 1)
        throw ShapeError("inception_score: expected a nonempty (n,C) probability matrix, got " +
                         p.shape_str());
    for (int i = 0; i < p.dim(0); ++i) {
        double row = 0.0;
        for (int c = 0; c < p.dim(1); ++c) {
            if (p.at2(i, c) < 0.0f)
                throw NumericError("inception_score: negative probability in row " + std::to_string(i));
            row += p.at2(i, c);
        }
        if (std::abs(row - 1.0) > 1e-5)
            throw NumericError("inception_score: row " + std::to_string(i) + " sums to " +
                               std::to_string(row) + ", not 1");
    }
}

// exp(mean_i KL(p(y|x_i) || p(y))) per split, with p(y) the split's mean row;
// returns mean and population std over splits. Splits partition rows in
// order; the last split absorbs the remainder. Zero entries contribute
// exactly zero to KL (0*log 0 = 0); the 1e-12 floor only guards logs of the
// marginal.
inline InceptionScore inception_score(const Tensor& p, int splits = 10) {
    validate_prob_matrix(p);
    if (splits < 1) throw ConfigError("inception_score: splits must be >= 1");
    int n = p.dim(0), C = p.dim(1);
    if (splits > n) splits = n; // every split keeps at least one row
    std::vector<double> scores;
    int base = n / splits;
    int start = 0;
    for (int s = 0; s < splits; ++s) {
        int len = s == splits - 1 ? n - start : base;
        std::vector<double> marginal(static_cast<std::size_t>(C), 0.0);
        for (int i = start; i < start + len; ++i)
            for (int c = 0; c < C; ++c) marginal[static_cast<std::size_t>(c)] += p.at2(i, c);
        for (int c = 0; c < C; ++c) marginal[static_cast<std::size_t>(c)] /= len;
        double mean_kl = 0.0;
        for (int i = start; i < start + len; ++i) {
            double kl = 0.0;
            for (int c = 0; c < C; ++c) {
                double q = p.at2(i, c);
                if (q <= 0.0) continue; // 0 * log 0 = 0
                double m = std::max(marginal[static_cast<std::size_t>(c)], 1e-12);
                kl += q * (std::log(std::max(q, 1e-12)) - std::log(m));
            }
            mean_kl += kl;
        }
        mean_kl /= len;
        scores.push_back(std::exp(mean_kl));
        start += len;
    }
    InceptionScore out;
    for (double s : scores) out.mean += s;
    out.mean /= static_cast<double>(scores.size());
    double var = 0.0;
    for (double s : scores) var += (s - out.mean) * (s - out.mean);
    out.stddev = std::sqrt(var / static_cast<double>(scores.size()));
    return out;
}

} // namespace lisgan
