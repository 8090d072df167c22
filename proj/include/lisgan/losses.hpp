#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "common.hpp"
#include "tape.hpp"
#include "tensor.hpp"

namespace lisgan {

// Decay of the similarity weight across stacked modules / iterations:
// weight(idx) = lambda^(1+idx) for zero-based idx. The first residual module
// of a stack gets lambda, the second lambda^2, and so on; iteration t of the
// iterative trainer gets lambda^(1+t).
struct LambdaSchedule {
    double lambda_r = 0.9;

    LambdaSchedule() = default;
    explicit LambdaSchedule(double l) : lambda_r(l) {
        if (!(l >= 0.0 && l <= 1.0))
            throw ConfigError("lambda_r must lie in [0,1], got " + std::to_string(l));
    }

    double weight(int zero_based_idx) const {
        if (zero_based_idx < 0) throw ConfigError("lambda schedule index must be >= 0");
        return std::pow(lambda_r, 1 + zero_based_idx);
    }

    // Weight of the one-based module i in a residual stack: lambda^i.
    double module_weight(int module_one_based) const { return weight(module_one_based - 1); }

    // Weight of the similarity term at iteration t of the iterative trainer.
    double iteration_weight(int t) const { return weight(t); }
};

enum class GLossMode { minimax, non_saturating };

namespace detail {

constexpr double kRatingEps = 1e-7;

inline double clamp_rating(double r, bool* flagged) {
    if (!(r >= 0.0 && r <= 1.0))
        throw NumericError("rating outside [0,1]: " + std::to_string(r));
    if (r < kRatingEps) {
        if (flagged) *flagged = true;
        return kRatingEps;
    }
    if (r > 1.0 - kRatingEps) {
        if (flagged) *flagged = true;
        return 1.0 - kRatingEps;
    }
    return r;
}

inline void require_nonempty(const Tensor& t, const char* what) {
    if (t.numel() == 0) throw ShapeError(std::string(what) + ": empty tensor");
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

} // namespace detail

// ---------------------------------------------------------------------------
// Plain (scalar) losses, double precision. These are the reference forms used
// for metrics and tests; tape heads below match them.
// ---------------------------------------------------------------------------

// -mean log r over real ratings.
inline double d_loss_real(const Tensor& r_real, bool* flagged = nullptr) {
    detail::require_nonempty(r_real, "d_loss_real");
    double acc = 0.0;
    for (std::int64_t i = 0; i < r_real.numel(); ++i)
        acc += std::log(detail::clamp_rating(r_real[i], flagged));
    return -acc / static_cast<double>(r_real.numel());
}

// -mean log(1 - r) over fake ratings.
inline double d_loss_fake(const Tensor& r_fake, bool* flagged = nullptr) {
    detail::require_nonempty(r_fake, "d_loss_fake");
    double acc = 0.0;
    for (std::int64_t i = 0; i < r_fake.numel(); ++i)
        acc += std::log(1.0 - detail::clamp_rating(r_fake[i], flagged));
    return -acc / static_cast<double>(r_fake.numel());
}

inline double d_loss(const Tensor& r_real, const Tensor& r_fake, bool* flagged = nullptr) {
    return d_loss_real(r_real, flagged) + d_loss_fake(r_fake, flagged);
}

// Generator adversarial loss. minimax: mean log(1-r) (descending it raises
// ratings); non_saturating: -mean log r. Both have negative derivative in r.
inline double g_loss(const Tensor& r_fake, GLossMode mode, bool* flagged = nullptr) {
    detail::require_nonempty(r_fake, "g_loss");
    double acc = 0.0;
    for (std::int64_t i = 0; i < r_fake.numel(); ++i) {
        double r = detail::clamp_rating(r_fake[i], flagged);
        acc += mode == GLossMode::minimax ? std::log(1.0 - r) : -std::log(r);
    }
    return acc / static_cast<double>(r_fake.numel());
}

// Mean squared displacement per noise component:
//   (1/m) sum_i (1/N_z) sum_j (z_ij - z'_ij)^2
inline double similarity_loss(const Tensor& z, const Tensor& z_prime) {
    detail::require_same_shape(z, z_prime, "similarity_loss");
    detail::require_nonempty(z, "similarity_loss");
    if (z.rank() != 2) throw ShapeError("similarity_loss: expected (m,n_z) tensors, got " + z.shape_str());
    int m = z.dim(0), nz = z.dim(1);
    double acc = 0.0;
    for (std::int64_t i = 0; i < z.numel(); ++i) {
        double d = static_cast<double>(z[i]) - z_prime[i];
        acc += d * d;
    }
    return acc / (static_cast<double>(m) * nz);
}

// Anchored variant: the reference side must be an untouched prior draw.
inline double similarity_loss(const NoiseBatch& anchor, const Tensor& z_prime) {
    if (anchor.provenance != NoiseProvenance::prior_draw)
        throw NumericError("similarity_loss: anchor must be a prior draw, got a derived batch");
    return similarity_loss(anchor.values, z_prime);
}

// Training form of the reverser regression term, as the update rules state it:
//   (1/m) sum_i sum_j 0.5*(z0_ij - z_ij)^2      (summed over components, no 1/N_z)
inline double half_sq_loss(const Tensor& z0, const Tensor& z) {
    detail::require_same_shape(z0, z, "half_sq_loss");
    detail::require_nonempty(z0, "half_sq_loss");
    if (z0.rank() != 2) throw ShapeError("half_sq_loss: expected (m,n_z) tensors, got " + z0.shape_str());
    int m = z0.dim(0);
    double acc = 0.0;
    for (std::int64_t i = 0; i < z0.numel(); ++i) {
        double d = static_cast<double>(z0[i]) - z[i];
        acc += 0.5 * d * d;
    }
    return acc / static_cast<double>(m);
}

// Iteration-t reverser objective: blend of the regression to the original
// noise and the adversarial term, weighted lambda^(1+t) vs 1-lambda^(1+t).
inline double reverser_loss(const NoiseBatch& z0, const Tensor& z_t, const Tensor& r_fake, int t,
                            const LambdaSchedule& sched, bool* flagged = nullptr) {
    if (z0.provenance != NoiseProvenance::prior_draw)
        throw NumericError("reverser_loss: z0 anchor must be a prior draw, got a derived batch");
    if (t < 1) throw ConfigError("reverser_loss: defined for iterations t >= 1, got " + std::to_string(t));
    double w = sched.iteration_weight(t);
    return w * half_sq_loss(z0.values, z_t) + (1.0 - w) * g_loss(r_fake, GLossMode::minimax, flagged);
}

// Stacked-module generator objective: adversarial part plus per-module
// similarity terms weighted lambda^i for the one-based module index i.
inline double g_lis_total_loss(double adversarial, const std::vector<double>& module_sims,
                               const LambdaSchedule& sched) {
    double acc = adversarial;
    for (std::size_t i = 0; i < module_sims.size(); ++i)
        acc += sched.module_weight(static_cast<int>(i) + 1) * module_sims[i];
    return acc;
}

// ---------------------------------------------------------------------------
// Tape heads. Each returns a scalar slot; gradients match the plain forms
// with the clamped rating in the denominator.
// ---------------------------------------------------------------------------

inline int d_loss_op(Tape& t, int rr, int rf) {
    const Tensor& rrv = t.val(rr);
    const Tensor& rfv = t.val(rf);
    bool fl = false;
    double v = d_loss(rrv, rfv, &fl);
    if (fl) t.clamp_flagged = true;
    Tensor out({1});
    out[0] = static_cast<float>(v);
    bool needs = t.needs_grad(rr) || t.needs_grad(rf);
    std::function<void(Tape&)> back;
    if (needs) {
        int id = t.next_id();
        back = [rr, rf, id](Tape& tp) {
            float g = tp.grad(id)[0];
            const Tensor& rrv = tp.val(rr);
            const Tensor& rfv = tp.val(rf);
            double mr = static_cast<double>(rrv.numel());
            double mf = static_cast<double>(rfv.numel());
            if (tp.needs_grad(rr)) {
                Tensor& grr = tp.grad(rr);
                for (std::int64_t i = 0; i < rrv.numel(); ++i) {
                    double r = detail::clamp_rating(rrv[i], nullptr);
                    grr[i] += static_cast<float>(-g / (mr * r));
                }
            }
            if (tp.needs_grad(rf)) {
                Tensor& grf = tp.grad(rf);
                for (std::int64_t i = 0; i < rfv.numel(); ++i) {
                    double r = detail::clamp_rating(rfv[i], nullptr);
                    grf[i] += static_cast<float>(g / (mf * (1.0 - r)));
                }
            }
        };
    }
    return t.push(std::move(out), needs, std::move(back));
}

inline int g_loss_op(Tape& t, int rf, GLossMode mode) {
    const Tensor& rfv = t.val(rf);
    bool fl = false;
    double v = g_loss(rfv, mode, &fl);
    if (fl) t.clamp_flagged = true;
    Tensor out({1});
    out[0] = static_cast<float>(v);
    bool needs = t.needs_grad(rf);
    std::function<void(Tape&)> back;
    if (needs) {
        int id = t.next_id();
        back = [rf, id, mode](Tape& tp) {
            float g = tp.grad(id)[0];
            const Tensor& rfv = tp.val(rf);
            double m = static_cast<double>(rfv.numel());
            Tensor& grf = tp.grad(rf);
            for (std::int64_t i = 0; i < rfv.numel(); ++i) {
                double r = detail::clamp_rating(rfv[i], nullptr);
                double d = mode == GLossMode::minimax ? -1.0 / (m * (1.0 - r)) : -1.0 / (m * r);
                grf[i] += static_cast<float>(g * d);
            }
        };
    }
    return t.push(std::move(out), needs, std::move(back));
}

inline int similarity_loss_op(Tape& t, const NoiseBatch& anchor, int zp) {
    if (anchor.provenance != NoiseProvenance::prior_draw)
        throw NumericError("similarity_loss: anchor must be a prior draw, got a derived batch");
    const Tensor& zpv = t.val(zp);
    double v = similarity_loss(anchor.values, zpv);
    Tensor out({1});
    out[0] = static_cast<float>(v);
    bool needs = t.needs_grad(zp);
    std::function<void(Tape&)> back;
    if (needs) {
        int id = t.next_id();
        Tensor z = anchor.values;
        back = [zp, id, z = std::move(z)](Tape& tp) {
            float g = tp.grad(id)[0];
            const Tensor& zpv = tp.val(zp);
            Tensor& gzp = tp.grad(zp);
            double scale = 2.0 / (static_cast<double>(z.dim(0)) * z.dim(1));
            for (std::int64_t i = 0; i < zpv.numel(); ++i)
                gzp[i] += static_cast<float>(g * scale * (static_cast<double>(zpv[i]) - z[i]));
        };
    }
    return t.push(std::move(out), needs, std::move(back));
}

inline int half_sq_loss_op(Tape& t, const NoiseBatch& z0, int zp) {
    if (z0.provenance != NoiseProvenance::prior_draw)
        throw NumericError("half_sq_loss: anchor must be a prior draw, got a derived batch");
    const Tensor& zpv = t.val(zp);
    double v = half_sq_loss(z0.values, zpv);
    Tensor out({1});
    out[0] = static_cast<float>(v);
    bool needs = t.needs_grad(zp);
    std::function<void(Tape&)> back;
    if (needs) {
        int id = t.next_id();
        Tensor z = z0.values;
        back = [zp, id, z = std::move(z)](Tape& tp) {
            float g = tp.grad(id)[0];
            const Tensor& zpv = tp.val(zp);
            Tensor& gzp = tp.grad(zp);
            double scale = 1.0 / static_cast<double>(z.dim(0));
            for (std::int64_t i = 0; i < zpv.numel(); ++i)
                gzp[i] += static_cast<float>(g * scale * (static_cast<double>(zpv[i]) - z[i]));
        };
    }
    return t.push(std::move(out), needs, std::move(back));
}

inline int reverser_loss_op(Tape& t, const NoiseBatch& z0, int zp, int rf, int iteration,
                            const LambdaSchedule& sched) {
    if (iteration < 1)
        throw ConfigError("reverser_loss: defined for iterations t >= 1, got " + std::to_string(iteration));
    double w = sched.iteration_weight(iteration);
    int sim = half_sq_loss_op(t, z0, zp);
    int adv = g_loss_op(t, rf, GLossMode::minimax);
    return weighted_sum_op(t, {{sim, w}, {adv, 1.0 - w}});
}

// adv + sum_i lambda^i * sim_i for one-based module index i.
inline int g_lis_total_op(Tape& t, int adv, const std::vector<int>& module_sims,
                          const LambdaSchedule& sched) {
    std::vector<std::pair<int, double>> terms;
    terms.emplace_back(adv, 1.0);
    for (std::size_t i = 0; i < module_sims.size(); ++i)
        terms.emplace_back(module_sims[i], sched.module_weight(static_cast<int>(i) + 1));
    return weighted_sum_op(t, terms);
}

} // namespace lisgan
