#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "checkpoint.hpp"
#include "common.hpp"
#include "config.hpp"
#include "image_io.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "mixture.hpp"
#include "network.hpp"
#include "optimizer.hpp"
#include "rng.hpp"
#include "schedules.hpp"
#include "tensor.hpp"

namespace lisgan {

// ---------------------------------------------------------------------------
// Data sources
// ---------------------------------------------------------------------------

// One interface over the two tasks: a synthetic 2-D mixture sampled on the
// fly, or a preloaded image corpus drawn with replacement. Both consume only
// the RNG handed to batch(), so batch order is a pure function of that stream.
struct Dataset {
    Task task = Task::ring;
    MixtureSpec mixture;
    ImageCorpus corpus;

    Tensor batch(int m, Rng& rng) const {
        return task == Task::ring ? sample_mixture(mixture, m, rng) : corpus_batch(corpus, m, rng);
    }
};

inline Dataset make_dataset(const TrainConfig& cfg) {
    Dataset d;
    d.task = cfg.task;
    if (cfg.task == Task::ring)
        d.mixture = MixtureSpec::ring(cfg.ring_modes, cfg.ring_radius, cfg.ring_sigma);
    else
        d.corpus = load_image_corpus(cfg.dataset_path, cfg.image_channels, cfg.image_size);
    return d;
}

// Prior draw, components filled row-major. normal: N(0,1); uniform: U(-1,1).
inline NoiseBatch sample_noise(Prior prior, int m, int n_z, Rng& rng) {
    if (m < 1 || n_z < 1) throw ConfigError("sample_noise: m and n_z must be >= 1");
    NoiseBatch nb;
    nb.values = Tensor({m, n_z});
    for (std::int64_t i = 0; i < nb.values.numel(); ++i)
        nb.values[i] = static_cast<float>(prior == Prior::normal ? rng.normal() : rng.uniform(-1.0, 1.0));
    nb.provenance = NoiseProvenance::prior_draw;
    return nb;
}

// ---------------------------------------------------------------------------
// Run state
// ---------------------------------------------------------------------------

// Everything a run owns. Four independent RNG streams keep concerns from
// perturbing each other: init (weight draws), noise (prior draws), data
// (batch order), schedule (module counts, iteration gating, dropout masks).
// Changing the logging cadence therefore cannot change the trained weights.
struct RunState {
    TrainConfig cfg;
    LambdaSchedule sched;

    Rng init_rng, noise_rng, data_rng, schedule_rng;
    Dataset data;

    NetworkParams g, d, r;
    bool has_d = false;
    bool has_r = false;
    OptimizerState g_opt, d_opt, r_opt;

    MetricsSink metrics;

    std::int64_t batch = 0;           // completed batches, 1-based after the first
    std::int64_t flagged_batches = 0; // batches where a rating had to be clamped
    std::int64_t rejected_steps = 0;  // optimizer steps skipped on non-finite grads
    std::string last_checkpoint;      // most recent file written by the caller's hook

    // Inputs of the newest completed batch, reused by the metrics emitters so
    // logging consumes no randomness.
    NoiseBatch cur_z;
    Tensor cur_x;
    double cur_r_loss = 0.0; // last descended reverser objective (regression run)
};

struct TrainHooks {
    // Called after every completed batch (metrics, if due, are already
    // appended). st.batch is the 1-based index just finished.
    std::function<void(RunState&)> after_batch;
};

namespace detail {

inline NetworkSpec generator_spec_for(const TrainConfig& cfg, int modules) {
    return cfg.task == Task::ring
               ? make_ring_generator_spec(cfg.n_z, modules)
               : make_image_generator_spec(cfg.n_z, modules, cfg.image_channels, cfg.image_size);
}

inline NetworkSpec discriminator_spec_for(const TrainConfig& cfg) {
    return cfg.task == Task::ring ? make_ring_discriminator_spec()
                                  : make_image_discriminator_spec(cfg.image_channels, cfg.image_size);
}

inline NetworkSpec reverser_spec_for(const TrainConfig& cfg) {
    return cfg.task == Task::ring
               ? make_ring_reverser_spec(cfg.n_z, cfg.r_dropout)
               : make_image_reverser_spec(cfg.n_z, cfg.image_channels, cfg.image_size, cfg.r_dropout);
}

} // namespace detail

// Builds networks and optimizer states for a validated config. Weight draws
// come from the init stream in a fixed order (G, then D, then R), so the
// whole state is a pure function of (config, seed). The regression-only
// reverser run loads its generator from cfg.generator_checkpoint instead and
// never touches the init stream for it.
inline RunState make_run_state(const TrainConfig& cfg, const std::string& metrics_path = "") {
    cfg.validate();
    RunState st;
    st.cfg = cfg;
    st.sched = LambdaSchedule(cfg.lambda_r);
    st.init_rng = Rng(cfg.seed, Stream::init);
    st.noise_rng = Rng(cfg.seed, Stream::noise);
    st.data_rng = Rng(cfg.seed, Stream::data);
    st.schedule_rng = Rng(cfg.seed, Stream::schedule);

    if (cfg.arch != Arch::r_separate) st.data = make_dataset(cfg);

    switch (cfg.arch) {
        case Arch::baseline:
            st.g = build_network(detail::generator_spec_for(cfg, 0), st.init_rng);
            st.d = build_network(detail::discriminator_spec_for(cfg), st.init_rng);
            st.has_d = true;
            break;
        case Arch::g_lis:
            st.g = build_network(detail::generator_spec_for(cfg, cfg.n_r), st.init_rng);
            st.d = build_network(detail::discriminator_spec_for(cfg), st.init_rng);
            st.has_d = true;
            break;
        case Arch::r_iterative:
            st.g = build_network(detail::generator_spec_for(cfg, 0), st.init_rng);
            st.d = build_network(detail::discriminator_spec_for(cfg), st.init_rng);
            st.r = build_network(detail::reverser_spec_for(cfg), st.init_rng);
            st.has_d = st.has_r = true;
            break;
        case Arch::r_separate: {
            st.g = load_checkpoint(cfg.generator_checkpoint);
            if (st.g.spec.role != Role::generator)
                throw ConfigError("generator_checkpoint holds a " +
                                  std::string(role_name(st.g.spec.role)) + " network");
            if (st.g.spec.n_z != cfg.n_z)
                throw ConfigError("generator_checkpoint has n_z=" + std::to_string(st.g.spec.n_z) +
                                  ", config says " + std::to_string(cfg.n_z));
            st.r = build_network(detail::reverser_spec_for(cfg), st.init_rng);
            st.has_r = true;
            Tensor probe({1, cfg.n_z});
            Tensor img = generator_forward(st.g, probe).out;
            std::vector<int> per(img.shape.begin() + 1, img.shape.end());
            if (per != st.r.spec.input)
                throw ConfigError("generator output shape (n," + Tensor::shape_string(per) +
                                  ") does not match the reverser input (n," +
                                  Tensor::shape_string(st.r.spec.input) + ")");
            break;
        }
    }

    if (cfg.arch != Arch::r_separate) st.g_opt = make_rmsprop(st.g.params());
    if (st.has_d) st.d_opt = make_rmsprop(st.d.params());
    if (st.has_r) st.r_opt = make_rmsprop(st.r.params());

    st.metrics.open(cfg.arch == Arch::r_separate ? reverser_metric_columns()
                                                 : adversarial_metric_columns(cfg.n_r),
                    metrics_path);
    return st;
}

// ---------------------------------------------------------------------------
// Update steps
// ---------------------------------------------------------------------------

namespace detail {

[[noreturn]] inline void abort_non_finite(const RunState& st, const char* what) {
    throw NumericError(std::string(what) + " became non-finite at batch " +
                       std::to_string(st.batch + 1) +
                       (st.last_checkpoint.empty()
                            ? "; no checkpoint has been written yet"
                            : "; last good checkpoint: " + st.last_checkpoint));
}

inline void check_loss(const RunState& st, const Tape& t, int loss, const char* what) {
    if (!is_finite(t.val(loss)[0])) abort_non_finite(st, what);
}

// One discriminator descent of d_loss on real x vs precomputed fakes.
inline void d_step(RunState& st, const Tensor& fakes, const Tensor& x, double lr, bool* clamp) {
    Tape t;
    int xr = t.leaf(x, false);
    int xf = t.leaf(fakes, false);
    int rr = discriminator_op(t, st.d, xr, true);
    int rf = discriminator_op(t, st.d, xf, true);
    int loss = d_loss_op(t, rr, rf);
    check_loss(st, t, loss, "discriminator loss");
    st.d.zero_grad();
    t.backward(loss);
    if (!rmsprop_step(st.d.params(), st.d_opt, lr)) ++st.rejected_steps;
    *clamp = *clamp || t.clamp_flagged;
}

// One generator descent of the adversarial loss on a fixed noise input,
// modules skipped. The discriminator passes gradient through but is frozen.
inline void g_step(RunState& st, const Tensor& z_in, double lr, bool* clamp) {
    Tape t;
    int z = t.leaf(z_in, false);
    GenSlots gs = generator_op(t, st.g, z, 0, true);
    int rf = discriminator_op(t, st.d, gs.out, false);
    int loss = g_loss_op(t, rf, st.cfg.g_loss_mode);
    check_loss(st, t, loss, "generator loss");
    st.g.zero_grad();
    t.backward(loss);
    if (!rmsprop_step(st.g.params(), st.g_opt, lr)) ++st.rejected_steps;
    *clamp = *clamp || t.clamp_flagged;
}

// Generator descent through the first k residual modules: adversarial term
// plus per-module similarity to the original prior draw, weighted by the
// lambda schedule. Both terms backpropagate through the whole executed stack.
inline void g_step_modules(RunState& st, const NoiseBatch& z, int k, double lr, bool* clamp) {
    Tape t;
    int zs = t.leaf(z.values, false);
    GenSlots gs = generator_op(t, st.g, zs, k, true);
    int rf = discriminator_op(t, st.d, gs.out, false);
    int adv = g_loss_op(t, rf, st.cfg.g_loss_mode);
    std::vector<int> sims;
    sims.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) sims.push_back(similarity_loss_op(t, z, gs.z_primes[static_cast<std::size_t>(i)]));
    int loss = g_lis_total_op(t, adv, sims, st.sched);
    check_loss(st, t, loss, "generator loss");
    st.g.zero_grad();
    t.backward(loss);
    if (!rmsprop_step(st.g.params(), st.g_opt, lr)) ++st.rejected_steps;
    *clamp = *clamp || t.clamp_flagged;
}

// Reverser descent of the blended iteration objective. The noise estimate is
// recomputed under training-mode dropout; generator and discriminator stay
// frozen but pass gradient through to it.
inline void r_step(RunState& st, const NoiseBatch& z0, const Tensor& prev_images, int t, double lr,
                   bool* clamp) {
    Tape tp;
    int xin = tp.leaf(prev_images, false);
    int zt = reverser_op(tp, st.r, xin, true, true, &st.schedule_rng);
    GenSlots gs = generator_op(tp, st.g, zt, 0, false);
    int rf = discriminator_op(tp, st.d, gs.out, false);
    int loss = reverser_loss_op(tp, z0, zt, rf, t, st.sched);
    check_loss(st, tp, loss, "reverser loss");
    st.r.zero_grad();
    tp.backward(loss);
    if (!rmsprop_step(st.r.params(), st.r_opt, lr)) ++st.rejected_steps;
    *clamp = *clamp || tp.clamp_flagged;
}

// ---------------------------------------------------------------------------
// Per-batch routines. Draw order is part of the replay contract:
//   baseline:     noise z, data x
//   modules:      noise z, schedule k, data x
//   iterative:    noise z, then per iteration: gate draw (if uncertain),
//                 data x + dropout masks when the iteration trains
//   regression:   noise z, dropout masks
// ---------------------------------------------------------------------------

inline void baseline_batch(RunState& st, double lr) {
    bool clamp = false;
    st.cur_z = sample_noise(st.cfg.prior, st.cfg.batch_size, st.cfg.n_z, st.noise_rng);
    Tensor fakes = generator_forward(st.g, st.cur_z.values, 0).out;
    st.cur_x = st.data.batch(st.cfg.batch_size, st.data_rng);
    d_step(st, fakes, st.cur_x, lr, &clamp);
    g_step(st, st.cur_z.values, lr, &clamp);
    if (clamp) ++st.flagged_batches;
}

inline void g_lis_batch(RunState& st, double lr) {
    bool clamp = false;
    st.cur_z = sample_noise(st.cfg.prior, st.cfg.batch_size, st.cfg.n_z, st.noise_rng);
    int k = sample_module_count(st.cfg.n_r, st.schedule_rng);
    Tensor fakes = generator_forward(st.g, st.cur_z.values, k).out;
    st.cur_x = st.data.batch(st.cfg.batch_size, st.data_rng);
    d_step(st, fakes, st.cur_x, lr, &clamp);
    g_step_modules(st, st.cur_z, k, lr, &clamp);
    if (clamp) ++st.flagged_batches;
}

// Iterations t = 0..n_r. The noise estimate advances every iteration
// (inference-mode reverser on the previous iteration's images); parameter
// updates happen only when the gate fires: discriminator on real vs this
// iteration's fakes, generator on this iteration's noise, and for t >= 1 the
// reverser against the batch's original draw. With n_r = 0 this is
// baseline_batch exactly, including stream consumption.
inline void r_iterative_batch(RunState& st, double lr) {
    const int n_r = st.cfg.n_r;
    bool clamp = false;
    st.cur_z = sample_noise(st.cfg.prior, st.cfg.batch_size, st.cfg.n_z, st.noise_rng);
    GatingChain chain;
    Tensor z_t = st.cur_z.values;
    Tensor images;
    for (int t = 0; t <= n_r; ++t) {
        if (t > 0) z_t = reverser_forward(st.r, images);
        Tensor prev_images = std::move(images);
        images = generator_forward(st.g, z_t, 0).out;
        if (!chain.step(t, n_r, st.schedule_rng)) continue;
        st.cur_x = st.data.batch(st.cfg.batch_size, st.data_rng);
        d_step(st, images, st.cur_x, lr, &clamp);
        g_step(st, z_t, lr, &clamp);
        if (t > 0) r_step(st, st.cur_z, prev_images, t, lr, &clamp);
    }
    if (clamp) ++st.flagged_batches;
}

// Pure regression of the reverser against a frozen generator: descend the
// half-squared recovery error of the original draw under training-mode
// dropout. No ratings are involved, so nothing can clamp.
inline void r_separate_batch(RunState& st, double lr) {
    st.cur_z = sample_noise(st.cfg.prior, st.cfg.batch_size, st.cfg.n_z, st.noise_rng);
    Tensor images = generator_forward(st.g, st.cur_z.values).out;
    Tape tp;
    int xin = tp.leaf(images, false);
    int zr = reverser_op(tp, st.r, xin, true, true, &st.schedule_rng);
    int loss = half_sq_loss_op(tp, st.cur_z, zr);
    check_loss(st, tp, loss, "reverser loss");
    st.cur_r_loss = static_cast<double>(tp.val(loss)[0]);
    st.r.zero_grad();
    tp.backward(loss);
    if (!rmsprop_step(st.r.params(), st.r_opt, lr)) ++st.rejected_steps;
}

// ---------------------------------------------------------------------------
// Metrics emission. Rows are inference-mode evaluations of the post-update
// networks on the freshest batch inputs; no RNG stream advances, so logging
// cadence cannot perturb training.
// ---------------------------------------------------------------------------

// Noise per refinement stage, stage 0 being the untouched draw. Stacked
// modules expose each residual output; the iterative trainer replays its
// reverser chain; the plain trainer has only stage 0.
inline std::vector<Tensor> stage_noises(RunState& st) {
    std::vector<Tensor> zs;
    zs.push_back(st.cur_z.values);
    if (st.cfg.arch == Arch::g_lis && st.cfg.n_r > 0) {
        GenResult full = generator_forward(st.g, st.cur_z.values, st.cfg.n_r);
        for (auto& zp : full.z_primes) zs.push_back(std::move(zp));
    } else if (st.cfg.arch == Arch::r_iterative) {
        for (int t = 1; t <= st.cfg.n_r; ++t) {
            Tensor img = generator_tail_forward(st.g, zs.back());
            zs.push_back(reverser_forward(st.r, img));
        }
    }
    return zs;
}

inline void emit_adversarial_metrics(RunState& st) {
    std::vector<Tensor> zs = stage_noises(st);
    std::vector<double> row;
    row.push_back(static_cast<double>(st.batch));
    row.push_back(d_loss_real(discriminator_forward(st.d, st.cur_x)));
    std::vector<Tensor> ratings;
    ratings.reserve(zs.size());
    for (const Tensor& z : zs)
        ratings.push_back(discriminator_forward(st.d, generator_tail_forward(st.g, z)));
    for (const Tensor& rt : ratings) row.push_back(d_loss_fake(rt));
    for (const Tensor& rt : ratings) row.push_back(g_loss(rt, st.cfg.g_loss_mode));
    for (std::size_t s = 1; s < zs.size(); ++s)
        row.push_back(similarity_loss(st.cur_z.values, zs[s]));
    st.metrics.append(row);
}

inline void emit_reverser_metrics(RunState& st) {
    Tensor images = generator_forward(st.g, st.cur_z.values).out;
    Tensor z_hat = reverser_forward(st.r, images);
    st.metrics.append({static_cast<double>(st.batch), st.cur_r_loss,
                       similarity_loss(st.cur_z, z_hat)});
}

} // namespace detail

// ---------------------------------------------------------------------------
// Run loop
// ---------------------------------------------------------------------------

inline void run_training(RunState& st, const TrainHooks& hooks = {}) {
    const std::int64_t total = st.cfg.total_batches();
    while (st.batch < total) {
        const std::int64_t b = st.batch + 1;
        const double lr = st.cfg.lr_at(b);
        switch (st.cfg.arch) {
            case Arch::baseline: detail::baseline_batch(st, lr); break;
            case Arch::g_lis: detail::g_lis_batch(st, lr); break;
            case Arch::r_iterative: detail::r_iterative_batch(st, lr); break;
            case Arch::r_separate: detail::r_separate_batch(st, lr); break;
        }
        st.batch = b;
        if (b % st.cfg.log_every == 0 || b == total) {
            if (st.cfg.arch == Arch::r_separate)
                detail::emit_reverser_metrics(st);
            else
                detail::emit_adversarial_metrics(st);
            st.metrics.flush();
        }
        if (hooks.after_batch) hooks.after_batch(st);
    }
    st.metrics.flush();
}

inline RunState train(const TrainConfig& cfg, const std::string& metrics_path = "",
                      const TrainHooks& hooks = {}) {
    RunState st = make_run_state(cfg, metrics_path);
    run_training(st, hooks);
    return st;
}

} // namespace lisgan
