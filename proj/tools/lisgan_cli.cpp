// Command-line front end: train / generate / interpolate / perturb / eval /
// hist. Exit codes: 0 success, 1 config error, 2 numeric failure, 3 IO or
// format error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <lisgan/lisgan.hpp>

namespace fs = std::filesystem;
using namespace lisgan;

namespace {

std::string pad_batch(std::int64_t b, std::int64_t total) {
    std::string digits = std::to_string(total);
    std::string s = std::to_string(b);
    if (s.size() < digits.size()) s.insert(0, digits.size() - s.size(), '0');
    return s;
}

void write_csv_file(const std::string& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << csv_join(header);
    for (const auto& r : rows) f << csv_join(r);
    if (!f) throw IoError("write failed: " + path);
}

// Noise matrix dump, one row per vector, columns z0..z{d-1}.
void write_noise_csv(const std::string& path, const Tensor& z) {
    std::vector<std::string> header;
    for (int j = 0; j < z.dim(1); ++j) header.push_back("z" + std::to_string(j));
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < z.dim(0); ++i) {
        std::vector<std::string> r;
        for (int j = 0; j < z.dim(1); ++j) r.push_back(format_float(z.at2(i, j)));
        rows.push_back(std::move(r));
    }
    write_csv_file(path, header, rows);
}

Tensor read_noise_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    if (t.header.empty() || t.rows.empty()) throw IoError(path + ": empty noise dump");
    int d = static_cast<int>(t.header.size());
    int n = static_cast<int>(t.rows.size());
    Tensor out({n, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out.at2(i, j) = static_cast<float>(t.number(i, j));
    return out;
}

// Sample writers. A generator either emits 2-D points (rank-2 output, CSV
// rows) or images (rank-4 output, one PNM per sample).
bool is_point_output(const Tensor& batch_out) { return batch_out.rank() == 2; }

Tensor slice_image(const Tensor& batch, int i) {
    int c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
    Tensor img({c, h, w});
    std::size_t per = static_cast<std::size_t>(c) * h * w;
    std::copy(batch.v.begin() + static_cast<std::ptrdiff_t>(per * static_cast<std::size_t>(i)),
              batch.v.begin() + static_cast<std::ptrdiff_t>(per * (static_cast<std::size_t>(i) + 1)),
              img.v.begin());
    return img;
}

std::string image_ext(const Tensor& batch) { return batch.dim(1) == 3 ? ".ppm" : ".pgm"; }

std::string pad_index(int i, int count) {
    std::string digits = std::to_string(count > 0 ? count - 1 : 0);
    std::string s = std::to_string(i);
    if (s.size() < digits.size()) s.insert(0, digits.size() - s.size(), '0');
    return s;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string config_path;
    std::string out_dir; // overrides config when nonempty
};

int cmd_train(const TrainArgs& a) {
    TrainConfig cfg = load_train_config(a.config_path);
    if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
    fs::create_directories(cfg.out_dir);

    const std::int64_t total = cfg.total_batches();
    const std::int64_t cadence = cfg.checkpoint_cadence();

    auto role_file = [&](const NetworkParams&, const char* prefix, const std::string& tag) {
        return cfg.out_dir + "/" + prefix + "_" + tag + ".lisc";
    };

    RunState st = make_run_state(cfg, cfg.out_dir + "/metrics.csv");

    auto write_all = [&](RunState& s, const std::string& tag) {
        std::string primary;
        if (s.cfg.arch != Arch::r_separate) {
            primary = role_file(s.g, "g", tag);
            save_checkpoint(primary, s.g);
        }
        if (s.has_d) save_checkpoint(role_file(s.d, "d", tag), s.d);
        if (s.has_r) {
            std::string rp = role_file(s.r, "r", tag);
            save_checkpoint(rp, s.r);
            if (primary.empty()) primary = rp;
        }
        s.last_checkpoint = primary;
    };

    TrainHooks hooks;
    hooks.after_batch = [&](RunState& s) {
        if (s.batch != total && s.batch % cadence == 0) {
            write_all(s, pad_batch(s.batch, total));
            std::cout << "batch " << s.batch << "/" << total << ": checkpoint written\n";
        }
    };

    run_training(st, hooks);
    if (st.cfg.arch == Arch::r_separate) save_checkpoint(cfg.out_dir + "/g_final.lisc", st.g);
    write_all(st, "final");

    std::cout << "trained " << st.batch << " batches; metrics: " << cfg.out_dir
              << "/metrics.csv\n";
    if (st.flagged_batches > 0)
        std::cout << "note: " << st.flagged_batches << " batches had ratings clamped away from {0,1}\n";
    if (st.rejected_steps > 0)
        std::cout << "note: " << st.rejected_steps << " optimizer steps skipped on non-finite gradients\n";
    return 0;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
    std::string checkpoint;
    std::string out_dir = "out";
    int count = 16;
    std::string mode = "final"; // final | per-module
    std::uint64_t seed = 1;
    std::string prior = "normal";
    bool dump_noise = false;
};

NetworkParams load_generator(const std::string& path) {
    NetworkParams net = load_checkpoint(path);
    if (net.spec.role != Role::generator)
        throw ConfigError(path + " holds a " + std::string(role_name(net.spec.role)) +
                          " network, need a generator");
    return net;
}

NoiseBatch draw_noise(const std::string& prior, int count, int n_z, std::uint64_t seed) {
    Rng rng(seed, Stream::noise);
    Prior p;
    if (prior == "normal")
        p = Prior::normal;
    else if (prior == "uniform")
        p = Prior::uniform;
    else
        throw ConfigError("prior must be 'normal' or 'uniform', got '" + prior + "'");
    return sample_noise(p, count, n_z, rng);
}

void emit_point_rows(const std::string& path, const std::vector<std::pair<int, Tensor>>& stages) {
    // stages: (stage index, {n,2} points); rows sample,stage,x,y
    std::vector<std::vector<std::string>> rows;
    int n = stages.empty() ? 0 : stages.front().second.dim(0);
    for (int i = 0; i < n; ++i)
        for (const auto& [s, pts] : stages)
            rows.push_back({std::to_string(i), std::to_string(s), format_float(pts.at2(i, 0)),
                            format_float(pts.at2(i, 1))});
    write_csv_file(path, {"sample", "stage", "x", "y"}, rows);
}

int cmd_generate(const GenerateArgs& a) {
    if (a.count < 0) throw ConfigError("count must be >= 0");
    if (a.mode != "final" && a.mode != "per-module")
        throw ConfigError("mode must be 'final' or 'per-module', got '" + a.mode + "'");
    NetworkParams g = load_generator(a.checkpoint);
    if (a.count == 0) {
        std::cout << "0 samples requested; nothing written\n";
        return 0;
    }
    fs::create_directories(a.out_dir);
    NoiseBatch z = draw_noise(a.prior, a.count, g.spec.n_z, a.seed);

    // Stage outputs: final mode = full stack only; per-module = one output
    // per module count 0..n_r.
    std::vector<int> ks;
    if (a.mode == "final")
        ks.push_back(g.spec.n_r);
    else
        for (int k = 0; k <= g.spec.n_r; ++k) ks.push_back(k);

    GenResult full = generator_forward(g, z.values, g.spec.n_r);
    std::vector<std::pair<int, Tensor>> stages;
    for (int k : ks) {
        Tensor stage_z = k == 0 ? z.values : full.z_primes[static_cast<std::size_t>(k) - 1];
        stages.emplace_back(k, generator_tail_forward(g, stage_z));
    }

    int files = 0;
    if (is_point_output(stages.front().second)) {
        emit_point_rows(a.out_dir + "/samples.csv", stages);
        files = 1;
    } else {
        for (const auto& [k, batch] : stages)
            for (int i = 0; i < a.count; ++i) {
                std::string name = a.out_dir + "/sample_" + pad_index(i, a.count);
                if (a.mode == "per-module") name += "_m" + std::to_string(k);
                name += image_ext(batch);
                write_pnm(name, slice_image(batch, i));
                ++files;
            }
    }
    if (a.dump_noise) {
        write_noise_csv(a.out_dir + "/noise_stage0.csv", z.values);
        Tensor final_z = g.spec.n_r == 0 ? z.values : full.z_primes.back();
        write_noise_csv(a.out_dir + "/noise_final.csv", final_z);
        files += 2;
    }
    std::cout << "wrote " << files << " file(s) to " << a.out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// interpolate / perturb
// ---------------------------------------------------------------------------

struct InterpolateArgs {
    std::string checkpoint;
    std::string out_dir = "out";
    int steps = 10;
    std::uint64_t seed = 1;
    std::string prior = "normal";
};

Tensor row_of(const Tensor& m, int i) {
    Tensor r({m.dim(1)});
    for (int j = 0; j < m.dim(1); ++j) r[j] = m.at2(i, j);
    return r;
}

int write_sample_set(NetworkParams& g, const Tensor& zs, const std::string& out_dir,
                     const std::string& stem) {
    Tensor out = generator_forward(g, zs).out;
    if (is_point_output(out)) {
        std::vector<std::vector<std::string>> rows;
        for (int i = 0; i < out.dim(0); ++i)
            rows.push_back({std::to_string(i), format_float(out.at2(i, 0)), format_float(out.at2(i, 1))});
        write_csv_file(out_dir + "/" + stem + ".csv", {"index", "x", "y"}, rows);
        return 1;
    }
    for (int i = 0; i < out.dim(0); ++i)
        write_pnm(out_dir + "/" + stem + "_" + pad_index(i, out.dim(0)) + image_ext(out),
                  slice_image(out, i));
    return out.dim(0);
}

int cmd_interpolate(const InterpolateArgs& a) {
    NetworkParams g = load_generator(a.checkpoint);
    fs::create_directories(a.out_dir);
    NoiseBatch ends = draw_noise(a.prior, 2, g.spec.n_z, a.seed);
    Tensor zs = interpolate(row_of(ends.values, 0), row_of(ends.values, 1), a.steps);
    int files = write_sample_set(g, zs, a.out_dir, "interp");
    std::cout << "wrote " << files << " file(s) to " << a.out_dir << "\n";
    return 0;
}

struct PerturbArgs {
    std::string checkpoint;
    std::string out_dir = "out";
    int count = 64;
    double scale = 1.0;
    std::uint64_t seed = 1;
    std::string prior = "normal";
};

int cmd_perturb(const PerturbArgs& a) {
    NetworkParams g = load_generator(a.checkpoint);
    fs::create_directories(a.out_dir);
    Rng rng(a.seed, Stream::noise);
    Prior p = a.prior == "uniform" ? Prior::uniform : Prior::normal;
    if (a.prior != "normal" && a.prior != "uniform")
        throw ConfigError("prior must be 'normal' or 'uniform', got '" + a.prior + "'");
    NoiseBatch base = sample_noise(p, 1, g.spec.n_z, rng);
    Tensor zs = perturb(row_of(base.values, 0), a.count, a.scale, rng);
    int files = write_sample_set(g, zs, a.out_dir, "perturb");
    std::cout << "wrote " << files << " file(s) to " << a.out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint;
    std::string probs; // external class-probability CSV: IS only
    std::string report = "eval_report.csv";
    int samples = 2000;
    std::uint64_t seed = 1;
    std::string prior = "normal";
    int splits = 10;
    double eps = 0.0; // 0 = auto: 3 * ring_sigma
    int ring_modes = 8;
    double ring_radius = 2.0;
    double ring_sigma = 0.02;
};

Tensor read_prob_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    if (t.header.empty() || t.rows.empty()) throw IoError(path + ": empty probability table");
    int d = static_cast<int>(t.header.size());
    int n = static_cast<int>(t.rows.size());
    Tensor out({n, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out.at2(i, j) = static_cast<float>(t.number(i, j));
    return out;
}

int cmd_eval(const EvalArgs& a) {
    std::vector<std::vector<std::string>> report;
    auto put = [&](const std::string& k, double v) {
        report.push_back({k, format_float(v)});
        std::cout << "  " << k << " = " << format_float(v) << "\n";
    };

    if (!a.probs.empty()) {
        Tensor p = read_prob_csv(a.probs);
        InceptionScore is = inception_score(p, a.splits);
        std::cout << "inception score over " << p.dim(0) << " rows:\n";
        put("is_mean", is.mean);
        put("is_std", is.stddev);
        write_csv_file(a.report, {"metric", "value"}, report);
        std::cout << "report: " << a.report << "\n";
        return 0;
    }

    if (a.checkpoint.empty()) throw ConfigError("eval needs --checkpoint or --probs");
    if (a.samples < 1) throw ConfigError("samples must be >= 1");
    NetworkParams g = load_generator(a.checkpoint);
    NoiseBatch z = draw_noise(a.prior, a.samples, g.spec.n_z, a.seed);
    GenResult full = generator_forward(g, z.values);
    if (!is_point_output(full.out))
        throw ConfigError("eval scores 2-D point generators; this checkpoint emits " +
                          full.out.shape_str() + " outputs (use --probs for image models)");

    MixtureSpec mix = MixtureSpec::ring(a.ring_modes, a.ring_radius, a.ring_sigma);
    double eps = a.eps > 0.0 ? a.eps : 3.0 * a.ring_sigma;
    CoverageReport cov = mode_coverage(full.out, mix, eps);
    InceptionScore is = inception_score(mixture_responsibilities(mix, full.out), a.splits);

    std::cout << "evaluated " << a.samples << " samples (eps = " << format_float(eps) << "):\n";
    put("samples", a.samples);
    put("eps", eps);
    put("modes_total", cov.modes_total);
    put("modes_covered", cov.modes_covered);
    put("hq_fraction", cov.hq_fraction);
    put("is_mean", is.mean);
    put("is_std", is.stddev);
    if (g.spec.n_r > 0) {
        DisplacementStats ds = displacement_stats(z.values, full.z_primes);
        for (std::size_t k = 0; k < ds.mean_sq.size(); ++k) {
            put("displacement_mean_m" + std::to_string(k + 1), ds.mean_sq[k]);
            put("displacement_max_m" + std::to_string(k + 1), ds.max_sq[k]);
        }
    }
    write_csv_file(a.report, {"metric", "value"}, report);
    std::cout << "report: " << a.report << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// hist
// ---------------------------------------------------------------------------

struct HistArgs {
    std::string checkpoint;
    std::string before, after; // noise dump CSVs
    std::string out = "hist.csv";
    int samples = 2000;
    int bins = 50;
    std::uint64_t seed = 1;
    std::string prior = "normal";
};

int cmd_hist(const HistArgs& a) {
    if (a.bins < 2) throw ConfigError("bins must be >= 2");
    Tensor before, after;
    if (!a.before.empty() || !a.after.empty()) {
        if (a.before.empty() || a.after.empty())
            throw ConfigError("hist needs both --before and --after, or --checkpoint");
        before = read_noise_csv(a.before);
        after = read_noise_csv(a.after);
    } else {
        if (a.checkpoint.empty()) throw ConfigError("hist needs --checkpoint or --before/--after");
        if (a.samples < 1) throw ConfigError("samples must be >= 1");
        NetworkParams g = load_generator(a.checkpoint);
        if (g.spec.n_r == 0)
            throw ConfigError("checkpoint has no residual modules; nothing to compare");
        NoiseBatch z = draw_noise(a.prior, a.samples, g.spec.n_z, a.seed);
        GenResult full = generator_forward(g, z.values);
        before = z.values;
        after = full.z_primes.back();
    }
    auto hists = component_histograms(before, after, a.bins);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t j = 0; j < hists.size(); ++j) {
        const auto& h = hists[j];
        double width = (h.hi - h.lo) / a.bins;
        for (int b = 0; b < a.bins; ++b)
            rows.push_back({std::to_string(j), std::to_string(b), format_float(h.lo + b * width),
                            format_float(h.lo + (b + 1) * width),
                            format_float(h.density_before[static_cast<std::size_t>(b)]),
                            format_float(h.density_after[static_cast<std::size_t>(b)])});
    }
    write_csv_file(a.out, {"component", "bin", "bin_lo", "bin_hi", "density_before", "density_after"},
                   rows);
    std::cout << "wrote " << rows.size() << " histogram rows to " << a.out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Input-space manipulation GAN trainer and evaluation toolkit"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
    train_cmd->add_option("--config", ta.config_path, "key=value config file")->required();
    train_cmd->add_option("--out-dir", ta.out_dir, "override the config's out_dir");

    GenerateArgs ga;
    auto* gen_cmd = app.add_subcommand("generate", "Sample from a generator checkpoint");
    gen_cmd->add_option("--checkpoint", ga.checkpoint, "generator .lisc file")->required();
    gen_cmd->add_option("--out-dir", ga.out_dir, "output directory");
    gen_cmd->add_option("--count", ga.count, "number of noise vectors");
    gen_cmd->add_option("--mode", ga.mode, "'final' or 'per-module'");
    gen_cmd->add_option("--seed", ga.seed, "noise seed");
    gen_cmd->add_option("--prior", ga.prior, "'normal' or 'uniform'");
    gen_cmd->add_flag("--dump-noise", ga.dump_noise, "also write noise_stage0.csv / noise_final.csv");

    InterpolateArgs ia;
    auto* interp_cmd = app.add_subcommand("interpolate", "Walk the line between two noise vectors");
    interp_cmd->add_option("--checkpoint", ia.checkpoint, "generator .lisc file")->required();
    interp_cmd->add_option("--out-dir", ia.out_dir, "output directory");
    interp_cmd->add_option("--steps", ia.steps, "samples per row, endpoints included");
    interp_cmd->add_option("--seed", ia.seed, "noise seed");
    interp_cmd->add_option("--prior", ia.prior, "'normal' or 'uniform'");

    PerturbArgs pa;
    auto* pert_cmd = app.add_subcommand("perturb", "Sample a group around one noise vector");
    pert_cmd->add_option("--checkpoint", pa.checkpoint, "generator .lisc file")->required();
    pert_cmd->add_option("--out-dir", pa.out_dir, "output directory");
    pert_cmd->add_option("--count", pa.count, "group size");
    pert_cmd->add_option("--scale", pa.scale, "perturbation standard deviation");
    pert_cmd->add_option("--seed", pa.seed, "noise seed");
    pert_cmd->add_option("--prior", pa.prior, "'normal' or 'uniform'");

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "Score a generator (coverage, HQ fraction, IS)");
    eval_cmd->add_option("--checkpoint", ea.checkpoint, "generator .lisc file (2-D point task)");
    eval_cmd->add_option("--probs", ea.probs, "class-probability CSV; score externally classified samples");
    eval_cmd->add_option("--report", ea.report, "CSV report path");
    eval_cmd->add_option("--samples", ea.samples, "samples to draw");
    eval_cmd->add_option("--seed", ea.seed, "noise seed");
    eval_cmd->add_option("--prior", ea.prior, "'normal' or 'uniform'");
    eval_cmd->add_option("--splits", ea.splits, "inception-score splits");
    eval_cmd->add_option("--eps", ea.eps, "HQ distance threshold (default 3*ring_sigma)");
    eval_cmd->add_option("--ring-modes", ea.ring_modes, "mixture component count");
    eval_cmd->add_option("--ring-radius", ea.ring_radius, "mixture ring radius");
    eval_cmd->add_option("--ring-sigma", ea.ring_sigma, "mixture component stddev");

    HistArgs ha;
    auto* hist_cmd = app.add_subcommand("hist", "Component histograms of noise before/after manipulation");
    hist_cmd->add_option("--checkpoint", ha.checkpoint, "generator .lisc with residual modules");
    hist_cmd->add_option("--before", ha.before, "noise dump CSV (original draws)");
    hist_cmd->add_option("--after", ha.after, "noise dump CSV (manipulated)");
    hist_cmd->add_option("--out", ha.out, "output CSV path");
    hist_cmd->add_option("--samples", ha.samples, "samples to draw in checkpoint mode");
    hist_cmd->add_option("--bins", ha.bins, "histogram bins");
    hist_cmd->add_option("--seed", ha.seed, "noise seed");
    hist_cmd->add_option("--prior", ha.prior, "'normal' or 'uniform'");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(ta);
        if (gen_cmd->parsed()) return cmd_generate(ga);
        if (interp_cmd->parsed()) return cmd_interpolate(ia);
        if (pert_cmd->parsed()) return cmd_perturb(pa);
        if (eval_cmd->parsed()) return cmd_eval(ea);
        if (hist_cmd->parsed()) return cmd_hist(ha);
        std::cerr << "no subcommand selected\n";
        return 1;
    } catch (const CheckpointError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
