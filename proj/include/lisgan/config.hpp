#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "losses.hpp"

namespace lisgan {

enum class Arch { baseline, r_separate, r_iterative, g_lis };
enum class Prior { normal, uniform };
enum class Task { ring, images };

struct LrPhase {
    std::int64_t batches = 0;
    double lr = 0.0;
};

struct TrainConfig {
    Arch arch = Arch::baseline;
    int n_r = 0;
    double lambda_r = 0.9;
    int batch_size = 32;
    std::vector<LrPhase> phases{{10000, 0.0005}, {10000, 0.0001}};
    Prior prior = Prior::normal;
    std::uint64_t seed = 1;
    GLossMode g_loss_mode = GLossMode::minimax;
    double r_dropout = 0.1; // reverser dropout, separate-reverser runs only
    Task task = Task::ring;
    std::string dataset_path;
    int n_z = 32;
    int image_size = 16;
    int image_channels = 1;
    int ring_modes = 8;
    double ring_radius = 2.0;
    double ring_sigma = 0.02;
    std::int64_t log_every = 100;
    std::int64_t checkpoint_every = 0; // 0 = every 10% of the budget
    std::string out_dir = "out";
    std::string generator_checkpoint; // required for the separate-reverser run

    std::int64_t total_batches() const {
        std::int64_t n = 0;
        for (const auto& p : phases) n += p.batches;
        return n;
    }

    double lr_at(std::int64_t batch_one_based) const {
        std::int64_t acc = 0;
        for (const auto& p : phases) {
            acc += p.batches;
            if (batch_one_based <= acc) return p.lr;
        }
        return phases.back().lr;
    }

    std::int64_t checkpoint_cadence() const {
        if (checkpoint_every > 0) return checkpoint_every;
        return std::max<std::int64_t>(1, total_batches() / 10);
    }

    void validate() const {
        if (phases.empty()) throw ConfigError("config: lr_phases must not be empty");
        for (const auto& p : phases) {
            if (p.batches < 0) throw ConfigError("config: phase batch counts must be >= 0");
            if (!(p.lr > 0.0)) throw ConfigError("config: learning rates must be positive");
        }
        if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
        if (n_r < 0) throw ConfigError("config: n_r must be >= 0");
        if (!(lambda_r >= 0.0 && lambda_r <= 1.0)) throw ConfigError("config: lambda_r must lie in [0,1]");
        if (n_z < 1) throw ConfigError("config: n_z must be >= 1");
        if (r_dropout < 0.0 || r_dropout >= 1.0) throw ConfigError("config: r_dropout must lie in [0,1)");
        if (log_every < 1) throw ConfigError("config: log_every must be >= 1");
        if (checkpoint_every < 0) throw ConfigError("config: checkpoint_every must be >= 0");
        if (ring_modes < 1) throw ConfigError("config: ring_modes must be >= 1");
        if (!(ring_sigma > 0.0)) throw ConfigError("config: ring_sigma must be > 0");
        if (arch == Arch::baseline && n_r != 0)
            throw ConfigError("config: baseline architecture requires n_r = 0");
        // r-iterative with n_r = 0 is legal: the batch routine degenerates to
        // the plain alternating run, stream for stream.
        if (arch == Arch::r_separate && generator_checkpoint.empty())
            throw ConfigError("config: r-separate requires generator_checkpoint");
        if (task == Task::images && dataset_path.empty() && arch != Arch::r_separate)
            throw ConfigError("config: image task requires dataset_path");
        if (task == Task::images && (image_size < 8 || image_size % 4 != 0))
            throw ConfigError("config: image_size must be a multiple of 4 and >= 8");
        if (task == Task::images && image_channels != 1 && image_channels != 3)
            throw ConfigError("config: image_channels must be 1 or 3");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct ConfigCursor {
    std::string source;
    int line = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(source + ":" + std::to_string(line) + ": " + msg);
    }

    long long to_int(const std::string& v) const {
        try {
            std::size_t used = 0;
            long long x = std::stoll(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return x;
        } catch (const std::exception&) {
            fail("expected an integer, got '" + v + "'");
        }
    }

    double to_double(const std::string& v) const {
        try {
            std::size_t used = 0;
            double x = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return x;
        } catch (const std::exception&) {
            fail("expected a number, got '" + v + "'");
        }
    }
};

// "batches:lr,batches:lr,..."
inline std::vector<LrPhase> parse_lr_phases(const std::string& v, const ConfigCursor& at) {
    std::vector<LrPhase> phases;
    std::stringstream ss(v);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        std::size_t colon = part.find(':');
        if (colon == std::string::npos)
            at.fail("lr_phases entries must look like 'batches:lr', got '" + part + "'");
        LrPhase p;
        p.batches = at.to_int(trim(part.substr(0, colon)));
        p.lr = at.to_double(trim(part.substr(colon + 1)));
        phases.push_back(p);
    }
    if (phases.empty()) at.fail("lr_phases must contain at least one 'batches:lr' entry");
    return phases;
}

} // namespace detail

// Line-oriented key=value parser. '#' starts a comment, blank lines are
// skipped, unknown and duplicate keys are rejected with file:line context.
inline TrainConfig parse_train_config(std::istream& in, const std::string& source) {
    TrainConfig cfg;
    detail::ConfigCursor at{source, 0};
    std::set<std::string> seen;
    std::string raw;
    while (std::getline(in, raw)) {
        ++at.line;
        std::size_t hash = raw.find('#');
        std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) at.fail("expected 'key = value', got '" + line + "'");
        std::string key = detail::trim(line.substr(0, eq));
        std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty()) at.fail("empty key");
        if (!seen.insert(key).second) at.fail("duplicate key '" + key + "'");

        if (key == "architecture") {
            if (val == "baseline") cfg.arch = Arch::baseline;
            else if (val == "r-separate") cfg.arch = Arch::r_separate;
            else if (val == "r-iterative") cfg.arch = Arch::r_iterative;
            else if (val == "g-lis") cfg.arch = Arch::g_lis;
            else at.fail("architecture must be one of baseline, r-separate, r-iterative, g-lis");
        } else if (key == "n_r") {
            cfg.n_r = static_cast<int>(at.to_int(val));
        } else if (key == "lambda_r") {
            cfg.lambda_r = at.to_double(val);
        } else if (key == "batch_size") {
            cfg.batch_size = static_cast<int>(at.to_int(val));
        } else if (key == "lr_phases") {
            cfg.phases = detail::parse_lr_phases(val, at);
        } else if (key == "prior") {
            if (val == "normal") cfg.prior = Prior::normal;
            else if (val == "uniform") cfg.prior = Prior::uniform;
            else at.fail("prior must be 'normal' or 'uniform'");
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(at.to_int(val));
        } else if (key == "g_loss") {
            if (val == "minimax") cfg.g_loss_mode = GLossMode::minimax;
            else if (val == "non-saturating") cfg.g_loss_mode = GLossMode::non_saturating;
            else at.fail("g_loss must be 'minimax' or 'non-saturating'");
        } else if (key == "r_dropout") {
            cfg.r_dropout = at.to_double(val);
        } else if (key == "task") {
            if (val == "ring") cfg.task = Task::ring;
            else if (val == "images") cfg.task = Task::images;
            else at.fail("task must be 'ring' or 'images'");
        } else if (key == "dataset_path") {
            cfg.dataset_path = val;
        } else if (key == "n_z") {
            cfg.n_z = static_cast<int>(at.to_int(val));
        } else if (key == "image_size") {
            cfg.image_size = static_cast<int>(at.to_int(val));
        } else if (key == "image_channels") {
            cfg.image_channels = static_cast<int>(at.to_int(val));
        } else if (key == "ring_modes") {
            cfg.ring_modes = static_cast<int>(at.to_int(val));
        } else if (key == "ring_radius") {
            cfg.ring_radius = at.to_double(val);
        } else if (key == "ring_sigma") {
            cfg.ring_sigma = at.to_double(val);
        } else if (key == "log_every") {
            cfg.log_every = at.to_int(val);
        } else if (key == "checkpoint_every") {
            cfg.checkpoint_every = at.to_int(val);
        } else if (key == "out_dir") {
            cfg.out_dir = val;
        } else if (key == "generator_checkpoint") {
            cfg.generator_checkpoint = val;
        } else {
            at.fail("unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

inline TrainConfig load_train_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("config: cannot open: " + path);
    return parse_train_config(f, path);
}

} // namespace lisgan
