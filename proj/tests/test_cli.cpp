// End-to-end checks of the command-line tool as a subprocess: artifact
// layout, replay determinism of emitted files, sampling defaults, and the
// exit-code contract (0 ok, 1 config, 2 numeric, 3 io/format).

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <lisgan/checkpoint.hpp>
#include <lisgan/csv.hpp>
#include <lisgan/image_io.hpp>
#include <lisgan/network.hpp>
#include <lisgan/rng.hpp>

#include "support/tempdir.hpp"

namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;

namespace {

struct CmdResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    return std::string(std::istreambuf_iterator<char>(f), {});
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
    REQUIRE(f);
}

CmdResult run_cli(const testutil::TempDir& dir, const std::string& args) {
    const std::string so = dir.file("_stdout.txt"), se = dir.file("_stderr.txt");
    std::string cmd = std::string(LISGAN_CLI_PATH) + " " + args + " >" + so + " 2>" + se;
    int rc = std::system(cmd.c_str());
    CmdResult r;
    r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = slurp(so);
    r.err = slurp(se);
    return r;
}

int csv_data_rows(const std::string& path) {
    return static_cast<int>(lisgan::read_csv(path).rows.size());
}

// Checkpoints the suite feeds to the tool.
std::string save_ring_generator(const testutil::TempDir& dir, const std::string& name, int n_z,
                                int n_r, std::uint64_t seed = 7) {
    lisgan::Rng rng(seed, lisgan::Stream::init);
    lisgan::NetworkParams g =
        lisgan::build_network(lisgan::make_ring_generator_spec(n_z, n_r), rng);
    std::string path = dir.file(name);
    lisgan::save_checkpoint(path, g);
    return path;
}

std::string save_image_generator(const testutil::TempDir& dir, const std::string& name, int n_r) {
    lisgan::Rng rng(7, lisgan::Stream::init);
    lisgan::NetworkParams g =
        lisgan::build_network(lisgan::make_image_generator_spec(4, n_r, 1, 8), rng);
    std::string path = dir.file(name);
    lisgan::save_checkpoint(path, g);
    return path;
}

const std::string kTinyConfig =
    "architecture = baseline\n"
    "n_z = 4\n"
    "batch_size = 8\n"
    "lr_phases = 6:1e-3\n"
    "log_every = 2\n"
    "checkpoint_every = 2\n"
    "seed = 11\n";

} // namespace

TEST_CASE("train writes metrics, cadence checkpoints, and finals") {
    testutil::TempDir dir("cli_train");
    spit(dir.file("run.cfg"), kTinyConfig + "out_dir = " + dir.file("run") + "\n");

    CmdResult r = run_cli(dir, "train --config " + dir.file("run.cfg"));
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK_THAT(r.out, ContainsSubstring("trained 6 batches"));

    // Cadence hits at batches 2 and 4; the last batch only writes finals.
    for (const char* f : {"metrics.csv", "g_2.lisc", "d_2.lisc", "g_4.lisc", "d_4.lisc",
                          "g_final.lisc", "d_final.lisc"})
        CHECK(fs::exists(dir.file("run") + "/" + std::string(f)));
    CHECK_FALSE(fs::exists(dir.file("run") + "/g_6.lisc"));

    lisgan::CsvTable m = lisgan::read_csv(dir.file("run") + "/metrics.csv");
    CHECK(m.header == std::vector<std::string>{"batch", "d_real", "d_fake_m0", "g_m0"});
    REQUIRE(m.rows.size() == 3);
    CHECK(m.rows[0][0] == "2");
    CHECK(m.rows[2][0] == "6");

    SECTION("a rerun reproduces every emitted byte") {
        spit(dir.file("run2.cfg"), kTinyConfig + "out_dir = " + dir.file("run2") + "\n");
        CmdResult r2 = run_cli(dir, "train --config " + dir.file("run2.cfg"));
        REQUIRE(r2.code == 0);
        CHECK(slurp(dir.file("run2") + "/metrics.csv") == slurp(dir.file("run") + "/metrics.csv"));
        CHECK(slurp(dir.file("run2") + "/g_final.lisc") == slurp(dir.file("run") + "/g_final.lisc"));
        CHECK(slurp(dir.file("run2") + "/d_final.lisc") == slurp(dir.file("run") + "/d_final.lisc"));
    }
    SECTION("--out-dir overrides the config") {
        spit(dir.file("run3.cfg"), kTinyConfig + "out_dir = " + dir.file("ignored") + "\n");
        CmdResult r3 = run_cli(dir, "train --config " + dir.file("run3.cfg") + " --out-dir " +
                                        dir.file("moved"));
        REQUIRE(r3.code == 0);
        CHECK(fs::exists(dir.file("moved") + "/metrics.csv"));
        CHECK_FALSE(fs::exists(dir.file("ignored")));
    }
}

TEST_CASE("train runs the separate reverser and copies the frozen generator out") {
    testutil::TempDir dir("cli_rsep");
    std::string gpath = save_ring_generator(dir, "g.lisc", 4, 0);
    spit(dir.file("rsep.cfg"), "architecture = r-separate\n"
                               "generator_checkpoint = " + gpath + "\n"
                               "n_z = 4\n"
                               "batch_size = 8\n"
                               "lr_phases = 4:1e-3\n"
                               "log_every = 2\n"
                               "out_dir = " + dir.file("run") + "\n");

    CmdResult r = run_cli(dir, "train --config " + dir.file("rsep.cfg"));
    INFO(r.err);
    REQUIRE(r.code == 0);

    lisgan::CsvTable m = lisgan::read_csv(dir.file("run") + "/metrics.csv");
    CHECK(m.header == std::vector<std::string>{"batch", "r_loss", "r_mse"});
    CHECK(m.rows.size() == 2);
    CHECK(fs::exists(dir.file("run") + "/r_final.lisc"));
    // The generator was an input, not a product: it comes back bit-identical.
    CHECK(slurp(dir.file("run") + "/g_final.lisc") == slurp(gpath));
}

TEST_CASE("generate emits point samples with replayable noise") {
    testutil::TempDir dir("cli_generate");
    std::string gpath = save_ring_generator(dir, "g.lisc", 4, 0);

    CmdResult r = run_cli(dir, "generate --checkpoint " + gpath + " --out-dir " + dir.file("a"));
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK_THAT(r.out, ContainsSubstring("wrote 1 file(s)"));

    lisgan::CsvTable t = lisgan::read_csv(dir.file("a") + "/samples.csv");
    CHECK(t.header == std::vector<std::string>{"sample", "stage", "x", "y"});
    CHECK(t.rows.size() == 16); // default count, one stage
    for (const auto& row : t.rows) CHECK(row[1] == "0");

    SECTION("same seed replays, another seed differs") {
        run_cli(dir, "generate --checkpoint " + gpath + " --out-dir " + dir.file("b"));
        CHECK(slurp(dir.file("b") + "/samples.csv") == slurp(dir.file("a") + "/samples.csv"));
        run_cli(dir, "generate --checkpoint " + gpath + " --seed 2 --out-dir " + dir.file("c"));
        CHECK(slurp(dir.file("c") + "/samples.csv") != slurp(dir.file("a") + "/samples.csv"));
    }
    SECTION("--dump-noise adds the stage-0 and final noise tables") {
        CmdResult d = run_cli(dir, "generate --checkpoint " + gpath + " --count 5 --dump-noise" +
                                       " --out-dir " + dir.file("n"));
        REQUIRE(d.code == 0);
        CHECK_THAT(d.out, ContainsSubstring("wrote 3 file(s)"));
        lisgan::CsvTable z = lisgan::read_csv(dir.file("n") + "/noise_stage0.csv");
        CHECK(z.header == std::vector<std::string>{"z0", "z1", "z2", "z3"});
        CHECK(z.rows.size() == 5);
        // No residual modules: the final noise is the draw itself.
        CHECK(slurp(dir.file("n") + "/noise_final.csv") ==
              slurp(dir.file("n") + "/noise_stage0.csv"));
    }
}

TEST_CASE("per-module generation walks every refinement stage") {
    testutil::TempDir dir("cli_stages");
    std::string gpath = save_ring_generator(dir, "g.lisc", 4, 2);

    CmdResult r = run_cli(dir, "generate --checkpoint " + gpath + " --count 6" +
                                   " --mode per-module --out-dir " + dir.file("s"));
    INFO(r.err);
    REQUIRE(r.code == 0);

    lisgan::CsvTable t = lisgan::read_csv(dir.file("s") + "/samples.csv");
    REQUIRE(t.rows.size() == 18); // 6 samples x stages 0..2
    CHECK(t.rows[0][1] == "0");
    CHECK(t.rows[1][1] == "1");
    CHECK(t.rows[2][1] == "2");
    // Residual modules start at identity, so every stage emits the same point.
    CHECK(t.rows[0][2] == t.rows[2][2]);
    CHECK(t.rows[0][3] == t.rows[2][3]);
}

TEST_CASE("image generators produce one readable pnm per sample and stage") {
    testutil::TempDir dir("cli_images");
    std::string gpath = save_image_generator(dir, "g.lisc", 1);

    CmdResult r = run_cli(dir, "generate --checkpoint " + gpath + " --count 3 --out-dir " +
                                   dir.file("img"));
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK_THAT(r.out, ContainsSubstring("wrote 3 file(s)"));
    for (const char* f : {"sample_0.pgm", "sample_1.pgm", "sample_2.pgm"})
        CHECK(fs::exists(dir.file("img") + "/" + std::string(f)));
    lisgan::Tensor img = lisgan::read_pnm(dir.file("img") + "/sample_0.pgm");
    CHECK(img.shape == std::vector<int>{1, 8, 8});

    SECTION("per-module mode doubles the files and starts at identity") {
        CmdResult p = run_cli(dir, "generate --checkpoint " + gpath + " --count 2" +
                                       " --mode per-module --out-dir " + dir.file("pm"));
        REQUIRE(p.code == 0);
        CHECK_THAT(p.out, ContainsSubstring("wrote 4 file(s)"));
        CHECK(slurp(dir.file("pm") + "/sample_0_m0.pgm") ==
              slurp(dir.file("pm") + "/sample_0_m1.pgm"));
    }
}

TEST_CASE("interpolate and perturb honor their defaults and counts") {
    testutil::TempDir dir("cli_walks");
    std::string gpath = save_ring_generator(dir, "g.lisc", 4, 0);

    CmdResult i = run_cli(dir, "interpolate --checkpoint " + gpath + " --out-dir " + dir.file("i"));
    INFO(i.err);
    REQUIRE(i.code == 0);
    CHECK(csv_data_rows(dir.file("i") + "/interp.csv") == 10);

    CmdResult i4 = run_cli(dir, "interpolate --checkpoint " + gpath + " --steps 4 --out-dir " +
                                    dir.file("i4"));
    REQUIRE(i4.code == 0);
    CHECK(csv_data_rows(dir.file("i4") + "/interp.csv") == 4);

    CmdResult p = run_cli(dir, "perturb --checkpoint " + gpath + " --out-dir " + dir.file("p"));
    INFO(p.err);
    REQUIRE(p.code == 0);
    CHECK(csv_data_rows(dir.file("p") + "/perturb.csv") == 64);

    CmdResult p5 = run_cli(dir, "perturb --checkpoint " + gpath + " --count 5 --scale 0.1" +
                                    " --out-dir " + dir.file("p5"));
    REQUIRE(p5.code == 0);
    CHECK(csv_data_rows(dir.file("p5") + "/perturb.csv") == 5);
}

TEST_CASE("eval reports coverage and score metrics for point generators") {
    testutil::TempDir dir("cli_eval");
    std::string gpath = save_ring_generator(dir, "g.lisc", 4, 0);
    std::string report = dir.file("report.csv");

    CmdResult r = run_cli(dir, "eval --checkpoint " + gpath + " --samples 200 --report " + report);
    INFO(r.err);
    REQUIRE(r.code == 0);

    lisgan::CsvTable t = lisgan::read_csv(report);
    CHECK(t.header == std::vector<std::string>{"metric", "value"});
    REQUIRE(t.rows.size() == 7); // no displacement rows without modules
    CHECK(t.rows[0][0] == "samples");
    CHECK(t.rows[1][0] == "eps");
    CHECK(t.rows[1][1] == lisgan::format_float(0.06)); // 3 * default sigma
    CHECK(t.rows[2][0] == "modes_total");
    CHECK(t.rows[2][1] == "8");

    SECTION("residual modules add displacement rows") {
        std::string gm = save_ring_generator(dir, "gm.lisc", 4, 2);
        CmdResult rm = run_cli(dir, "eval --checkpoint " + gm + " --samples 50 --report " +
                                        dir.file("rm.csv"));
        REQUIRE(rm.code == 0);
        lisgan::CsvTable tm = lisgan::read_csv(dir.file("rm.csv"));
        REQUIRE(tm.rows.size() == 11);
        CHECK(tm.rows[7][0] == "displacement_mean_m1");
        CHECK(tm.rows[10][0] == "displacement_max_m2");
        // Identity modules displace nothing.
        CHECK(tm.rows[7][1] == "0");
    }
}

TEST_CASE("eval scores an external probability table") {
    testutil::TempDir dir("cli_eval_probs");
    spit(dir.file("p.csv"), "c0,c1,c2,c3\n"
                            "0.25,0.25,0.25,0.25\n"
                            "0.25,0.25,0.25,0.25\n"
                            "0.25,0.25,0.25,0.25\n"
                            "0.25,0.25,0.25,0.25\n");

    CmdResult r = run_cli(dir, "eval --probs " + dir.file("p.csv") + " --report " +
                                   dir.file("is.csv"));
    INFO(r.err);
    REQUIRE(r.code == 0);
    lisgan::CsvTable t = lisgan::read_csv(dir.file("is.csv"));
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0] == std::vector<std::string>{"is_mean", "1"});
    CHECK(t.rows[1] == std::vector<std::string>{"is_std", "0"});
}

TEST_CASE("hist compares noise distributions per component") {
    testutil::TempDir dir("cli_hist");
    std::string gpath = save_ring_generator(dir, "g.lisc", 4, 2);

    CmdResult r = run_cli(dir, "hist --checkpoint " + gpath + " --samples 50 --bins 5 --out " +
                                   dir.file("h.csv"));
    INFO(r.err);
    REQUIRE(r.code == 0);
    lisgan::CsvTable t = lisgan::read_csv(dir.file("h.csv"));
    CHECK(t.header == std::vector<std::string>{"component", "bin", "bin_lo", "bin_hi",
                                               "density_before", "density_after"});
    REQUIRE(t.rows.size() == 20); // 4 components x 5 bins
    // Identity modules: both densities agree bin for bin.
    for (const auto& row : t.rows) CHECK(row[4] == row[5]);

    SECTION("dumped noise tables feed the same command") {
        run_cli(dir, "generate --checkpoint " + gpath + " --count 40 --dump-noise --out-dir " +
                         dir.file("n"));
        CmdResult h = run_cli(dir, "hist --before " + dir.file("n") + "/noise_stage0.csv" +
                                       " --after " + dir.file("n") + "/noise_final.csv" +
                                       " --bins 4 --out " + dir.file("h2.csv"));
        INFO(h.err);
        REQUIRE(h.code == 0);
        CHECK(csv_data_rows(dir.file("h2.csv")) == 16);
    }
    SECTION("a module-free checkpoint has nothing to compare") {
        std::string flat = save_ring_generator(dir, "flat.lisc", 4, 0);
        CmdResult h = run_cli(dir, "hist --checkpoint " + flat + " --out " + dir.file("x.csv"));
        CHECK(h.code == 1);
        CHECK_THAT(h.err, ContainsSubstring("no residual modules"));
    }
}

TEST_CASE("failures map to the documented exit codes") {
    testutil::TempDir dir("cli_codes");
    std::string gpath = save_ring_generator(dir, "g.lisc", 4, 0);

    SECTION("config mistakes exit 1") {
        spit(dir.file("bad.cfg"), "bogus = 1\n");
        CmdResult r = run_cli(dir, "train --config " + dir.file("bad.cfg"));
        CHECK(r.code == 1);
        CHECK_THAT(r.err, ContainsSubstring("unknown key 'bogus'"));

        CmdResult role = run_cli(dir, "generate --checkpoint " + gpath + " --mode sideways");
        CHECK(role.code == 1);

        CmdResult none = run_cli(dir, "eval --report " + dir.file("r.csv"));
        CHECK(none.code == 1);
        CHECK_THAT(none.err, ContainsSubstring("eval needs --checkpoint or --probs"));
    }
    SECTION("command-line parse errors exit 1") {
        CHECK(run_cli(dir, "").code == 1);
        CHECK(run_cli(dir, "frobnicate").code == 1);
        CHECK(run_cli(dir, "train").code == 1); // --config is required
    }
    SECTION("a wrong-role checkpoint exits 1") {
        lisgan::Rng rng(7, lisgan::Stream::init);
        lisgan::NetworkParams d =
            lisgan::build_network(lisgan::make_ring_discriminator_spec(), rng);
        lisgan::save_checkpoint(dir.file("d.lisc"), d);
        CmdResult r = run_cli(dir, "generate --checkpoint " + dir.file("d.lisc"));
        CHECK(r.code == 1);
        CHECK_THAT(r.err, ContainsSubstring("holds a discriminator"));
    }
    SECTION("numeric failures exit 2") {
        spit(dir.file("badp.csv"), "c0,c1\n0.9,0.2\n");
        CmdResult r = run_cli(dir, "eval --probs " + dir.file("badp.csv"));
        CHECK(r.code == 2);
    }
    SECTION("io and format failures exit 3") {
        CmdResult missing_cfg = run_cli(dir, "train --config " + dir.file("absent.cfg"));
        CHECK(missing_cfg.code == 3);

        CmdResult missing_ck = run_cli(dir, "generate --checkpoint " + dir.file("absent.lisc"));
        CHECK(missing_ck.code == 3);

        std::string bytes = slurp(gpath);
        bytes[bytes.size() / 2] = static_cast<char>(~bytes[bytes.size() / 2]);
        spit(dir.file("corrupt.lisc"), bytes);
        CmdResult corrupt = run_cli(dir, "generate --checkpoint " + dir.file("corrupt.lisc"));
        CHECK(corrupt.code == 3);
        CHECK_THAT(corrupt.err, ContainsSubstring("error:"));
    }
    SECTION("mismatched histogram inputs exit 1") {
        spit(dir.file("b.csv"), "z0,z1\n1,2\n");
        spit(dir.file("a.csv"), "z0,z1,z2\n1,2,3\n");
        CmdResult r = run_cli(dir, "hist --before " + dir.file("b.csv") + " --after " +
                                       dir.file("a.csv"));
        CHECK(r.code == 1);
        CmdResult one = run_cli(dir, "hist --before " + dir.file("b.csv"));
        CHECK(one.code == 1);
        CHECK_THAT(one.err, ContainsSubstring("both --before and --after"));
    }
}
