// CSV conventions (float formatting that exactly round-trips float32, LF
// terminators, integer batch column), the in-memory metrics sink, and the
// trainer column schemas.

#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include <lisgan/csv.hpp>
#include <lisgan/metrics.hpp>
#include <lisgan/rng.hpp>

#include "support/tempdir.hpp"

using lisgan::MetricsSink;
using lisgan::Rng;
using lisgan::Stream;
using testutil::TempDir;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("float formatting carries enough digits for exact float32 round-trips", "[csv]") {
    Rng rng(91, Stream::init);
    for (int i = 0; i < 1000; ++i) {
        float f = static_cast<float>(rng.normal(0.0, 100.0));
        std::string s = lisgan::format_float(static_cast<double>(f));
        float back = std::strtof(s.c_str(), nullptr);
        INFO("value " << s);
        REQUIRE(back == f);
    }
    CHECK(lisgan::format_float(0.5) == "0.5");
    CHECK(lisgan::format_float(-3.0) == "-3");
    CHECK(lisgan::format_float(0.0) == "0");
}

TEST_CASE("csv rows join with commas and a single LF", "[csv]") {
    CHECK(lisgan::csv_join({"a", "b", "c"}) == "a,b,c\n");
    CHECK(lisgan::csv_join({"solo"}) == "solo\n");
    CHECK(lisgan::csv_join({}) == "\n");
}

TEST_CASE("csv reader parses headers, rows, CRLF and numeric cells", "[csv]") {
    TempDir dir("csv");
    {
        std::ofstream f(dir.file("t.csv"), std::ios::binary);
        f << "batch,loss\r\n0,0.5\n100,1.25e-3\n";
    }
    auto t = lisgan::read_csv(dir.file("t.csv"));
    REQUIRE(t.header == std::vector<std::string>{"batch", "loss"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.column("loss") == 1);
    CHECK(t.number(0, 0) == 0.0);
    CHECK(t.number(1, 1) == 1.25e-3);
    CHECK_THROWS_AS(t.column("nope"), lisgan::IoError);

    {
        std::ofstream f(dir.file("bad.csv"), std::ios::binary);
        f << "a,b\nx,1\n";
    }
    auto bad = lisgan::read_csv(dir.file("bad.csv"));
    CHECK_THROWS_AS(bad.number(0, 0), lisgan::IoError);

    { std::ofstream f(dir.file("empty.csv"), std::ios::binary); }
    CHECK_THROWS_AS(lisgan::read_csv(dir.file("empty.csv")), lisgan::IoError);
    CHECK_THROWS_AS(lisgan::read_csv(dir.file("missing.csv")), lisgan::IoError);
}

TEST_CASE("metrics sink writes an integer batch column and %.9g values", "[metrics]") {
    TempDir dir("metrics");
    MetricsSink sink;
    sink.open({"batch", "a", "b"}, dir.file("m.csv"));
    sink.append({100.0, 0.5, 1.0 / 3.0});
    sink.append({200.0, -2.0, 4.0});
    sink.flush();

    std::string content = slurp(dir.file("m.csv"));
    CHECK(content == "batch,a,b\n100,0.5,0.333333333\n200,-2,4\n");

    REQUIRE(sink.rows().size() == 2);
    CHECK(sink.rows()[1][2] == 4.0);
    CHECK(sink.column("b") == 2);
    CHECK_THROWS_AS(sink.column("c"), lisgan::ConfigError);
    CHECK_THROWS_AS(sink.append({1.0, 2.0}), lisgan::ConfigError);

    // Same schema and rows, same bytes.
    MetricsSink again;
    again.open({"batch", "a", "b"}, dir.file("m2.csv"));
    again.append({100.0, 0.5, 1.0 / 3.0});
    again.append({200.0, -2.0, 4.0});
    again.flush();
    CHECK(slurp(dir.file("m2.csv")) == content);

    // The sink works without a file (memory only).
    MetricsSink mem;
    mem.open({"batch", "x"});
    mem.append({0.0, 9.0});
    CHECK(mem.rows().size() == 1);

    MetricsSink denied;
    CHECK_THROWS_AS(denied.open({"batch"}, dir.path.string() + "/no_dir/x.csv"), lisgan::IoError);
}

TEST_CASE("trainer column schemas enumerate stages and constraint terms", "[metrics]") {
    CHECK(lisgan::adversarial_metric_columns(0) ==
          std::vector<std::string>{"batch", "d_real", "d_fake_m0", "g_m0"});
    CHECK(lisgan::adversarial_metric_columns(3) ==
          std::vector<std::string>{"batch", "d_real", "d_fake_m0", "d_fake_m1", "d_fake_m2", "d_fake_m3",
                                   "g_m0", "g_m1", "g_m2", "g_m3", "l_r_m1", "l_r_m2", "l_r_m3"});
    CHECK(lisgan::adversarial_metric_columns(3).size() == 13);
    CHECK(lisgan::reverser_metric_columns() == std::vector<std::string>{"batch", "r_loss", "r_mse"});
}
