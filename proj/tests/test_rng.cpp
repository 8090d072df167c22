// Deterministic RNG checks: the seed mixer against its published output
// sequence, stream independence, distribution sanity, and the value-copy
// semantics replay depends on.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include <lisgan/rng.hpp>

using Catch::Matchers::WithinAbs;
using lisgan::Rng;
using lisgan::Stream;

TEST_CASE("seed mixer reproduces the reference splitmix64 sequence", "[rng]") {
    std::uint64_t state = 0;
    CHECK(lisgan::splitmix64(state) == 0xE220A8397B1DCDAFULL);
    CHECK(lisgan::splitmix64(state) == 0x6E789E6AA1B965F4ULL);
    CHECK(lisgan::splitmix64(state) == 0x06C45D188009454FULL);
    CHECK(lisgan::splitmix64(state) == 0xF88BB8A8724C81ECULL);
}

TEST_CASE("same seed and stream replay identically; streams differ", "[rng]") {
    Rng a(1234, Stream::noise);
    Rng b(1234, Stream::noise);
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(a.next_u64() == b.next_u64());
    }
    Rng c(1234, Stream::noise);
    Rng d(1234, Stream::data);
    Rng e(1234, Stream::schedule);
    Rng f(1234, Stream::init);
    CHECK(c.next_u64() != d.next_u64());
    CHECK(c.next_u64() != e.next_u64());
    CHECK(c.next_u64() != f.next_u64());

    Rng g(1, Stream::noise);
    Rng h(2, Stream::noise);
    CHECK(g.next_u64() != h.next_u64());
}

TEST_CASE("copies resume the stream from the copied state", "[rng]") {
    Rng a(77, Stream::noise);
    for (int i = 0; i < 10; ++i) a.normal();
    Rng b = a;
    for (int i = 0; i < 50; ++i) {
        REQUIRE(a.normal() == b.normal());
        REQUIRE(a.next_u64() == b.next_u64());
    }
}

TEST_CASE("uniform01 stays in [0,1) with the right first two moments", "[rng]") {
    Rng rng(5, Stream::noise);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        sq += u * u;
    }
    double mean = sum / n;
    double var = sq / n - mean * mean;
    CHECK_THAT(mean, WithinAbs(0.5, 0.005));
    CHECK_THAT(var, WithinAbs(1.0 / 12.0, 0.002));

    double lo = rng.uniform(-3.0, 2.0);
    CHECK(lo >= -3.0);
    CHECK(lo < 2.0);
}

TEST_CASE("normal draws have unit variance and zero mean", "[rng]") {
    Rng rng(6, Stream::noise);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = rng.normal();
        REQUIRE(std::isfinite(x));
        sum += x;
        sq += x * x;
    }
    double mean = sum / n;
    double var = sq / n - mean * mean;
    CHECK_THAT(mean, WithinAbs(0.0, 0.02));
    CHECK_THAT(var, WithinAbs(1.0, 0.03));

    double shifted = rng.normal(10.0, 0.0);
    CHECK(shifted == 10.0);
}

TEST_CASE("bounded integer draws cover their range uniformly", "[rng]") {
    Rng rng(9, Stream::schedule);
    CHECK(rng.below(0) == 0);
    for (int i = 0; i < 100; ++i) REQUIRE(rng.below(1) == 0);
    const int n = 60000, k = 6;
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
        auto v = rng.below(k);
        REQUIRE(v < static_cast<std::uint64_t>(k));
        ++counts[static_cast<std::size_t>(v)];
    }
    for (int c : counts) CHECK_THAT(static_cast<double>(c) / n, WithinAbs(1.0 / k, 0.01));

    int heads = 0;
    for (int i = 0; i < n; ++i) heads += rng.bernoulli(0.3) ? 1 : 0;
    CHECK_THAT(static_cast<double>(heads) / n, WithinAbs(0.3, 0.01));
}
