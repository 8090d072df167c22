// Binary PGM/PPM encoding and decoding (exact quantization round-trips,
// malformed-input rejection), geometry helpers, and the on-disk corpus
// loader used by the image task.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <vector>

#include <lisgan/image_io.hpp>
#include <lisgan/rng.hpp>

#include "support/tempdir.hpp"

using Catch::Matchers::WithinAbs;
using lisgan::Rng;
using lisgan::Stream;
using lisgan::Tensor;
using testutil::TempDir;

TEST_CASE("values of the form k/255 round-trip exactly", "[image_io]") {
    Tensor gray({1, 4, 5});
    for (std::int64_t i = 0; i < gray.numel(); ++i)
        gray[i] = static_cast<float>((i * 13) % 256) / 255.0f;
    auto bytes = lisgan::encode_pnm(gray);
    // P5, width 5, height 4, maxval 255, then exactly 20 payload bytes.
    std::string header(bytes.begin(), bytes.begin() + 9);
    CHECK(header == "P5\n5 4\n25");
    Tensor back = lisgan::decode_pnm(bytes);
    REQUIRE(back.shape == gray.shape);
    CHECK(back.v == gray.v);

    Tensor color({3, 2, 2});
    for (std::int64_t i = 0; i < color.numel(); ++i)
        color[i] = static_cast<float>((i * 37) % 256) / 255.0f;
    auto cbytes = lisgan::encode_pnm(color);
    CHECK(cbytes[1] == '6');
    Tensor cback = lisgan::decode_pnm(cbytes);
    REQUIRE(cback.shape == color.shape);
    CHECK(cback.v == color.v);
}

TEST_CASE("encode clamps out-of-range values and rejects bad shapes", "[image_io]") {
    Tensor img({1, 1, 2});
    img[0] = -0.5f;
    img[1] = 1.5f;
    auto bytes = lisgan::encode_pnm(img);
    CHECK(bytes[bytes.size() - 2] == 0);
    CHECK(bytes[bytes.size() - 1] == 255);

    CHECK_THROWS_AS(lisgan::encode_pnm(Tensor({4, 4})), lisgan::IoError);
    CHECK_THROWS_AS(lisgan::encode_pnm(Tensor({2, 4, 4})), lisgan::IoError);
}

TEST_CASE("decode rejects malformed headers and truncated payloads", "[image_io]") {
    auto as_bytes = [](const std::string& s) { return std::vector<unsigned char>(s.begin(), s.end()); };

    CHECK_THROWS_AS(lisgan::decode_pnm(as_bytes("")), lisgan::IoError);
    CHECK_THROWS_AS(lisgan::decode_pnm(as_bytes("P3\n1 1\n255\n x")), lisgan::IoError);
    CHECK_THROWS_AS(lisgan::decode_pnm(as_bytes("BM??")), lisgan::IoError);
    CHECK_THROWS_AS(lisgan::decode_pnm(as_bytes("P5\n0 1\n255\n")), lisgan::IoError);
    CHECK_THROWS_AS(lisgan::decode_pnm(as_bytes("P5\n1 1\n65535\n\0\0")), lisgan::IoError);
    CHECK_THROWS_AS(lisgan::decode_pnm(as_bytes("P5\n2 2\n255\nab")), lisgan::IoError); // 2 of 4 bytes
    CHECK_THROWS_AS(lisgan::decode_pnm(as_bytes("P5\nx 1\n255\n\0")), lisgan::IoError);
    CHECK_THROWS_AS(lisgan::decode_pnm(as_bytes("P5\n1 1")), lisgan::IoError);

    // Comments anywhere in the header are fine.
    std::string with_comment = "P5 # grayscale\n# size line\n2 1\n255\nAB";
    Tensor t = lisgan::decode_pnm(as_bytes(with_comment));
    REQUIRE(t.shape == std::vector<int>{1, 1, 2});
    CHECK_THAT(t[0], WithinAbs(static_cast<double>('A') / 255.0, 1e-7));
}

TEST_CASE("file round-trip and missing-file error", "[image_io]") {
    TempDir dir("pnm");
    Tensor img({1, 3, 3});
    for (std::int64_t i = 0; i < 9; ++i) img[i] = static_cast<float>(i * 20) / 255.0f;
    lisgan::write_pnm(dir.file("a.pgm"), img);
    Tensor back = lisgan::read_pnm(dir.file("a.pgm"));
    CHECK(back.v == img.v);
    CHECK_THROWS_AS(lisgan::read_pnm(dir.file("missing.pgm")), lisgan::IoError);
}

TEST_CASE("center crop takes the middle square", "[image_io]") {
    Tensor wide({1, 2, 4});
    for (std::int64_t i = 0; i < 8; ++i) wide[i] = static_cast<float>(i);
    Tensor crop = lisgan::center_crop_square(wide);
    REQUIRE(crop.shape == std::vector<int>{1, 2, 2});
    // Columns 1..2 of each row survive.
    CHECK(crop[0] == 1.0f);
    CHECK(crop[1] == 2.0f);
    CHECK(crop[2] == 5.0f);
    CHECK(crop[3] == 6.0f);

    Tensor tall({1, 4, 2});
    for (std::int64_t i = 0; i < 8; ++i) tall[i] = static_cast<float>(i);
    Tensor tcrop = lisgan::center_crop_square(tall);
    REQUIRE(tcrop.shape == std::vector<int>{1, 2, 2});
    CHECK(tcrop[0] == 2.0f);
    CHECK(tcrop[3] == 5.0f);
}

TEST_CASE("resize modes behave on blocks and constants", "[image_io]") {
    Tensor small({1, 2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
    Tensor up = lisgan::resize_image(small, 4, lisgan::ResizeMode::nearest);
    REQUIRE(up.shape == std::vector<int>{1, 4, 4});
    // Each source pixel becomes a 2x2 block.
    CHECK(up[0] == 1.0f);
    CHECK(up[1] == 1.0f);
    CHECK(up[2] == 2.0f);
    CHECK(up[5] == 1.0f);
    CHECK(up[15] == 4.0f);

    Tensor flat({1, 3, 3});
    flat.fill(0.6f);
    Tensor bi = lisgan::resize_image(flat, 7, lisgan::ResizeMode::bilinear);
    for (std::int64_t i = 0; i < bi.numel(); ++i) CHECK_THAT(bi[i], WithinAbs(0.6, 1e-6));

    Tensor same = lisgan::resize_image(small, 2, lisgan::ResizeMode::bilinear);
    CHECK(same.v == small.v);
    CHECK_THROWS_AS(lisgan::resize_image(small, 0, lisgan::ResizeMode::nearest), lisgan::ConfigError);
}

TEST_CASE("channel conversion replicates gray and weights color", "[image_io]") {
    Tensor gray({1, 1, 2}, {0.25f, 0.75f});
    Tensor rgb = lisgan::convert_channels(gray, 3);
    REQUIRE(rgb.shape == std::vector<int>{3, 1, 2});
    for (int c = 0; c < 3; ++c) {
        CHECK(rgb[c * 2 + 0] == 0.25f);
        CHECK(rgb[c * 2 + 1] == 0.75f);
    }

    Tensor color({3, 1, 1}, {1.0f, 0.5f, 0.2f});
    Tensor luma = lisgan::convert_channels(color, 1);
    CHECK_THAT(luma[0], WithinAbs(0.299 * 1.0 + 0.587 * 0.5 + 0.114 * 0.2, 1e-6));

    CHECK(lisgan::convert_channels(gray, 1).v == gray.v);
    Tensor odd({2, 1, 1});
    CHECK_THROWS_AS(lisgan::convert_channels(odd, 3), lisgan::IoError);
}

TEST_CASE("corpus loader normalizes geometry and skips undecodable files", "[image_io]") {
    TempDir dir("corpus");
    Tensor a({1, 6, 6});
    a.fill(0.2f);
    lisgan::write_pnm(dir.file("a.pgm"), a);
    Tensor b({3, 4, 8});
    b.fill(0.8f);
    lisgan::write_pnm(dir.file("b.ppm"), b);
    {
        std::ofstream junk(dir.file("c.pgm"), std::ios::binary);
        junk << "P5\n9 9\n255\nshort";
    }
    {
        std::ofstream other(dir.file("notes.txt"));
        other << "not an image";
    }

    auto corpus = lisgan::load_image_corpus(dir.path.string(), 1, 4);
    CHECK(corpus.channels == 1);
    CHECK(corpus.size == 4);
    REQUIRE(corpus.images.size() == 2); // corrupt c.pgm skipped, txt ignored
    for (const auto& img : corpus.images) REQUIRE(img.shape == std::vector<int>{1, 4, 4});
    // Sorted by path: a.pgm first (constant 0.2), then b.ppm (constant 0.8).
    CHECK_THAT(corpus.images[0][0], WithinAbs(0.2, 2e-3)); // one quantization step
    CHECK_THAT(corpus.images[1][0], WithinAbs(0.8, 2e-3));

    CHECK_THROWS_AS(lisgan::load_image_corpus(dir.file("nope"), 1, 4), lisgan::IoError);
    TempDir empty("corpus_empty");
    CHECK_THROWS_AS(lisgan::load_image_corpus(empty.path.string(), 1, 4), lisgan::IoError);
}

TEST_CASE("corpus batches draw uniformly with replacement", "[image_io]") {
    lisgan::ImageCorpus corpus;
    corpus.channels = 1;
    corpus.size = 2;
    for (int k = 0; k < 3; ++k) {
        Tensor img({1, 2, 2});
        img.fill(static_cast<float>(k));
        corpus.images.push_back(std::move(img));
    }

    Rng rng(71, Stream::data);
    Tensor batch = lisgan::corpus_batch(corpus, 7, rng);
    REQUIRE(batch.shape == std::vector<int>{7, 1, 2, 2});
    for (int i = 0; i < 7; ++i) {
        float v = batch[i * 4];
        CHECK((v == 0.0f || v == 1.0f || v == 2.0f));
        for (int j = 1; j < 4; ++j) CHECK(batch[i * 4 + j] == v);
    }

    Rng r2(71, Stream::data);
    Tensor again = lisgan::corpus_batch(corpus, 7, r2);
    CHECK(batch.v == again.v);

    lisgan::ImageCorpus hollow;
    CHECK_THROWS_AS(lisgan::corpus_batch(hollow, 2, rng), lisgan::ConfigError);
}
