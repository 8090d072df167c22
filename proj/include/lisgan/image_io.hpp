#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "common.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace lisgan {

// Binary PPM (P6, 3 channels) and PGM (P5, 1 channel), 8-bit, maxval 255.
// Tensors are {c,h,w} in [0,1]; encode quantizes with round(v*255), so values
// of the form k/255 round-trip exactly.

inline std::vector<unsigned char> encode_pnm(const Tensor& img) {
    if (img.rank() != 3 || (img.dim(0) != 1 && img.dim(0) != 3))
        throw IoError("pnm encode: expected (1,h,w) or (3,h,w) tensor, got " + img.shape_str());
    int c = img.dim(0), h = img.dim(1), w = img.dim(2);
    std::string header = std::string(c == 3 ? "P6" : "P5") + "\n" + std::to_string(w) + " " +
                         std::to_string(h) + "\n255\n";
    std::vector<unsigned char> out(header.begin(), header.end());
    out.reserve(out.size() + static_cast<std::size_t>(c) * h * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) {
                float v = img.v[(static_cast<std::size_t>(ch) * h + y) * w + x];
                int q = static_cast<int>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
                out.push_back(static_cast<unsigned char>(q));
            }
    return out;
}

namespace detail {

// PNM token scanner: skips whitespace and '#' comments.
inline std::string pnm_token(const std::vector<unsigned char>& buf, std::size_t& pos,
                             const std::string& src) {
    while (pos < buf.size()) {
        unsigned char ch = buf[pos];
        if (ch == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
        } else if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n') {
            ++pos;
        } else {
            break;
        }
    }
    std::size_t start = pos;
    while (pos < buf.size() && !std::isspace(buf[pos]) && buf[pos] != '#') ++pos;
    if (start == pos) throw IoError(src + ": truncated header");
    return std::string(buf.begin() + static_cast<std::ptrdiff_t>(start),
                       buf.begin() + static_cast<std::ptrdiff_t>(pos));
}

inline int pnm_int(const std::vector<unsigned char>& buf, std::size_t& pos, const std::string& src) {
    std::string tok = pnm_token(buf, pos, src);
    try {
        std::size_t used = 0;
        int v = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw IoError(src + ": bad header token '" + tok + "'");
    }
}

} // namespace detail

inline Tensor decode_pnm(const std::vector<unsigned char>& buf, const std::string& src = "pnm") {
    if (buf.size() < 2 || buf[0] != 'P' || (buf[1] != '5' && buf[1] != '6'))
        throw IoError(src + ": not a binary PGM/PPM file (magic P5/P6 missing)");
    int channels = buf[1] == '6' ? 3 : 1;
    std::size_t pos = 2;
    int w = detail::pnm_int(buf, pos, src);
    int h = detail::pnm_int(buf, pos, src);
    int maxv = detail::pnm_int(buf, pos, src);
    if (w < 1 || h < 1) throw IoError(src + ": bad dimensions " + std::to_string(w) + "x" + std::to_string(h));
    if (maxv != 255) throw IoError(src + ": only maxval 255 supported, got " + std::to_string(maxv));
    if (pos >= buf.size() || !std::isspace(buf[pos]))
        throw IoError(src + ": missing delimiter before pixel data");
    ++pos; // single whitespace byte separates header from payload
    std::size_t need = static_cast<std::size_t>(channels) * w * h;
    if (buf.size() - pos < need)
        throw IoError(src + ": pixel payload truncated (" + std::to_string(buf.size() - pos) + " of " +
                      std::to_string(need) + " bytes)");
    Tensor img({channels, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < channels; ++ch)
                img.v[(static_cast<std::size_t>(ch) * h + y) * w + x] =
                    static_cast<float>(buf[pos++]) / 255.0f;
    return img;
}

inline void write_pnm(const std::string& path, const Tensor& img) {
    auto bytes = encode_pnm(img);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

inline Tensor read_pnm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_pnm(buf, path);
}

// ---------------------------------------------------------------------------
// Geometry helpers
// ---------------------------------------------------------------------------

inline Tensor center_crop_square(const Tensor& img) {
    int c = img.dim(0), h = img.dim(1), w = img.dim(2);
    int side = std::min(h, w);
    int oy = (h - side) / 2, ox = (w - side) / 2;
    Tensor out({c, side, side});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x)
                out.v[(static_cast<std::size_t>(ch) * side + y) * side + x] =
                    img.v[(static_cast<std::size_t>(ch) * h + (y + oy)) * w + (x + ox)];
    return out;
}

enum class ResizeMode { nearest, bilinear };

inline Tensor resize_image(const Tensor& img, int target, ResizeMode mode) {
    int c = img.dim(0), h = img.dim(1), w = img.dim(2);
    if (target < 1) throw ConfigError("resize: target must be >= 1");
    if (h == target && w == target) return img;
    Tensor out({c, target, target});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < target; ++y)
            for (int x = 0; x < target; ++x) {
                float v;
                if (mode == ResizeMode::nearest) {
                    int sy = std::min(static_cast<int>((y + 0.5) * h / target), h - 1);
                    int sx = std::min(static_cast<int>((x + 0.5) * w / target), w - 1);
                    v = img.v[(static_cast<std::size_t>(ch) * h + sy) * w + sx];
                } else {
                    double fy = (y + 0.5) * h / static_cast<double>(target) - 0.5;
                    double fx = (x + 0.5) * w / static_cast<double>(target) - 0.5;
                    int y0 = static_cast<int>(std::floor(fy)), x0 = static_cast<int>(std::floor(fx));
                    double ty = fy - y0, tx = fx - x0;
                    auto px = [&](int yy, int xx) {
                        yy = std::clamp(yy, 0, h - 1);
                        xx = std::clamp(xx, 0, w - 1);
                        return static_cast<double>(img.v[(static_cast<std::size_t>(ch) * h + yy) * w + xx]);
                    };
                    v = static_cast<float>((1 - ty) * ((1 - tx) * px(y0, x0) + tx * px(y0, x0 + 1)) +
                                           ty * ((1 - tx) * px(y0 + 1, x0) + tx * px(y0 + 1, x0 + 1)));
                }
                out.v[(static_cast<std::size_t>(ch) * target + y) * target + x] = v;
            }
    return out;
}

// Channel conversion: gray->color replicates, color->gray uses the Rec.601
// luma weights.
inline Tensor convert_channels(const Tensor& img, int target_channels) {
    int c = img.dim(0), h = img.dim(1), w = img.dim(2);
    if (c == target_channels) return img;
    Tensor out({target_channels, h, w});
    std::size_t plane = static_cast<std::size_t>(h) * w;
    if (c == 1 && target_channels == 3) {
        for (int ch = 0; ch < 3; ++ch)
            std::copy(img.v.begin(), img.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(ch * plane));
    } else if (c == 3 && target_channels == 1) {
        for (std::size_t i = 0; i < plane; ++i)
            out.v[i] = static_cast<float>(0.299 * img.v[i] + 0.587 * img.v[plane + i] +
                                          0.114 * img.v[2 * plane + i]);
    } else {
        throw IoError("channel conversion " + std::to_string(c) + " -> " +
                      std::to_string(target_channels) + " not supported");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

struct ImageCorpus {
    int channels = 0, size = 0;
    std::vector<Tensor> images; // each {channels, size, size}, values in [0,1]
};

// Loads every .pgm/.ppm under `dir` (sorted by path for determinism),
// center-crops to square, resizes to `size`, converts channels. Undecodable
// files are skipped with a warning on stderr; an empty result is an error.
inline ImageCorpus load_image_corpus(const std::string& dir, int channels, int size,
                                     ResizeMode mode = ResizeMode::bilinear) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("image corpus: not a directory: " + dir);
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::string ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".pgm" || ext == ".ppm") paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    ImageCorpus corpus;
    corpus.channels = channels;
    corpus.size = size;
    for (const auto& p : paths) {
        try {
            Tensor img = read_pnm(p);
            img = center_crop_square(img);
            img = resize_image(img, size, mode);
            img = convert_channels(img, channels);
            corpus.images.push_back(std::move(img));
        } catch (const IoError& e) {
            std::cerr << "warning: skipping " << p << ": " << e.what() << "\n";
        }
    }
    if (corpus.images.empty())
        throw IoError("image corpus: no usable .pgm/.ppm images in " + dir);
    return corpus;
}

// Batch of m images drawn uniformly with replacement, shape {m,c,h,w}.
inline Tensor corpus_batch(const ImageCorpus& corpus, int m, Rng& rng) {
    if (corpus.images.empty()) throw ConfigError("corpus_batch: empty corpus");
    Tensor out({m, corpus.channels, corpus.size, corpus.size});
    std::size_t per = static_cast<std::size_t>(corpus.channels) * corpus.size * corpus.size;
    for (int i = 0; i < m; ++i) {
        const Tensor& img = corpus.images[static_cast<std::size_t>(rng.below(corpus.images.size()))];
        std::copy(img.v.begin(), img.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(i * per));
    }
    return out;
}

} // namespace lisgan
