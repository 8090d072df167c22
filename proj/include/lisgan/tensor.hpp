#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"

namespace lisgan {

// Dense row-major float32 tensor. Rank is dynamic; training code uses
// {n, features} for vector data and {n, c, h, w} for images.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> v;

    Tensor() = default;

    explicit Tensor(std::vector<int> shp) : shape(std::move(shp)) {
        v.assign(static_cast<std::size_t>(numel_of(shape)), 0.0f);
    }

    Tensor(std::vector<int> shp, std::vector<float> vals) : shape(std::move(shp)), v(std::move(vals)) {
        if (static_cast<std::int64_t>(v.size()) != numel_of(shape))
            throw ShapeError("tensor: value count " + std::to_string(v.size()) +
                             " does not match shape " + shape_string(shape));
    }

    static std::int64_t numel_of(const std::vector<int>& s) {
        std::int64_t n = 1;
        for (int d : s) {
            if (d < 0) throw ShapeError("tensor: negative dimension in shape " + shape_string(s));
            n *= d;
        }
        return n;
    }

    static std::string shape_string(const std::vector<int>& s) {
        std::ostringstream os;
        os << "(";
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
        os << ")";
        return os.str();
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(v.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    std::string shape_str() const { return shape_string(shape); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    float& operator[](std::int64_t i) { return v[static_cast<std::size_t>(i)]; }
    float operator[](std::int64_t i) const { return v[static_cast<std::size_t>(i)]; }

    // 2-D accessor for {rows, cols} tensors.
    float& at2(int r, int c) { return v[static_cast<std::size_t>(r) * dim(1) + c]; }
    float at2(int r, int c) const { return v[static_cast<std::size_t>(r) * dim(1) + c]; }

    void fill(float x) { std::fill(v.begin(), v.end(), x); }

    bool all_finite() const {
        for (float x : v)
            if (!is_finite(x)) return false;
        return true;
    }
};

inline Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

// Noise carries a provenance tag so losses that must anchor to the prior draw
// (not a derived z') can assert they were handed the right tensor.
enum class NoiseProvenance { prior_draw, derived };

struct NoiseBatch {
    Tensor values; // {m, n_z}
    NoiseProvenance provenance = NoiseProvenance::prior_draw;
};

} // namespace lisgan
