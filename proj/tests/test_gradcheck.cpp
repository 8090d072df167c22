// Finite-difference gradient checks for every layer kind, run on randomized
// shapes, weight-norm modes and parameter values. The reference forward lives
// in support/oracles.hpp and is independent of the library implementation.

#include <catch2/catch_amalgamated.hpp>

#include <lisgan/layers.hpp>
#include <lisgan/rng.hpp>

#include "support/oracles.hpp"

using lisgan::Layer;
using lisgan::Param;
using lisgan::Rng;
using lisgan::Stream;
using lisgan::Tensor;
using lisgan::WnMode;
using oracles::gradcheck_layer;
using oracles::GradCheckReport;

namespace {

constexpr int kInstances = 21;

Tensor randn(std::vector<int> shape, Rng& rng, double stddev = 1.0) {
    Tensor t(std::move(shape));
    for (auto& e : t.v) e = static_cast<float>(rng.normal(0.0, stddev));
    return t;
}

// Move every parameter off its init point; zero biases and thresholds would
// leave entire gradient paths unexercised.
void scramble_params(Layer& L, Rng& rng) {
    for (Param* p : lisgan::layer_params(L)) {
        for (auto& e : p->value.v) e = static_cast<float>(rng.normal(0.0, 0.6));
    }
}

WnMode wn_of(int i) {
    switch (i % 3) {
        case 0: return WnMode::none;
        case 1: return WnMode::standard;
        default: return WnMode::affine;
    }
}

void require_clean(const GradCheckReport& rep, int inst) {
    INFO("instance " << inst << ", " << rep.checked << " coordinates, worst: " << rep.worst_where);
    REQUIRE(rep.checked > 0);
    REQUIRE(rep.failed == 0);
}

} // namespace

TEST_CASE("fc gradients match finite differences", "[gradcheck]") {
    for (int inst = 0; inst < kInstances; ++inst) {
        Rng rng(100 + inst, Stream::init);
        int n = 1 + static_cast<int>(rng.below(4));
        int in = 1 + static_cast<int>(rng.below(7));
        int out = 1 + static_cast<int>(rng.below(5));
        Layer L = lisgan::make_fc("fc", in, out, wn_of(inst));
        scramble_params(L, rng);
        Tensor x = randn({n, in}, rng);
        Tensor proj = randn({n, out}, rng);
        require_clean(gradcheck_layer(L, x, proj), inst);
    }
}

TEST_CASE("conv gradients match finite differences", "[gradcheck]") {
    for (int inst = 0; inst < kInstances; ++inst) {
        Rng rng(200 + inst, Stream::init);
        int n = 1 + static_cast<int>(rng.below(2));
        int ic = 1 + static_cast<int>(rng.below(3));
        int oc = 1 + static_cast<int>(rng.below(3));
        int k = 1 + static_cast<int>(rng.below(3));
        int s = 1 + static_cast<int>(rng.below(2));
        int p = static_cast<int>(rng.below(2));
        // Input extent chosen so (h + 2p - k) tiles exactly by the stride.
        int h = 0;
        while (h < 1 || h > 6) h = k - 2 * p + s * static_cast<int>(rng.below(4));
        Layer L = lisgan::make_conv("conv", ic, oc, k, s, p, wn_of(inst));
        scramble_params(L, rng);
        int ho = (h + 2 * p - k) / s + 1;
        Tensor x = randn({n, ic, h, h}, rng);
        Tensor proj = randn({n, oc, ho, ho}, rng);
        require_clean(gradcheck_layer(L, x, proj), inst);
    }
}

TEST_CASE("convt gradients match finite differences", "[gradcheck]") {
    for (int inst = 0; inst < kInstances; ++inst) {
        Rng rng(300 + inst, Stream::init);
        int n = 1 + static_cast<int>(rng.below(2));
        int ic = 1 + static_cast<int>(rng.below(3));
        int oc = 1 + static_cast<int>(rng.below(3));
        int k = 0, s = 0, p = 0, h = 0, ho = 0;
        while (ho < 1) {
            k = 1 + static_cast<int>(rng.below(3));
            s = 1 + static_cast<int>(rng.below(2));
            p = static_cast<int>(rng.below(2));
            h = 1 + static_cast<int>(rng.below(4));
            ho = (h - 1) * s - 2 * p + k;
        }
        Layer L = lisgan::make_convt("convt", ic, oc, k, s, p, wn_of(inst));
        scramble_params(L, rng);
        Tensor x = randn({n, ic, h, h}, rng);
        Tensor proj = randn({n, oc, ho, ho}, rng);
        require_clean(gradcheck_layer(L, x, proj), inst);
    }
}

TEST_CASE("tprelu gradients match finite differences", "[gradcheck]") {
    for (int inst = 0; inst < kInstances; ++inst) {
        Rng rng(400 + inst, Stream::init);
        int n = 1 + static_cast<int>(rng.below(3));
        int c = 1 + static_cast<int>(rng.below(4));
        Layer L = lisgan::make_tprelu("act", c);
        scramble_params(L, rng);
        bool spatial = inst % 2 == 0;
        int h = spatial ? 1 + static_cast<int>(rng.below(3)) : 1;
        Tensor x = spatial ? randn({n, c, h, h}, rng) : randn({n, c}, rng);
        // Finite differences straddle the threshold kink; push every
        // coordinate at least 2*eps away from its channel threshold.
        auto& tl = std::get<lisgan::TpreluLayer>(L.op);
        int per = spatial ? h * h : 1;
        for (std::int64_t i = 0; i < x.numel(); ++i) {
            float th = tl.t.value[(i / per) % c];
            if (std::abs(x[i] - th) < 0.01f) x[i] = th + (x[i] >= th ? 0.05f : -0.05f);
        }
        Tensor proj = randn(x.shape, rng);
        require_clean(gradcheck_layer(L, x, proj), inst);
    }
}

TEST_CASE("sigmoid gradients match finite differences", "[gradcheck]") {
    for (int inst = 0; inst < kInstances; ++inst) {
        Rng rng(500 + inst, Stream::init);
        int n = 1 + static_cast<int>(rng.below(3));
        Layer L = lisgan::make_sigmoid("sig");
        Tensor x;
        if (inst % 2 == 0) {
            int c = 1 + static_cast<int>(rng.below(3));
            int h = 1 + static_cast<int>(rng.below(3));
            x = randn({n, c, h, h}, rng, 2.0);
        } else {
            x = randn({n, 1 + static_cast<int>(rng.below(6))}, rng, 2.0);
        }
        Tensor proj = randn(x.shape, rng);
        require_clean(gradcheck_layer(L, x, proj), inst);
    }
}

TEST_CASE("dropout gradients match finite differences under a pinned mask", "[gradcheck]") {
    for (int inst = 0; inst < kInstances; ++inst) {
        Rng rng(600 + inst, Stream::init);
        int n = 1 + static_cast<int>(rng.below(3));
        int c = 1 + static_cast<int>(rng.below(4));
        double rate = 0.1 + 0.6 * rng.uniform01();
        Layer L = lisgan::make_dropout("drop", rate);
        bool spatial = inst % 2 == 0;
        int h = spatial ? 1 + static_cast<int>(rng.below(3)) : 1;
        Tensor x = spatial ? randn({n, c, h, h}, rng) : randn({n, c}, rng);
        Tensor mask({n * c});
        bool any = false;
        for (auto& e : mask.v) {
            e = rng.uniform01() < 0.5 ? 0.0f : 1.0f;
            any = any || e > 0.0f;
        }
        if (!any) mask[0] = 1.0f;
        Tensor proj = randn(x.shape, rng);
        require_clean(gradcheck_layer(L, x, proj, &mask), inst);
    }
}

TEST_CASE("reshape gradients match finite differences", "[gradcheck]") {
    for (int inst = 0; inst < kInstances; ++inst) {
        Rng rng(700 + inst, Stream::init);
        int n = 1 + static_cast<int>(rng.below(3));
        int c = 1 + static_cast<int>(rng.below(3));
        int h = 1 + static_cast<int>(rng.below(3));
        bool flatten = inst % 2 == 0;
        Layer L = flatten ? lisgan::make_reshape("flat", {c * h * h})
                          : lisgan::make_reshape("unflat", {c, h, h});
        Tensor x = flatten ? randn({n, c, h, h}, rng) : randn({n, c * h * h}, rng);
        Tensor proj = flatten ? randn({n, c * h * h}, rng) : randn({n, c, h, h}, rng);
        require_clean(gradcheck_layer(L, x, proj), inst);
    }
}
