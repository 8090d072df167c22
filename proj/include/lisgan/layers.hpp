#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "common.hpp"
#include "rng.hpp"
#include "tape.hpp"
#include "tensor.hpp"

namespace lisgan {

// Weight handling of a linear/conv layer: plain weights carry a bias,
// standard weight norm drops the bias (the following TPReLU threshold plays
// that role), affine weight norm re-adds a per-unit bias.
enum class WnMode { none, standard, affine };

inline const char* wn_name(WnMode m) {
    switch (m) {
        case WnMode::none: return "none";
        case WnMode::standard: return "standard";
        case WnMode::affine: return "affine";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Weight normalization: w_eff[r] = g[r] * v[r] / |v[r]|, one row per output
// unit (FC row, conv output filter). v rows must have strictly positive norm.
// ---------------------------------------------------------------------------

inline std::vector<double> wn_row_norms(const Tensor& v, int lead, const std::string& name) {
    std::int64_t rest = v.numel() / lead;
    std::vector<double> norms(static_cast<std::size_t>(lead));
    for (int r = 0; r < lead; ++r) {
        double s = 0.0;
        const float* row = v.v.data() + static_cast<std::size_t>(r) * rest;
        for (std::int64_t j = 0; j < rest; ++j) s += static_cast<double>(row[j]) * row[j];
        double n = std::sqrt(s);
        if (!(n > 0.0))
            throw NumericError(name + ": weight-norm direction row " + std::to_string(r) +
                               " has zero norm");
        norms[static_cast<std::size_t>(r)] = n;
    }
    return norms;
}

inline Tensor wn_effective(const Tensor& v, const Tensor& g, const std::string& name) {
    int lead = static_cast<int>(g.numel());
    std::int64_t rest = v.numel() / lead;
    auto norms = wn_row_norms(v, lead, name);
    Tensor w(v.shape);
    for (int r = 0; r < lead; ++r) {
        float scale = static_cast<float>(g[r] / norms[static_cast<std::size_t>(r)]);
        const float* src = v.v.data() + static_cast<std::size_t>(r) * rest;
        float* dst = w.v.data() + static_cast<std::size_t>(r) * rest;
        for (std::int64_t j = 0; j < rest; ++j) dst[j] = scale * src[j];
    }
    return w;
}

// Given dL/dw_eff, accumulate dL/dv and dL/dg.
//   gg[r] += dot(geff[r], v[r]) / |v[r]|
//   gv[r] += (g[r]/|v[r]|) * geff[r] - (g[r]*dot/|v[r]|^3) * v[r]
inline void wn_backward(const Tensor& v, const Tensor& g, const Tensor& geff,
                        Tensor& gv, Tensor& gg, const std::string& name) {
    int lead = static_cast<int>(g.numel());
    std::int64_t rest = v.numel() / lead;
    auto norms = wn_row_norms(v, lead, name);
    for (int r = 0; r < lead; ++r) {
        const float* vr = v.v.data() + static_cast<std::size_t>(r) * rest;
        const float* er = geff.v.data() + static_cast<std::size_t>(r) * rest;
        float* gvr = gv.v.data() + static_cast<std::size_t>(r) * rest;
        double n = norms[static_cast<std::size_t>(r)];
        double dot = 0.0;
        for (std::int64_t j = 0; j < rest; ++j) dot += static_cast<double>(er[j]) * vr[j];
        gg[r] += static_cast<float>(dot / n);
        double c1 = g[r] / n;
        double c2 = static_cast<double>(g[r]) * dot / (n * n * n);
        for (std::int64_t j = 0; j < rest; ++j)
            gvr[j] += static_cast<float>(c1 * er[j] - c2 * vr[j]);
    }
}

// ---------------------------------------------------------------------------
// Layer definitions
// ---------------------------------------------------------------------------

struct FcLayer {
    std::string name;
    int in = 0, out = 0;
    WnMode wn = WnMode::none;
    Param w; // {out, in}; direction v when wn != none
    Param g; // {out} when wn != none
    Param b; // {out} unless wn == standard

    bool has_g() const { return wn != WnMode::none; }
    bool has_bias() const { return wn != WnMode::standard; }
};

// Strided convolution (downsampling). Weight {out_ch, in_ch, k, k}.
struct ConvLayer {
    std::string name;
    int in_ch = 0, out_ch = 0, k = 1, stride = 1, pad = 0;
    WnMode wn = WnMode::none;
    Param w;
    Param g;
    Param b;

    bool has_g() const { return wn != WnMode::none; }
    bool has_bias() const { return wn != WnMode::standard; }
};

// Fractionally strided (transposed) convolution, out = (in-1)*s - 2p + k.
// Weight {out_ch, in_ch, k, k} so weight-norm rows are output filters for
// every linear layer kind.
struct ConvTLayer {
    std::string name;
    int in_ch = 0, out_ch = 0, k = 1, stride = 1, pad = 0;
    WnMode wn = WnMode::none;
    Param w;
    Param g;
    Param b;

    bool has_g() const { return wn != WnMode::none; }
    bool has_bias() const { return wn != WnMode::standard; }
};

// Thresholded PReLU: f(x) = t + max(0, x-t) + a*min(0, x-t), per channel.
// a = 1 gives the identity, a = 0 gives a ReLU shifted to threshold t.
struct TpreluLayer {
    std::string name;
    int channels = 0;
    Param a; // slope below threshold, init 0.25
    Param t; // threshold, init 0
};

struct SigmoidLayer {
    std::string name;
};

// Zeroes whole channels with probability `rate` during training and rescales
// kept ones by 1/(1-rate); identity at inference and at rate 0 (no RNG draw).
struct DropoutLayer {
    std::string name;
    double rate = 0.0;
};

// Per-example reshape; `to` excludes the batch dimension.
struct ReshapeLayer {
    std::string name;
    std::vector<int> to;
};

using LayerVariant =
    std::variant<FcLayer, ConvLayer, ConvTLayer, TpreluLayer, SigmoidLayer, DropoutLayer, ReshapeLayer>;

struct Layer {
    LayerVariant op;

    const std::string& name() const {
        return std::visit([](const auto& l) -> const std::string& { return l.name; }, op);
    }
};

struct LayerCtx {
    bool track = false;    // accumulate parameter gradients
    bool training = false; // dropout active
    Rng* rng = nullptr;    // dropout mask source
};

// ---------------------------------------------------------------------------
// Fully connected
// ---------------------------------------------------------------------------

inline int fc_op(Tape& t, FcLayer& L, int x, bool track) {
    const Tensor& xv = t.val(x);
    if (xv.rank() != 2 || xv.dim(1) != L.in)
        throw ShapeError(L.name + " (fc): expected input (n," + std::to_string(L.in) + "), got " +
                         xv.shape_str());
    int n = xv.dim(0);

    Tensor weff_store;
    const Tensor* wp = &L.w.value;
    if (L.has_g()) {
        weff_store = wn_effective(L.w.value, L.g.value, L.name);
        wp = &weff_store;
    }

    Tensor y({n, L.out});
    const float* xd = xv.v.data();
    const float* wd = wp->v.data();
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < L.out; ++o) {
            double acc = L.has_bias() ? static_cast<double>(L.b.value[o]) : 0.0;
            const float* xr = xd + static_cast<std::size_t>(i) * L.in;
            const float* wr = wd + static_cast<std::size_t>(o) * L.in;
            for (int j = 0; j < L.in; ++j) acc += static_cast<double>(xr[j]) * wr[j];
            y.at2(i, o) = static_cast<float>(acc);
        }

    bool xneeds = t.needs_grad(x);
    bool needs = xneeds || track;
    std::function<void(Tape&)> back;
    if (needs) {
        int id = t.next_id();
        FcLayer* Lp = &L;
        Tensor weff = L.has_g() ? weff_store : Tensor{};
        back = [Lp, x, id, track, xneeds, weff = std::move(weff)](Tape& tp) {
            const Tensor& gy = tp.grad(id);
            const Tensor& xin = tp.val(x);
            int nn = xin.dim(0);
            const Tensor& wuse = Lp->has_g() ? weff : Lp->w.value;
            if (xneeds) {
                Tensor& gx = tp.grad(x);
                for (int i = 0; i < nn; ++i)
                    for (int j = 0; j < Lp->in; ++j) {
                        double acc = 0.0;
                        for (int o = 0; o < Lp->out; ++o)
                            acc += static_cast<double>(gy.at2(i, o)) * wuse.at2(o, j);
                        gx.at2(i, j) += static_cast<float>(acc);
                    }
            }
            if (track) {
                Tensor gweff({Lp->out, Lp->in});
                for (int o = 0; o < Lp->out; ++o)
                    for (int j = 0; j < Lp->in; ++j) {
                        double acc = 0.0;
                        for (int i = 0; i < nn; ++i)
                            acc += static_cast<double>(gy.at2(i, o)) * xin.at2(i, j);
                        gweff.at2(o, j) = static_cast<float>(acc);
                    }
                if (Lp->has_g()) {
                    wn_backward(Lp->w.value, Lp->g.value, gweff, Lp->w.grad, Lp->g.grad, Lp->name);
                } else {
                    for (std::int64_t i = 0; i < gweff.numel(); ++i) Lp->w.grad[i] += gweff[i];
                }
                if (Lp->has_bias())
                    for (int o = 0; o < Lp->out; ++o) {
                        double acc = 0.0;
                        for (int i = 0; i < nn; ++i) acc += gy.at2(i, o);
                        Lp->b.grad[o] += static_cast<float>(acc);
                    }
            }
        };
    }
    return t.push(std::move(y), needs, std::move(back));
}

// ---------------------------------------------------------------------------
// Strided convolution
// ---------------------------------------------------------------------------

inline void conv_check_input(const std::string& name, const Tensor& x, int in_ch) {
    if (x.rank() != 4 || x.dim(1) != in_ch)
        throw ShapeError(name + " (conv): expected input (n," + std::to_string(in_ch) +
                         ",h,w), got " + x.shape_str());
}

inline int conv_out_extent(const std::string& name, int in, int k, int s, int p) {
    int num = in + 2 * p - k;
    if (num < 0 || num % s != 0)
        throw ShapeError(name + ": kernel " + std::to_string(k) + " stride " + std::to_string(s) +
                         " pad " + std::to_string(p) + " does not tile input extent " +
                         std::to_string(in));
    return num / s + 1;
}

inline int conv_op(Tape& t, ConvLayer& L, int x, bool track) {
    const Tensor& xv = t.val(x);
    conv_check_input(L.name, xv, L.in_ch);
    int n = xv.dim(0), h = xv.dim(2), w = xv.dim(3);
    int ho = conv_out_extent(L.name, h, L.k, L.stride, L.pad);
    int wo = conv_out_extent(L.name, w, L.k, L.stride, L.pad);

    Tensor weff_store;
    const Tensor* wp = &L.w.value;
    if (L.has_g()) {
        weff_store = wn_effective(L.w.value, L.g.value, L.name);
        wp = &weff_store;
    }

    auto xat = [&](const Tensor& tt, int ni, int c, int yy, int xx) -> float {
        return tt.v[((static_cast<std::size_t>(ni) * tt.dim(1) + c) * tt.dim(2) + yy) * tt.dim(3) + xx];
    };
    auto wat = [&](const Tensor& tt, int co, int ci, int ky, int kx) -> float {
        return tt.v[((static_cast<std::size_t>(co) * L.in_ch + ci) * L.k + ky) * L.k + kx];
    };

    Tensor y({n, L.out_ch, ho, wo});
    for (int ni = 0; ni < n; ++ni)
        for (int co = 0; co < L.out_ch; ++co)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    double acc = L.has_bias() ? static_cast<double>(L.b.value[co]) : 0.0;
                    for (int ci = 0; ci < L.in_ch; ++ci)
                        for (int ky = 0; ky < L.k; ++ky) {
                            int iy = oy * L.stride - L.pad + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < L.k; ++kx) {
                                int ix = ox * L.stride - L.pad + kx;
                                if (ix < 0 || ix >= w) continue;
                                acc += static_cast<double>(xat(xv, ni, ci, iy, ix)) * wat(*wp, co, ci, ky, kx);
                            }
                        }
                    y.v[((static_cast<std::size_t>(ni) * L.out_ch + co) * ho + oy) * wo + ox] =
                        static_cast<float>(acc);
                }

    bool xneeds = t.needs_grad(x);
    bool needs = xneeds || track;
    std::function<void(Tape&)> back;
    if (needs) {
        int id = t.next_id();
        ConvLayer* Lp = &L;
        Tensor weff = L.has_g() ? weff_store : Tensor{};
        back = [Lp, x, id, track, xneeds, weff = std::move(weff), h, w, ho, wo](Tape& tp) {
            const Tensor& gy = tp.grad(id);
            const Tensor& xin = tp.val(x);
            const Tensor& wuse = Lp->has_g() ? weff : Lp->w.value;
            int n = xin.dim(0);
            Tensor gweff;
            if (track) gweff = Tensor(Lp->w.value.shape);
            Tensor* gx = xneeds ? &tp.grad(x) : nullptr;
            auto idx4 = [](const Tensor& tt, int a, int b, int c, int d) -> std::size_t {
                return ((static_cast<std::size_t>(a) * tt.dim(1) + b) * tt.dim(2) + c) * tt.dim(3) + d;
            };
            for (int ni = 0; ni < n; ++ni)
                for (int co = 0; co < Lp->out_ch; ++co)
                    for (int oy = 0; oy < ho; ++oy)
                        for (int ox = 0; ox < wo; ++ox) {
                            float g = gy.v[((static_cast<std::size_t>(ni) * Lp->out_ch + co) * ho + oy) * wo + ox];
                            if (g == 0.0f) continue;
                            if (track && Lp->has_bias()) Lp->b.grad[co] += g;
                            for (int ci = 0; ci < Lp->in_ch; ++ci)
                                for (int ky = 0; ky < Lp->k; ++ky) {
                                    int iy = oy * Lp->stride - Lp->pad + ky;
                                    if (iy < 0 || iy >= h) continue;
                                    for (int kx = 0; kx < Lp->k; ++kx) {
                                        int ix = ox * Lp->stride - Lp->pad + kx;
                                        if (ix < 0 || ix >= w) continue;
                                        std::size_t wi = ((static_cast<std::size_t>(co) * Lp->in_ch + ci) * Lp->k + ky) * Lp->k + kx;
                                        if (gx) gx->v[idx4(xin, ni, ci, iy, ix)] += g * wuse.v[wi];
                                        if (track) gweff.v[wi] += g * xin.v[idx4(xin, ni, ci, iy, ix)];
                                    }
                                }
                        }
            if (track) {
                if (Lp->has_g())
                    wn_backward(Lp->w.value, Lp->g.value, gweff, Lp->w.grad, Lp->g.grad, Lp->name);
                else
                    for (std::int64_t i = 0; i < gweff.numel(); ++i) Lp->w.grad[i] += gweff[i];
            }
        };
    }
    return t.push(std::move(y), needs, std::move(back));
}

// ---------------------------------------------------------------------------
// Fractionally strided convolution
// ---------------------------------------------------------------------------

inline int convt_op(Tape& t, ConvTLayer& L, int x, bool track) {
    const Tensor& xv = t.val(x);
    conv_check_input(L.name, xv, L.in_ch);
    int n = xv.dim(0), h = xv.dim(2), w = xv.dim(3);
    int ho = (h - 1) * L.stride - 2 * L.pad + L.k;
    int wo = (w - 1) * L.stride - 2 * L.pad + L.k;
    if (ho <= 0 || wo <= 0)
        throw ShapeError(L.name + ": fractionally strided output extent is not positive for input " +
                         xv.shape_str());

    Tensor weff_store;
    const Tensor* wp = &L.w.value;
    if (L.has_g()) {
        weff_store = wn_effective(L.w.value, L.g.value, L.name);
        wp = &weff_store;
    }

    Tensor y({n, L.out_ch, ho, wo});
    if (L.has_bias())
        for (int ni = 0; ni < n; ++ni)
            for (int co = 0; co < L.out_ch; ++co) {
                float bv = L.b.value[co];
                float* dst = y.v.data() + ((static_cast<std::size_t>(ni) * L.out_ch + co) * ho) * wo;
                for (int i = 0; i < ho * wo; ++i) dst[i] = bv;
            }
    const float* wd = wp->v.data();
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < L.in_ch; ++ci)
            for (int iy = 0; iy < h; ++iy)
                for (int ix = 0; ix < w; ++ix) {
                    float xval = xv.v[((static_cast<std::size_t>(ni) * L.in_ch + ci) * h + iy) * w + ix];
                    for (int co = 0; co < L.out_ch; ++co)
                        for (int ky = 0; ky < L.k; ++ky) {
                            int oy = iy * L.stride - L.pad + ky;
                            if (oy < 0 || oy >= ho) continue;
                            for (int kx = 0; kx < L.k; ++kx) {
                                int ox = ix * L.stride - L.pad + kx;
                                if (ox < 0 || ox >= wo) continue;
                                y.v[((static_cast<std::size_t>(ni) * L.out_ch + co) * ho + oy) * wo + ox] +=
                                    xval * wd[((static_cast<std::size_t>(co) * L.in_ch + ci) * L.k + ky) * L.k + kx];
                            }
                        }
                }

    bool xneeds = t.needs_grad(x);
    bool needs = xneeds || track;
    std::function<void(Tape&)> back;
    if (needs) {
        int id = t.next_id();
        ConvTLayer* Lp = &L;
        Tensor weff = L.has_g() ? weff_store : Tensor{};
        back = [Lp, x, id, track, xneeds, weff = std::move(weff), h, w, ho, wo](Tape& tp) {
            const Tensor& gy = tp.grad(id);
            const Tensor& xin = tp.val(x);
            const Tensor& wuse = Lp->has_g() ? weff : Lp->w.value;
            int n = xin.dim(0);
            Tensor gweff;
            if (track) gweff = Tensor(Lp->w.value.shape);
            Tensor* gx = xneeds ? &tp.grad(x) : nullptr;
            for (int ni = 0; ni < n; ++ni)
                for (int ci = 0; ci < Lp->in_ch; ++ci)
                    for (int iy = 0; iy < h; ++iy)
                        for (int ix = 0; ix < w; ++ix) {
                            std::size_t xi = ((static_cast<std::size_t>(ni) * Lp->in_ch + ci) * h + iy) * w + ix;
                            float xval = xin.v[xi];
                            double accx = 0.0;
                            for (int co = 0; co < Lp->out_ch; ++co)
                                for (int ky = 0; ky < Lp->k; ++ky) {
                                    int oy = iy * Lp->stride - Lp->pad + ky;
                                    if (oy < 0 || oy >= ho) continue;
                                    for (int kx = 0; kx < Lp->k; ++kx) {
                                        int ox = ix * Lp->stride - Lp->pad + kx;
                                        if (ox < 0 || ox >= wo) continue;
                                        float g = gy.v[((static_cast<std::size_t>(ni) * Lp->out_ch + co) * ho + oy) * wo + ox];
                                        std::size_t wi = ((static_cast<std::size_t>(co) * Lp->in_ch + ci) * Lp->k + ky) * Lp->k + kx;
                                        if (gx) accx += static_cast<double>(g) * wuse.v[wi];
                                        if (track) gweff.v[wi] += g * xval;
                                    }
                                }
                            if (gx) gx->v[xi] += static_cast<float>(accx);
                        }
            if (track) {
                if (Lp->has_bias())
                    for (int ni = 0; ni < n; ++ni)
                        for (int co = 0; co < Lp->out_ch; ++co) {
                            double acc = 0.0;
                            const float* src = gy.v.data() + ((static_cast<std::size_t>(ni) * Lp->out_ch + co) * ho) * wo;
                            for (int i = 0; i < ho * wo; ++i) acc += src[i];
                            Lp->b.grad[co] += static_cast<float>(acc);
                        }
                if (Lp->has_g())
                    wn_backward(Lp->w.value, Lp->g.value, gweff, Lp->w.grad, Lp->g.grad, Lp->name);
                else
                    for (std::int64_t i = 0; i < gweff.numel(); ++i) Lp->w.grad[i] += gweff[i];
            }
        };
    }
    return t.push(std::move(y), needs, std::move(back));
}

// ---------------------------------------------------------------------------
// TPReLU
// ---------------------------------------------------------------------------

// Channel index of flat element i for rank-2 {n,f} or rank-4 {n,c,h,w} input.
inline int tprelu_check(const TpreluLayer& L, const Tensor& x) {
    if (x.rank() == 2) {
        if (x.dim(1) != L.channels)
            throw ShapeError(L.name + " (tprelu): expected " + std::to_string(L.channels) +
                             " features, got " + x.shape_str());
        return 1;
    }
    if (x.rank() == 4) {
        if (x.dim(1) != L.channels)
            throw ShapeError(L.name + " (tprelu): expected " + std::to_string(L.channels) +
                             " channels, got " + x.shape_str());
        return x.dim(2) * x.dim(3);
    }
    throw ShapeError(L.name + " (tprelu): rank-2 or rank-4 input required, got " + x.shape_str());
}

inline int tprelu_op(Tape& t, TpreluLayer& L, int x, bool track) {
    const Tensor& xv = t.val(x);
    int spatial = tprelu_check(L, xv);
    Tensor y(xv.shape);
    for (std::int64_t i = 0; i < xv.numel(); ++i) {
        int c = static_cast<int>((i / spatial) % L.channels);
        float a = L.a.value[c], th = L.t.value[c], v = xv[i];
        y[i] = v > th ? v : th + a * (v - th);
    }
    bool xneeds = t.needs_grad(x);
    bool needs = xneeds || track;
    std::function<void(Tape&)> back;
    if (needs) {
        int id = t.next_id();
        TpreluLayer* Lp = &L;
        back = [Lp, x, id, track, xneeds, spatial](Tape& tp) {
            const Tensor& g = tp.grad(id);
            const Tensor& xin = tp.val(x);
            Tensor* gx = xneeds ? &tp.grad(x) : nullptr;
            for (std::int64_t i = 0; i < xin.numel(); ++i) {
                int c = static_cast<int>((i / spatial) % Lp->channels);
                float a = Lp->a.value[c], th = Lp->t.value[c], v = xin[i], gi = g[i];
                if (v > th) {
                    if (gx) (*gx)[i] += gi;
                } else {
                    if (gx) (*gx)[i] += a * gi;
                    if (track) {
                        Lp->t.grad[c] += (1.0f - a) * gi;
                        Lp->a.grad[c] += (v - th) * gi;
                    }
                }
            }
        };
    }
    return t.push(std::move(y), needs, std::move(back));
}

// ---------------------------------------------------------------------------
// Sigmoid
// ---------------------------------------------------------------------------

inline int sigmoid_op(Tape& t, SigmoidLayer&, int x) {
    const Tensor& xv = t.val(x);
    Tensor y(xv.shape);
    for (std::int64_t i = 0; i < xv.numel(); ++i)
        y[i] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(xv[i]))));
    bool needs = t.needs_grad(x);
    std::function<void(Tape&)> back;
    if (needs) {
        int id = t.next_id();
        back = [x, id](Tape& tp) {
            const Tensor& g = tp.grad(id);
            const Tensor& yv = tp.val(id);
            Tensor& gx = tp.grad(x);
            for (std::int64_t i = 0; i < yv.numel(); ++i)
                gx[i] += g[i] * yv[i] * (1.0f - yv[i]);
        };
    }
    return t.push(std::move(y), needs, std::move(back));
}

// ---------------------------------------------------------------------------
// Spatial dropout
// ---------------------------------------------------------------------------

// Core with an injected 0/1 keep-mask: {n, f} for rank-2 inputs, {n, c} for
// rank-4 (whole channels drop together). Exposed so gradient checks can pin
// the mask.
inline int dropout_op_with_mask(Tape& t, DropoutLayer& L, int x, Tensor mask) {
    const Tensor& xv = t.val(x);
    if (L.rate < 0.0 || L.rate >= 1.0)
        throw ConfigError(L.name + " (dropout): rate must lie in [0,1), got " + std::to_string(L.rate));
    int spatial = 1;
    std::int64_t chans = 0;
    if (xv.rank() == 2) {
        chans = static_cast<std::int64_t>(xv.dim(0)) * xv.dim(1);
    } else if (xv.rank() == 4) {
        chans = static_cast<std::int64_t>(xv.dim(0)) * xv.dim(1);
        spatial = xv.dim(2) * xv.dim(3);
    } else {
        throw ShapeError(L.name + " (dropout): rank-2 or rank-4 input required, got " + xv.shape_str());
    }
    if (mask.numel() != chans)
        throw ShapeError(L.name + " (dropout): mask has " + std::to_string(mask.numel()) +
                         " entries, need " + std::to_string(chans));
    float scale = static_cast<float>(1.0 / (1.0 - L.rate));
    Tensor y(xv.shape);
    for (std::int64_t i = 0; i < xv.numel(); ++i)
        y[i] = xv[i] * mask[i / spatial] * scale;
    bool needs = t.needs_grad(x);
    std::function<void(Tape&)> back;
    if (needs) {
        int id = t.next_id();
        back = [x, id, scale, spatial, mask = std::move(mask)](Tape& tp) {
            const Tensor& g = tp.grad(id);
            Tensor& gx = tp.grad(x);
            for (std::int64_t i = 0; i < g.numel(); ++i)
                gx[i] += g[i] * mask[i / spatial] * scale;
        };
    }
    return t.push(std::move(y), needs, std::move(back));
}

// Identity at inference and at rate 0; neither consumes RNG draws.
inline int dropout_op(Tape& t, DropoutLayer& L, int x, bool training, Rng* rng) {
    if (L.rate < 0.0 || L.rate >= 1.0)
        throw ConfigError(L.name + " (dropout): rate must lie in [0,1), got " + std::to_string(L.rate));
    if (!training || L.rate == 0.0) return x;
    if (!rng) throw ConfigError(L.name + " (dropout): training mode requires an RNG");
    const Tensor& xv = t.val(x);
    std::int64_t chans = (xv.rank() == 4 || xv.rank() == 2)
                             ? static_cast<std::int64_t>(xv.dim(0)) * xv.dim(1)
                             : -1;
    if (chans < 0)
        throw ShapeError(L.name + " (dropout): rank-2 or rank-4 input required, got " + xv.shape_str());
    Tensor mask({static_cast<int>(chans)});
    for (std::int64_t i = 0; i < chans; ++i)
        mask[i] = rng->uniform01() < L.rate ? 0.0f : 1.0f;
    return dropout_op_with_mask(t, L, x, std::move(mask));
}

// ---------------------------------------------------------------------------
// Reshape
// ---------------------------------------------------------------------------

inline int reshape_op(Tape& t, ReshapeLayer& L, int x) {
    const Tensor& xv = t.val(x);
    if (xv.rank() < 1) throw ShapeError(L.name + " (reshape): input must have a batch dimension");
    int n = xv.dim(0);
    std::int64_t per = 1;
    for (int d : L.to) per *= d;
    if (n == 0 || per * n != xv.numel())
        throw ShapeError(L.name + " (reshape): cannot reshape " + xv.shape_str() + " to per-example " +
                         Tensor::shape_string(L.to));
    std::vector<int> shp;
    shp.push_back(n);
    shp.insert(shp.end(), L.to.begin(), L.to.end());
    Tensor y(std::move(shp), xv.v);
    bool needs = t.needs_grad(x);
    std::function<void(Tape&)> back;
    if (needs) {
        int id = t.next_id();
        back = [x, id](Tape& tp) {
            const Tensor& g = tp.grad(id);
            Tensor& gx = tp.grad(x);
            for (std::int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
        };
    }
    return t.push(std::move(y), needs, std::move(back));
}

// ---------------------------------------------------------------------------
// Dispatch, parameter enumeration, initialization
// ---------------------------------------------------------------------------

inline int layer_op(Tape& t, Layer& L, int x, const LayerCtx& ctx) {
    return std::visit(
        [&](auto& l) -> int {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, FcLayer>) return fc_op(t, l, x, ctx.track);
            else if constexpr (std::is_same_v<T, ConvLayer>) return conv_op(t, l, x, ctx.track);
            else if constexpr (std::is_same_v<T, ConvTLayer>) return convt_op(t, l, x, ctx.track);
            else if constexpr (std::is_same_v<T, TpreluLayer>) return tprelu_op(t, l, x, ctx.track);
            else if constexpr (std::is_same_v<T, SigmoidLayer>) return sigmoid_op(t, l, x);
            else if constexpr (std::is_same_v<T, DropoutLayer>) return dropout_op(t, l, x, ctx.training, ctx.rng);
            else return reshape_op(t, l, x);
        },
        L.op);
}

inline Tensor layer_forward(Layer& L, const Tensor& x, const LayerCtx& ctx = {}) {
    Tape t;
    int in = t.leaf(x, false);
    LayerCtx c = ctx;
    c.track = false;
    int out = layer_op(t, L, in, c);
    return std::move(t.val(out));
}

inline std::vector<Param*> layer_params(Layer& L) {
    std::vector<Param*> out;
    std::visit(
        [&](auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, FcLayer> || std::is_same_v<T, ConvLayer> ||
                          std::is_same_v<T, ConvTLayer>) {
                out.push_back(&l.w);
                if (l.has_g()) out.push_back(&l.g);
                if (l.has_bias()) out.push_back(&l.b);
            } else if constexpr (std::is_same_v<T, TpreluLayer>) {
                out.push_back(&l.a);
                out.push_back(&l.t);
            }
        },
        L.op);
    return out;
}

// Draws weights elementwise from N(0, stddev) in row-major order, zeroes
// biases, sets weight-norm magnitudes to the initial row norms (so the
// effective weight at init equals the raw draw), and gives TPReLU slopes 0.25
// with thresholds 0.
inline void init_layer(Layer& L, Rng& rng, double stddev = 0.05) {
    std::visit(
        [&](auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, FcLayer> || std::is_same_v<T, ConvLayer> ||
                          std::is_same_v<T, ConvTLayer>) {
                for (std::int64_t i = 0; i < l.w.value.numel(); ++i)
                    l.w.value[i] = static_cast<float>(rng.normal(0.0, stddev));
                if (l.has_g()) {
                    int lead = static_cast<int>(l.g.value.numel());
                    auto norms = wn_row_norms(l.w.value, lead, l.name);
                    for (int r = 0; r < lead; ++r)
                        l.g.value[r] = static_cast<float>(norms[static_cast<std::size_t>(r)]);
                }
                if (l.has_bias()) l.b.value.fill(0.0f);
            } else if constexpr (std::is_same_v<T, TpreluLayer>) {
                l.a.value.fill(0.25f);
                l.t.value.fill(0.0f);
            }
        },
        L.op);
}

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

inline Layer make_fc(std::string name, int in, int out, WnMode wn) {
    FcLayer l;
    l.name = std::move(name);
    l.in = in;
    l.out = out;
    l.wn = wn;
    l.w = Param(Tensor({out, in}));
    if (l.has_g()) l.g = Param(Tensor({out}));
    if (l.has_bias()) l.b = Param(Tensor({out}));
    return Layer{std::move(l)};
}

inline Layer make_conv(std::string name, int in_ch, int out_ch, int k, int stride, int pad, WnMode wn) {
    ConvLayer l;
    l.name = std::move(name);
    l.in_ch = in_ch;
    l.out_ch = out_ch;
    l.k = k;
    l.stride = stride;
    l.pad = pad;
    l.wn = wn;
    l.w = Param(Tensor({out_ch, in_ch, k, k}));
    if (l.has_g()) l.g = Param(Tensor({out_ch}));
    if (l.has_bias()) l.b = Param(Tensor({out_ch}));
    return Layer{std::move(l)};
}

inline Layer make_convt(std::string name, int in_ch, int out_ch, int k, int stride, int pad, WnMode wn) {
    ConvTLayer l;
    l.name = std::move(name);
    l.in_ch = in_ch;
    l.out_ch = out_ch;
    l.k = k;
    l.stride = stride;
    l.pad = pad;
    l.wn = wn;
    l.w = Param(Tensor({out_ch, in_ch, k, k}));
    if (l.has_g()) l.g = Param(Tensor({out_ch}));
    if (l.has_bias()) l.b = Param(Tensor({out_ch}));
    return Layer{std::move(l)};
}

inline Layer make_tprelu(std::string name, int channels) {
    TpreluLayer l;
    l.name = std::move(name);
    l.channels = channels;
    l.a = Param(Tensor({channels}));
    l.t = Param(Tensor({channels}));
    l.a.value.fill(0.25f);
    return Layer{std::move(l)};
}

inline Layer make_sigmoid(std::string name) { return Layer{SigmoidLayer{std::move(name)}}; }

inline Layer make_dropout(std::string name, double rate) {
    return Layer{DropoutLayer{std::move(name), rate}};
}

inline Layer make_reshape(std::string name, std::vector<int> to) {
    return Layer{ReshapeLayer{std::move(name), std::move(to)}};
}

} // namespace lisgan
