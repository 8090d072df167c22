#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "common.hpp"
#include "layers.hpp"
#include "losses.hpp"
#include "rng.hpp"
#include "tape.hpp"
#include "tensor.hpp"

namespace lisgan {

enum class Role : int { generator = 0, discriminator = 1, reverser = 2 };

inline const char* role_name(Role r) {
    switch (r) {
        case Role::generator: return "generator";
        case Role::discriminator: return "discriminator";
        case Role::reverser: return "reverser";
    }
    return "?";
}

// Declarative, serializable description of one layer in a stack. Input widths
// are never stored; they are inferred by walking the chain from the network
// input, which is also where invalid chains are rejected.
struct LayerSpec {
    enum class Kind : int { fc = 0, conv = 1, convt = 2, tprelu = 3, sigmoid = 4, dropout = 5, reshape = 6 };
    Kind kind = Kind::fc;
    WnMode wn = WnMode::none;
    int units = 0; // fc width / conv filters / tprelu channels (0 = infer from input)
    int k = 0, stride = 1, pad = 0;
    double rate = 0.0;
    std::vector<int> reshape_to;

    static LayerSpec fc(int units, WnMode wn) {
        LayerSpec s;
        s.kind = Kind::fc;
        s.units = units;
        s.wn = wn;
        return s;
    }
    static LayerSpec conv(int filters, int k, int stride, int pad, WnMode wn) {
        LayerSpec s;
        s.kind = Kind::conv;
        s.units = filters;
        s.k = k;
        s.stride = stride;
        s.pad = pad;
        s.wn = wn;
        return s;
    }
    static LayerSpec convt(int filters, int k, int stride, int pad, WnMode wn) {
        LayerSpec s;
        s.kind = Kind::convt;
        s.units = filters;
        s.k = k;
        s.stride = stride;
        s.pad = pad;
        s.wn = wn;
        return s;
    }
    static LayerSpec tprelu() {
        LayerSpec s;
        s.kind = Kind::tprelu;
        return s;
    }
    static LayerSpec sigmoid() {
        LayerSpec s;
        s.kind = Kind::sigmoid;
        return s;
    }
    static LayerSpec dropout(double rate) {
        LayerSpec s;
        s.kind = Kind::dropout;
        s.rate = rate;
        return s;
    }
    static LayerSpec reshape(std::vector<int> to) {
        LayerSpec s;
        s.kind = Kind::reshape;
        s.reshape_to = std::move(to);
        return s;
    }
};

// A network: for generators, n_r residual input-space modules followed by the
// tail stack; for discriminators/reversers, just the stack over `input`.
struct NetworkSpec {
    Role role = Role::generator;
    int n_z = 0;            // latent width (generator input, reverser output)
    int n_r = 0;            // generator residual module count
    std::vector<int> input; // per-example input dims ({n_z} for generators)
    std::vector<LayerSpec> tail;
};

namespace detail {

inline std::string auto_layer_name(Role role, LayerSpec::Kind kind, int index) {
    const char* rp = role == Role::generator ? "g" : role == Role::discriminator ? "d" : "r";
    const char* kp = nullptr;
    switch (kind) {
        case LayerSpec::Kind::fc: kp = "fc"; break;
        case LayerSpec::Kind::conv: kp = "conv"; break;
        case LayerSpec::Kind::convt: kp = "convt"; break;
        case LayerSpec::Kind::tprelu: kp = "act"; break;
        case LayerSpec::Kind::sigmoid: kp = "sig"; break;
        case LayerSpec::Kind::dropout: kp = "drop"; break;
        case LayerSpec::Kind::reshape: kp = "reshape"; break;
    }
    return std::string(rp) + "_" + kp + std::to_string(index);
}

} // namespace detail

// Walks per-example dims through the tail, throwing ShapeError (with the
// generated layer name) where the chain is inconsistent. Returns the final
// per-example dims; optionally records every stage.
inline std::vector<int> infer_chain(const NetworkSpec& spec,
                                    std::vector<std::vector<int>>* stages = nullptr) {
    std::vector<int> cur = spec.role == Role::generator ? std::vector<int>{spec.n_z} : spec.input;
    if (cur.empty()) throw ShapeError(std::string(role_name(spec.role)) + ": empty input geometry");
    if (stages) stages->push_back(cur);
    for (std::size_t li = 0; li < spec.tail.size(); ++li) {
        const LayerSpec& ls = spec.tail[li];
        std::string name = detail::auto_layer_name(spec.role, ls.kind, static_cast<int>(li));
        switch (ls.kind) {
            case LayerSpec::Kind::fc:
                if (cur.size() != 1)
                    throw ShapeError(name + ": fc needs a flat per-example input, got rank " +
                                     std::to_string(cur.size()) + " (insert a reshape)");
                if (ls.units <= 0) throw ShapeError(name + ": fc width must be positive");
                cur = {ls.units};
                break;
            case LayerSpec::Kind::conv: {
                if (cur.size() != 3)
                    throw ShapeError(name + ": conv needs (c,h,w) input, got " + Tensor::shape_string(cur));
                int ho = conv_out_extent(name, cur[1], ls.k, ls.stride, ls.pad);
                int wo = conv_out_extent(name, cur[2], ls.k, ls.stride, ls.pad);
                cur = {ls.units, ho, wo};
                break;
            }
            case LayerSpec::Kind::convt: {
                if (cur.size() != 3)
                    throw ShapeError(name + ": fractionally strided conv needs (c,h,w) input, got " +
                                     Tensor::shape_string(cur));
                int ho = (cur[1] - 1) * ls.stride - 2 * ls.pad + ls.k;
                int wo = (cur[2] - 1) * ls.stride - 2 * ls.pad + ls.k;
                if (ho <= 0 || wo <= 0)
                    throw ShapeError(name + ": output extent not positive for input " +
                                     Tensor::shape_string(cur));
                cur = {ls.units, ho, wo};
                break;
            }
            case LayerSpec::Kind::tprelu:
                // Channel count comes from the input (features for flat input).
                break;
            case LayerSpec::Kind::sigmoid:
                break;
            case LayerSpec::Kind::dropout:
                if (ls.rate < 0.0 || ls.rate >= 1.0)
                    throw ConfigError(name + ": dropout rate must lie in [0,1), got " +
                                      std::to_string(ls.rate));
                break;
            case LayerSpec::Kind::reshape: {
                std::int64_t have = 1, want = 1;
                for (int d : cur) have *= d;
                for (int d : ls.reshape_to) want *= d;
                if (have != want || ls.reshape_to.empty())
                    throw ShapeError(name + ": cannot reshape per-example " + Tensor::shape_string(cur) +
                                     " to " + Tensor::shape_string(ls.reshape_to));
                cur = ls.reshape_to;
                break;
            }
        }
        if (stages) stages->push_back(cur);
    }
    return cur;
}

// The three layers of one residual input-space module:
//   z' = z + fc2(tprelu(wn_fc1(z)))
// fc1 is standard weight norm (no bias), fc2 is plain and zero-initialized so
// the module starts as the identity.
struct LisModuleParams {
    Layer fc1;
    Layer act;
    Layer fc2;
};

struct NetworkParams {
    NetworkSpec spec;
    std::vector<LisModuleParams> modules; // size spec.n_r for generators
    std::vector<Layer> layers;            // tail / full stack

    std::vector<Param*> params() {
        std::vector<Param*> out;
        for (auto& m : modules)
            for (Layer* l : {&m.fc1, &m.act, &m.fc2})
                for (Param* p : layer_params(*l)) out.push_back(p);
        for (auto& l : layers)
            for (Param* p : layer_params(l)) out.push_back(p);
        return out;
    }

    void zero_grad() {
        for (Param* p : params()) p->zero_grad();
    }

    std::int64_t param_count() {
        std::int64_t n = 0;
        for (Param* p : params()) n += p->numel();
        return n;
    }
};

// Stable (name, param) enumeration used by the checkpoint writer.
inline std::vector<std::pair<std::string, Param*>> named_params(NetworkParams& net) {
    std::vector<std::pair<std::string, Param*>> out;
    auto add_layer = [&](Layer& l) {
        std::visit(
            [&](auto& ll) {
                using T = std::decay_t<decltype(ll)>;
                if constexpr (std::is_same_v<T, FcLayer> || std::is_same_v<T, ConvLayer> ||
                              std::is_same_v<T, ConvTLayer>) {
                    out.emplace_back(ll.name + ".w", &ll.w);
                    if (ll.has_g()) out.emplace_back(ll.name + ".g", &ll.g);
                    if (ll.has_bias()) out.emplace_back(ll.name + ".b", &ll.b);
                } else if constexpr (std::is_same_v<T, TpreluLayer>) {
                    out.emplace_back(ll.name + ".a", &ll.a);
                    out.emplace_back(ll.name + ".t", &ll.t);
                }
            },
            l.op);
    };
    for (auto& m : net.modules) {
        add_layer(m.fc1);
        add_layer(m.act);
        add_layer(m.fc2);
    }
    for (auto& l : net.layers) add_layer(l);
    return out;
}

// Builds and initializes a network from its spec. Weight draws happen in a
// fixed order (modules first, then the tail), so equal (spec, rng state)
// yields bit-identical parameters. Module fc2 layers are left at zero and
// consume no RNG draws.
inline NetworkParams build_network(const NetworkSpec& spec, Rng& init_rng) {
    if (spec.n_z < 0) throw ConfigError("network: n_z must be >= 0");
    if (spec.role == Role::generator) {
        if (spec.n_z < 1) throw ConfigError("generator: n_z must be >= 1");
        if (spec.n_r < 0) throw ConfigError("generator: module count must be >= 0");
    } else if (spec.n_r != 0) {
        throw ConfigError(std::string(role_name(spec.role)) + ": residual modules are generator-only");
    }

    std::vector<std::vector<int>> stages;
    std::vector<int> out_dims = infer_chain(spec, &stages);
    if (spec.role == Role::discriminator) {
        std::int64_t n = 1;
        for (int d : out_dims) n *= d;
        if (n != 1)
            throw ShapeError("discriminator: stack must end with one rating per example, got " +
                             Tensor::shape_string(out_dims));
    }
    if (spec.role == Role::reverser) {
        if (out_dims.size() != 1 || out_dims[0] != spec.n_z)
            throw ShapeError("reverser: stack must end with (n_z=" + std::to_string(spec.n_z) +
                             ") per example, got " + Tensor::shape_string(out_dims));
    }

    NetworkParams net;
    net.spec = spec;

    for (int mi = 0; mi < spec.n_r; ++mi) {
        std::string base = "g_m" + std::to_string(mi + 1) + "_";
        LisModuleParams m;
        m.fc1 = make_fc(base + "fc1", spec.n_z, spec.n_z, WnMode::standard);
        m.act = make_tprelu(base + "act", spec.n_z);
        m.fc2 = make_fc(base + "fc2", spec.n_z, spec.n_z, WnMode::none);
        init_layer(m.fc1, init_rng);
        init_layer(m.act, init_rng);
        // fc2 stays zero: the module is the identity at init.
        net.modules.push_back(std::move(m));
    }

    for (std::size_t li = 0; li < spec.tail.size(); ++li) {
        const LayerSpec& ls = spec.tail[li];
        const std::vector<int>& in = stages[li];
        std::string name = detail::auto_layer_name(spec.role, ls.kind, static_cast<int>(li));
        Layer layer;
        switch (ls.kind) {
            case LayerSpec::Kind::fc: layer = make_fc(name, in[0], ls.units, ls.wn); break;
            case LayerSpec::Kind::conv:
                layer = make_conv(name, in[0], ls.units, ls.k, ls.stride, ls.pad, ls.wn);
                break;
            case LayerSpec::Kind::convt:
                layer = make_convt(name, in[0], ls.units, ls.k, ls.stride, ls.pad, ls.wn);
                break;
            case LayerSpec::Kind::tprelu: layer = make_tprelu(name, in[0]); break;
            case LayerSpec::Kind::sigmoid: layer = make_sigmoid(name); break;
            case LayerSpec::Kind::dropout: layer = make_dropout(name, ls.rate); break;
            case LayerSpec::Kind::reshape: layer = make_reshape(name, ls.reshape_to); break;
        }
        init_layer(layer, init_rng);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

inline int lis_op(Tape& t, LisModuleParams& m, int z, bool track) {
    int h = layer_op(t, m.fc1, z, {track, false, nullptr});
    h = layer_op(t, m.act, h, {track, false, nullptr});
    h = layer_op(t, m.fc2, h, {track, false, nullptr});
    return add_op(t, z, h);
}

inline Tensor lis_forward(LisModuleParams& m, const Tensor& z) {
    Tape t;
    int in = t.leaf(z, false);
    return std::move(t.val(lis_op(t, m, in, false)));
}

struct GenSlots {
    std::vector<int> z_primes; // slot after each applied module, size k
    int out = -1;              // tail output
};

inline GenSlots generator_op(Tape& t, NetworkParams& net, int z, int k, bool track) {
    if (net.spec.role != Role::generator)
        throw ConfigError(std::string("generator_forward: network role is ") + role_name(net.spec.role));
    if (k < 0 || k > net.spec.n_r)
        throw ConfigError("generator_forward: k=" + std::to_string(k) + " outside [0," +
                          std::to_string(net.spec.n_r) + "]");
    const Tensor& zv = t.val(z);
    if (zv.rank() != 2 || zv.dim(1) != net.spec.n_z)
        throw ShapeError("generator_forward: expected noise (m," + std::to_string(net.spec.n_z) +
                         "), got " + zv.shape_str());
    GenSlots out;
    int cur = z;
    for (int i = 0; i < k; ++i) {
        cur = lis_op(t, net.modules[static_cast<std::size_t>(i)], cur, track);
        out.z_primes.push_back(cur);
    }
    for (auto& l : net.layers) cur = layer_op(t, l, cur, {track, false, nullptr});
    out.out = cur;
    return out;
}

struct GenResult {
    std::vector<Tensor> z_primes; // size k
    Tensor out;
};

// Inference pass through the first k modules plus the tail.
inline GenResult generator_forward(NetworkParams& net, const Tensor& z, int k) {
    Tape t;
    int in = t.leaf(z, false);
    GenSlots s = generator_op(t, net, in, k, false);
    GenResult r;
    for (int id : s.z_primes) r.z_primes.push_back(std::move(t.val(id)));
    r.out = std::move(t.val(s.out));
    return r;
}

inline GenResult generator_forward(NetworkParams& net, const Tensor& z) {
    return generator_forward(net, z, net.spec.n_r);
}

// Tail only: maps an already-manipulated noise batch to output space without
// applying any module. Equivalent to generator_forward(net, z_stage, 0).out.
inline Tensor generator_tail_forward(NetworkParams& net, const Tensor& z_stage) {
    return generator_forward(net, z_stage, 0).out;
}

inline void check_stack_input(const NetworkParams& net, const Tensor& x) {
    std::vector<int> want;
    want.push_back(x.rank() > 0 ? x.dim(0) : 0);
    want.insert(want.end(), net.spec.input.begin(), net.spec.input.end());
    if (x.shape != want)
        throw ShapeError(std::string(role_name(net.spec.role)) + ": expected input (n," +
                         Tensor::shape_string(net.spec.input) + "-dims), got " + x.shape_str());
}

inline int discriminator_op(Tape& t, NetworkParams& net, int x, bool track) {
    if (net.spec.role != Role::discriminator)
        throw ConfigError(std::string("discriminator_forward: network role is ") + role_name(net.spec.role));
    check_stack_input(net, t.val(x));
    int cur = x;
    for (auto& l : net.layers) cur = layer_op(t, l, cur, {track, false, nullptr});
    return cur;
}

// Ratings in (0,1), one per example, shape (n,1).
inline Tensor discriminator_forward(NetworkParams& net, const Tensor& x) {
    Tape t;
    int in = t.leaf(x, false);
    return std::move(t.val(discriminator_op(t, net, in, false)));
}

inline int reverser_op(Tape& t, NetworkParams& net, int x, bool track, bool training = false,
                       Rng* rng = nullptr) {
    if (net.spec.role != Role::reverser)
        throw ConfigError(std::string("reverser_forward: network role is ") + role_name(net.spec.role));
    check_stack_input(net, t.val(x));
    int cur = x;
    for (auto& l : net.layers) cur = layer_op(t, l, cur, {track, training, rng});
    return cur;
}

// Inference pass (dropout inactive), shape (n, n_z).
inline Tensor reverser_forward(NetworkParams& net, const Tensor& x) {
    Tape t;
    int in = t.leaf(x, false);
    return std::move(t.val(reverser_op(t, net, in, false)));
}

// ---------------------------------------------------------------------------
// Architecture factories
// ---------------------------------------------------------------------------

// 2-D point task. Generator: two weight-normed TPReLU blocks of width 64 and
// an affine head to (x,y).
inline NetworkSpec make_ring_generator_spec(int n_z, int n_r) {
    NetworkSpec s;
    s.role = Role::generator;
    s.n_z = n_z;
    s.n_r = n_r;
    s.input = {n_z};
    s.tail = {
        LayerSpec::fc(64, WnMode::standard), LayerSpec::tprelu(),
        LayerSpec::fc(64, WnMode::standard), LayerSpec::tprelu(),
        LayerSpec::fc(2, WnMode::affine),
    };
    return s;
}

inline NetworkSpec make_ring_discriminator_spec() {
    NetworkSpec s;
    s.role = Role::discriminator;
    s.input = {2};
    s.tail = {
        LayerSpec::fc(64, WnMode::standard), LayerSpec::tprelu(),
        LayerSpec::fc(64, WnMode::standard), LayerSpec::tprelu(),
        LayerSpec::fc(1, WnMode::affine),    LayerSpec::sigmoid(),
    };
    return s;
}

// Reverser widths are half the discriminator's, keeping it the smaller net.
inline NetworkSpec make_ring_reverser_spec(int n_z, double dropout_rate = 0.0) {
    NetworkSpec s;
    s.role = Role::reverser;
    s.n_z = n_z;
    s.input = {2};
    s.tail = {LayerSpec::fc(32, WnMode::standard), LayerSpec::tprelu()};
    if (dropout_rate > 0.0) s.tail.push_back(LayerSpec::dropout(dropout_rate));
    s.tail.push_back(LayerSpec::fc(32, WnMode::standard));
    s.tail.push_back(LayerSpec::tprelu());
    if (dropout_rate > 0.0) s.tail.push_back(LayerSpec::dropout(dropout_rate));
    s.tail.push_back(LayerSpec::fc(n_z, WnMode::affine));
    return s;
}

// Small image task (size x size, default 16), same shape grammar as the full
// architectures: FC to a 4x4 base, fractionally strided 4x4 s2 p1 doubling
// stages, sigmoid head.
inline NetworkSpec make_image_generator_spec(int n_z, int n_r, int channels, int size = 16) {
    if (size % 4 != 0 || size < 8)
        throw ConfigError("image generator: size must be a multiple of 4 and >= 8, got " +
                          std::to_string(size));
    NetworkSpec s;
    s.role = Role::generator;
    s.n_z = n_z;
    s.n_r = n_r;
    s.input = {n_z};
    int base = 4, filters = 64;
    s.tail = {
        LayerSpec::fc(base * base * filters, WnMode::standard),
        LayerSpec::tprelu(),
        LayerSpec::reshape({filters, base, base}),
    };
    int cur = base;
    int f = filters;
    while (cur * 2 < size) {
        f /= 2;
        s.tail.push_back(LayerSpec::convt(f, 4, 2, 1, WnMode::standard));
        s.tail.push_back(LayerSpec::tprelu());
        cur *= 2;
    }
    s.tail.push_back(LayerSpec::convt(channels, 4, 2, 1, WnMode::affine));
    s.tail.push_back(LayerSpec::sigmoid());
    return s;
}

inline NetworkSpec make_image_discriminator_spec(int channels, int size = 16) {
    NetworkSpec s;
    s.role = Role::discriminator;
    s.input = {channels, size, size};
    int f = 8, cur = size;
    bool first = true;
    while (cur > 4) {
        s.tail.push_back(LayerSpec::conv(f, 4, 2, 1, WnMode::standard));
        s.tail.push_back(LayerSpec::tprelu());
        f *= 2;
        cur /= 2;
        first = false;
    }
    (void)first;
    s.tail.push_back(LayerSpec::conv(1, cur, 1, 0, WnMode::affine));
    s.tail.push_back(LayerSpec::reshape({1}));
    s.tail.push_back(LayerSpec::sigmoid());
    return s;
}

inline NetworkSpec make_image_reverser_spec(int n_z, int channels, int size = 16,
                                            double dropout_rate = 0.0) {
    NetworkSpec s;
    s.role = Role::reverser;
    s.n_z = n_z;
    s.input = {channels, size, size};
    int f = 4, cur = size;
    while (cur > 4) {
        s.tail.push_back(LayerSpec::conv(f, 4, 2, 1, WnMode::standard));
        s.tail.push_back(LayerSpec::tprelu());
        if (dropout_rate > 0.0) s.tail.push_back(LayerSpec::dropout(dropout_rate));
        f *= 2;
        cur /= 2;
    }
    s.tail.push_back(LayerSpec::conv(n_z, cur, 1, 0, WnMode::affine));
    s.tail.push_back(LayerSpec::reshape({n_z}));
    return s;
}

// Full-scale architectures: latent 256, FC to a 5x5x512 base, then 4x4 s2 p1
// fractionally strided stages doubling 5 -> 10 -> ... -> size, with a 5x5
// valid head on the discriminator/reverser side. size must be 5 * 2^s.
inline int fullscale_doubling_steps(int size) {
    int cur = 5, steps = 0;
    while (cur < size) {
        cur *= 2;
        ++steps;
    }
    if (cur != size)
        throw ConfigError("full-scale architectures need size = 5*2^s (80, 160, ...), got " +
                          std::to_string(size));
    return steps;
}

inline NetworkSpec make_fullscale_generator_spec(int n_z, int n_r, int channels, int size) {
    int steps = fullscale_doubling_steps(size);
    NetworkSpec s;
    s.role = Role::generator;
    s.n_z = n_z;
    s.n_r = n_r;
    s.input = {n_z};
    int filters = 512;
    s.tail = {
        LayerSpec::fc(5 * 5 * filters, WnMode::standard),
        LayerSpec::tprelu(),
        LayerSpec::reshape({filters, 5, 5}),
    };
    for (int i = 0; i < steps - 1; ++i) {
        filters /= 2;
        s.tail.push_back(LayerSpec::convt(filters, 4, 2, 1, WnMode::standard));
        s.tail.push_back(LayerSpec::tprelu());
    }
    s.tail.push_back(LayerSpec::convt(channels, 4, 2, 1, WnMode::affine));
    s.tail.push_back(LayerSpec::sigmoid());
    return s;
}

inline NetworkSpec make_fullscale_discriminator_spec(int channels, int size) {
    int steps = fullscale_doubling_steps(size);
    NetworkSpec s;
    s.role = Role::discriminator;
    s.input = {channels, size, size};
    int filters = 512 >> (steps - 1);
    for (int i = 0; i < steps; ++i) {
        s.tail.push_back(LayerSpec::conv(filters, 4, 2, 1, WnMode::standard));
        s.tail.push_back(LayerSpec::tprelu());
        filters *= 2;
    }
    s.tail.push_back(LayerSpec::conv(1, 5, 1, 0, WnMode::affine));
    s.tail.push_back(LayerSpec::reshape({1}));
    s.tail.push_back(LayerSpec::sigmoid());
    return s;
}

inline NetworkSpec make_fullscale_reverser_spec(int n_z, int channels, int size) {
    int steps = fullscale_doubling_steps(size);
    NetworkSpec s;
    s.role = Role::reverser;
    s.n_z = n_z;
    s.input = {channels, size, size};
    int filters = (512 >> (steps - 1)) / 2;
    for (int i = 0; i < steps; ++i) {
        s.tail.push_back(LayerSpec::conv(filters, 4, 2, 1, WnMode::standard));
        s.tail.push_back(LayerSpec::tprelu());
        filters *= 2;
    }
    s.tail.push_back(LayerSpec::conv(n_z, 5, 1, 0, WnMode::affine));
    s.tail.push_back(LayerSpec::reshape({n_z}));
    return s;
}

} // namespace lisgan
