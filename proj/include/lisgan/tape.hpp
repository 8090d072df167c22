#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "common.hpp"
#include "tensor.hpp"

namespace lisgan {

// A trainable parameter: value plus gradient accumulator of the same shape.
struct Param {
    Tensor value;
    Tensor grad;

    Param() = default;
    explicit Param(Tensor v) : value(std::move(v)), grad(value.shape) {}

    void zero_grad() { grad.fill(0.0f); }
    std::int64_t numel() const { return value.numel(); }
};

// Reverse-mode tape. Forward ops append value slots plus a backward closure;
// backward() seeds d(loss)/d(loss) = 1 and replays the closures in reverse.
// Ops are layer-granularity, so the closure count stays small even for image
// networks. Gradients accumulate (+=) both into slot grads and Param::grad;
// callers zero parameter grads before taping a step.
//
// Slot ids are assigned in push order, so next_id() before building a closure
// gives the id the upcoming push will return; closures capture it by value.
class Tape {
public:
    int next_id() const { return static_cast<int>(slots_.size()); }

    int leaf(Tensor value, bool needs_grad = false) {
        return push(std::move(value), needs_grad, nullptr);
    }

    int push(Tensor value, bool needs_grad, std::function<void(Tape&)> back) {
        Slot s;
        s.value = std::move(value);
        s.needs = needs_grad;
        if (needs_grad) s.grad = Tensor(s.value.shape);
        s.back = std::move(back);
        slots_.push_back(std::move(s));
        return static_cast<int>(slots_.size()) - 1;
    }

    Tensor& val(int id) { return slots_[static_cast<std::size_t>(id)].value; }
    const Tensor& val(int id) const { return slots_[static_cast<std::size_t>(id)].value; }

    Tensor& grad(int id) {
        Slot& s = slots_[static_cast<std::size_t>(id)];
        if (!s.needs) throw NumericError("tape: gradient requested for a slot that does not track gradients");
        return s.grad;
    }

    bool needs_grad(int id) const { return slots_[static_cast<std::size_t>(id)].needs; }

    void backward(int loss) {
        Slot& ls = slots_[static_cast<std::size_t>(loss)];
        if (ls.value.numel() != 1)
            throw NumericError("tape: backward() requires a scalar loss slot, got shape " + ls.value.shape_str());
        if (!ls.needs)
            throw NumericError("tape: backward() on a slot with no gradient path");
        ls.grad[0] = 1.0f;
        for (int i = loss; i >= 0; --i) {
            auto& s = slots_[static_cast<std::size_t>(i)];
            if (s.back) s.back(*this);
        }
    }

    // Set when a loss op had to clamp a rating away from {0,1}; trainers
    // surface it as a flagged batch.
    bool clamp_flagged = false;

private:
    struct Slot {
        Tensor value;
        Tensor grad;
        bool needs = false;
        std::function<void(Tape&)> back;
    };
    std::vector<Slot> slots_;
};

// out = a + b, elementwise. Used for the residual connection.
inline int add_op(Tape& t, int a, int b) {
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    if (!av.same_shape(bv))
        throw ShapeError("add: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    Tensor out(av.shape);
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = av[i] + bv[i];
    bool na = t.needs_grad(a), nb = t.needs_grad(b);
    bool needs = na || nb;
    std::function<void(Tape&)> back;
    if (needs) {
        int id = t.next_id();
        back = [a, b, id, na, nb](Tape& tp) {
            const Tensor& g = tp.grad(id);
            if (na) {
                Tensor& ga = tp.grad(a);
                for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
            }
            if (nb) {
                Tensor& gb = tp.grad(b);
                for (std::int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
            }
        };
    }
    return t.push(std::move(out), needs, std::move(back));
}

// Weighted sum of scalar slots: out = sum_i w_i * s_i. Loss heads use this to
// combine adversarial and similarity terms.
inline int weighted_sum_op(Tape& t, const std::vector<std::pair<int, double>>& terms) {
    double acc = 0.0;
    bool needs = false;
    for (const auto& [slot, w] : terms) {
        const Tensor& v = t.val(slot);
        if (v.numel() != 1)
            throw ShapeError("weighted_sum: term slots must be scalar, got " + v.shape_str());
        acc += w * static_cast<double>(v[0]);
        needs = needs || t.needs_grad(slot);
    }
    Tensor out({1});
    out[0] = static_cast<float>(acc);
    std::function<void(Tape&)> back;
    if (needs) {
        int id = t.next_id();
        auto terms_copy = terms;
        back = [id, terms_copy](Tape& tp) {
            float g = tp.grad(id)[0];
            for (const auto& [slot, w] : terms_copy)
                if (tp.needs_grad(slot)) tp.grad(slot)[0] += static_cast<float>(w) * g;
        };
    }
    return t.push(std::move(out), needs, std::move(back));
}

} // namespace lisgan
