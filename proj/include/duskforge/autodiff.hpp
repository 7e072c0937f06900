#pragma once

#include "duskforge/kernels.hpp"
#include "duskforge/tensor.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

namespace duskforge {

// Reverse-mode tape over Tensor<T>. Each op eagerly computes its value and
// records a closure that scatters the node's gradient into its parents.
// Graphs are rebuilt every forward pass and never reused across steps.
template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad; // lazily allocated on first accumulation
    bool requires_grad = false;
    bool backward_ran = false;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backprop;

    void accumulate(const Tensor<T>& g) {
        if (!grad.defined()) grad = Tensor<T>::zeros(value.shape());
        kernels::table<T>().add(grad.data(), g.data(), grad.data(), grad.numel());
    }
    Tensor<T>& grad_buffer() {
        if (!grad.defined()) grad = Tensor<T>::zeros(value.shape());
        return grad;
    }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

namespace ad_detail {

// Finite checks are part of the op contract; tests for error paths and the
// finite-difference driver keep them on, hot training loops may disable.
inline bool& finite_checks() {
    static bool on = true;
    return on;
}

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
    if (finite_checks() && !all_finite(t))
        throw Error(format_msg("non-finite value produced by op '", op, "'"));
}

// Effective strides for broadcasting: operand shape right-aligned against
// the output shape, stride 0 on broadcast axes.
inline std::vector<int64_t> effective_strides(const std::vector<int>& operand,
                                              const std::vector<int>& out) {
    std::vector<int64_t> natural(operand.size(), 1);
    for (int i = static_cast<int>(operand.size()) - 2; i >= 0; --i)
        natural[i] = natural[i + 1] * operand[i + 1];
    std::vector<int64_t> eff(out.size(), 0);
    const size_t off = out.size() - operand.size();
    for (size_t i = 0; i < operand.size(); ++i)
        eff[off + i] = operand[i] == 1 ? 0 : natural[i];
    return eff;
}

struct BcastMap {
    std::vector<int> out_shape;
    std::vector<int64_t> out_strides;
    std::vector<int64_t> a_strides;
    std::vector<int64_t> b_strides;
    int64_t n = 0;

    BcastMap(const std::vector<int>& a, const std::vector<int>& b) {
        out_shape = broadcast_shapes(a, b);
        out_strides.assign(out_shape.size(), 1);
        for (int i = static_cast<int>(out_shape.size()) - 2; i >= 0; --i)
            out_strides[i] = out_strides[i + 1] * out_shape[i + 1];
        a_strides = effective_strides(a, out_shape);
        b_strides = effective_strides(b, out_shape);
        n = Tensor<float>::product(out_shape);
    }

    void locate(int64_t flat, int64_t& ai, int64_t& bi) const {
        ai = 0;
        bi = 0;
        for (size_t d = 0; d < out_shape.size(); ++d) {
            const int64_t c = (flat / out_strides[d]) % out_shape[d];
            ai += c * a_strides[d];
            bi += c * b_strides[d];
        }
    }
};

template <typename T>
Var<T> make_node(Tensor<T> value, std::vector<Var<T>> parents,
                 std::function<void(Node<T>&)> backprop, const char* op) {
    check_finite(value, op);
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    for (const auto& p : parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

} // namespace ad_detail

template <typename T>
Var<T> make_param(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = true;
    return n;
}

template <typename T>
Var<T> make_const(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    return n;
}

// ---------------------------------------------------------------------------
// Elementwise binary ops with broadcasting
// ---------------------------------------------------------------------------

namespace ad_detail {

enum class BinKind { add, sub, mul, div };

template <typename T>
Var<T> binary_op(const Var<T>& a, const Var<T>& b, BinKind kind, const char* name) {
    const auto& ka = kernels::table<T>();
    Tensor<T> out;
    if (same_shape(a->value, b->value)) {
        out = Tensor<T>::zeros(a->value.shape());
        const int64_t n = out.numel();
        switch (kind) {
            case BinKind::add: ka.add(a->value.data(), b->value.data(), out.data(), n); break;
            case BinKind::sub: ka.sub(a->value.data(), b->value.data(), out.data(), n); break;
            case BinKind::mul: ka.mul(a->value.data(), b->value.data(), out.data(), n); break;
            case BinKind::div: ka.div(a->value.data(), b->value.data(), out.data(), n); break;
        }
    } else {
        BcastMap map(a->value.shape(), b->value.shape());
        out = Tensor<T>::zeros(map.out_shape);
        const T* pa = a->value.data();
        const T* pb = b->value.data();
        for (int64_t i = 0; i < map.n; ++i) {
            int64_t ai, bi;
            map.locate(i, ai, bi);
            switch (kind) {
                case BinKind::add: out[i] = pa[ai] + pb[bi]; break;
                case BinKind::sub: out[i] = pa[ai] - pb[bi]; break;
                case BinKind::mul: out[i] = pa[ai] * pb[bi]; break;
                case BinKind::div: out[i] = pa[ai] / pb[bi]; break;
            }
        }
    }

    auto backprop = [kind](Node<T>& n) {
        const Var<T>& a = n.parents[0];
        const Var<T>& b = n.parents[1];
        const auto& k = kernels::table<T>();
        const Tensor<T>& g = n.grad;
        if (same_shape(a->value, b->value)) {
            const int64_t len = g.numel();
            if (a->requires_grad) {
                Tensor<T>& ga = a->grad_buffer();
                switch (kind) {
                    case BinKind::add:
                    case BinKind::sub: k.add(ga.data(), g.data(), ga.data(), len); break;
                    case BinKind::mul: k.mul_acc(g.data(), b->value.data(), ga.data(), len); break;
                    case BinKind::div:
                        for (int64_t i = 0; i < len; ++i) ga[i] += g[i] / b->value[i];
                        break;
                }
            }
            if (b->requires_grad) {
                Tensor<T>& gb = b->grad_buffer();
                switch (kind) {
                    case BinKind::add: k.add(gb.data(), g.data(), gb.data(), len); break;
                    case BinKind::sub: k.axpy(T(-1), g.data(), gb.data(), len); break;
                    case BinKind::mul: k.mul_acc(g.data(), a->value.data(), gb.data(), len); break;
                    case BinKind::div:
                        for (int64_t i = 0; i < len; ++i)
                            gb[i] -= g[i] * a->value[i] / (b->value[i] * b->value[i]);
                        break;
                }
            }
            return;
        }
        BcastMap map(a->value.shape(), b->value.shape());
        Tensor<T>* ga = a->requires_grad ? &a->grad_buffer() : nullptr;
        Tensor<T>* gb = b->requires_grad ? &b->grad_buffer() : nullptr;
        const T* pa = a->value.data();
        const T* pb = b->value.data();
        for (int64_t i = 0; i < map.n; ++i) {
            int64_t ai, bi;
            map.locate(i, ai, bi);
            const T gi = g[i];
            switch (kind) {
                case BinKind::add:
                    if (ga) (*ga)[ai] += gi;
                    if (gb) (*gb)[bi] += gi;
                    break;
                case BinKind::sub:
                    if (ga) (*ga)[ai] += gi;
                    if (gb) (*gb)[bi] -= gi;
                    break;
                case BinKind::mul:
                    if (ga) (*ga)[ai] += gi * pb[bi];
                    if (gb) (*gb)[bi] += gi * pa[ai];
                    break;
                case BinKind::div:
                    if (ga) (*ga)[ai] += gi / pb[bi];
                    if (gb) (*gb)[bi] -= gi * pa[ai] / (pb[bi] * pb[bi]);
                    break;
            }
        }
    };
    return ad_detail::make_node<T>(std::move(out), {a, b}, std::move(backprop), name);
}

} // namespace ad_detail

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    return ad_detail::binary_op(a, b, ad_detail::BinKind::add, "add");
}
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    return ad_detail::binary_op(a, b, ad_detail::BinKind::sub, "sub");
}
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    return ad_detail::binary_op(a, b, ad_detail::BinKind::mul, "mul");
}
template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
    return ad_detail::binary_op(a, b, ad_detail::BinKind::div, "div");
}

// ---------------------------------------------------------------------------
// Elementwise unary ops and scalar variants
// ---------------------------------------------------------------------------

template <typename T>
Var<T> mul_scalar(const Var<T>& x, double cs) {
    const T c = static_cast<T>(cs);
    Tensor<T> out = Tensor<T>::zeros(x->value.shape());
    kernels::table<T>().scale(c, x->value.data(), out.data(), out.numel());
    auto backprop = [c](Node<T>& n) {
        kernels::table<T>().axpy(c, n.grad.data(), n.parents[0]->grad_buffer().data(),
                                 n.grad.numel());
    };
    return ad_detail::make_node<T>(std::move(out), {x}, std::move(backprop), "mul_scalar");
}

template <typename T>
Var<T> add_scalar(const Var<T>& x, double cs) {
    const T c = static_cast<T>(cs);
    Tensor<T> out = x->value;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += c;
    auto backprop = [](Node<T>& n) {
        auto& g = n.parents[0]->grad_buffer();
        kernels::table<T>().add(g.data(), n.grad.data(), g.data(), g.numel());
    };
    return ad_detail::make_node<T>(std::move(out), {x}, std::move(backprop), "add_scalar");
}

template <typename T>
Var<T> neg(const Var<T>& x) {
    return mul_scalar(x, T(-1));
}

template <typename T>
Var<T> pow_scalar(const Var<T>& x, double ps) {
    const T p = static_cast<T>(ps);
    Tensor<T> out = Tensor<T>::zeros(x->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::pow(x->value[i], p);
    auto backprop = [p](Node<T>& n) {
        const Var<T>& x = n.parents[0];
        Tensor<T>& gx = x->grad_buffer();
        for (int64_t i = 0; i < gx.numel(); ++i)
            gx[i] += n.grad[i] * p * std::pow(x->value[i], p - T(1));
    };
    return ad_detail::make_node<T>(std::move(out), {x}, std::move(backprop), "pow");
}

// Elementwise x^e with a tensor exponent. Domain: x >= 0, e >= 1 (the
// curve-family use case). At x = 0 the exponent gradient is taken as 0.
template <typename T>
Var<T> pow_elem(const Var<T>& x, const Var<T>& e) {
    DUSK_CHECK(same_shape(x->value, e->value), "pow_elem shapes differ: ",
               shape_str(x->value.shape()), " vs ", shape_str(e->value.shape()));
    Tensor<T> out = Tensor<T>::zeros(x->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::pow(x->value[i], e->value[i]);
    auto backprop = [](Node<T>& n) {
        const Var<T>& x = n.parents[0];
        const Var<T>& e = n.parents[1];
        const bool gx_wanted = x->requires_grad;
        const bool ge_wanted = e->requires_grad;
        Tensor<T>* gx = gx_wanted ? &x->grad_buffer() : nullptr;
        Tensor<T>* ge = ge_wanted ? &e->grad_buffer() : nullptr;
        for (int64_t i = 0; i < n.grad.numel(); ++i) {
            const T xv = x->value[i];
            const T ev = e->value[i];
            if (gx) (*gx)[i] += n.grad[i] * ev * std::pow(xv, ev - T(1));
            if (ge && xv > T(0)) (*ge)[i] += n.grad[i] * n.value[i] * std::log(xv);
        }
    };
    return ad_detail::make_node<T>(std::move(out), {x, e}, std::move(backprop), "pow_elem");
}

template <typename T>
Var<T> exp(const Var<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::exp(x->value[i]);
    auto backprop = [](Node<T>& n) {
        Tensor<T>& gx = n.parents[0]->grad_buffer();
        kernels::table<T>().mul_acc(n.grad.data(), n.value.data(), gx.data(), gx.numel());
    };
    return ad_detail::make_node<T>(std::move(out), {x}, std::move(backprop), "exp");
}

template <typename T>
Var<T> log(const Var<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::log(x->value[i]);
    auto backprop = [](Node<T>& n) {
        const Var<T>& x = n.parents[0];
        Tensor<T>& gx = x->grad_buffer();
        for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += n.grad[i] / x->value[i];
    };
    return ad_detail::make_node<T>(std::move(out), {x}, std::move(backprop), "log");
}

// Subgradient convention for clamp/max_scalar: 1 inside the active region
// and exactly at its boundary, 0 outside. Saturated adjustment maps keep a
// pass-through gradient at the range edge this way.
template <typename T>
Var<T> clamp(const Var<T>& x, double los, double his) {
    const T lo = static_cast<T>(los), hi = static_cast<T>(his);
    Tensor<T> out = Tensor<T>::zeros(x->value.shape());
    kernels::table<T>().clamp(x->value.data(), lo, hi, out.data(), out.numel());
    auto backprop = [lo, hi](Node<T>& n) {
        const Var<T>& x = n.parents[0];
        Tensor<T>& gx = x->grad_buffer();
        for (int64_t i = 0; i < gx.numel(); ++i)
            if (x->value[i] >= lo && x->value[i] <= hi) gx[i] += n.grad[i];
    };
    return ad_detail::make_node<T>(std::move(out), {x}, std::move(backprop), "clamp");
}

template <typename T>
Var<T> max_scalar(const Var<T>& x, double cs) {
    const T c = static_cast<T>(cs);
    Tensor<T> out = Tensor<T>::zeros(x->value.shape());
    kernels::table<T>().max_scalar(x->value.data(), c, out.data(), out.numel());
    auto backprop = [c](Node<T>& n) {
        const Var<T>& x = n.parents[0];
        Tensor<T>& gx = x->grad_buffer();
        for (int64_t i = 0; i < gx.numel(); ++i)
            if (x->value[i] >= c) gx[i] += n.grad[i];
    };
    return ad_detail::make_node<T>(std::move(out), {x}, std::move(backprop), "max_scalar");
}

template <typename T>
Var<T> relu(const Var<T>& x) {
    return max_scalar(x, T(0));
}

template <typename T>
Var<T> abs(const Var<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::abs(x->value[i]);
    auto backprop = [](Node<T>& n) {
        const Var<T>& x = n.parents[0];
        Tensor<T>& gx = x->grad_buffer();
        for (int64_t i = 0; i < gx.numel(); ++i) {
            const T v = x->value[i];
            if (v > T(0))
                gx[i] += n.grad[i];
            else if (v < T(0))
                gx[i] -= n.grad[i];
        }
    };
    return ad_detail::make_node<T>(std::move(out), {x}, std::move(backprop), "abs");
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) {
        const T v = x->value[i];
        out[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                           : std::exp(v) / (T(1) + std::exp(v));
    }
    auto backprop = [](Node<T>& n) {
        Tensor<T>& gx = n.parents[0]->grad_buffer();
        for (int64_t i = 0; i < gx.numel(); ++i) {
            const T s = n.value[i];
            gx[i] += n.grad[i] * s * (T(1) - s);
        }
    };
    return ad_detail::make_node<T>(std::move(out), {x}, std::move(backprop), "sigmoid");
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> reshape(const Var<T>& x, std::vector<int> shape) {
    Tensor<T> out = x->value.reshaped(shape);
    auto backprop = [](Node<T>& n) {
        const Var<T>& x = n.parents[0];
        Tensor<T>& gx = x->grad_buffer();
        kernels::table<T>().add(gx.data(), n.grad.data(), gx.data(), gx.numel());
    };
    return ad_detail::make_node<T>(std::move(out), {x}, std::move(backprop), "reshape");
}

template <typename T>
Var<T> broadcast_to(const Var<T>& x, std::vector<int> shape) {
    ad_detail::BcastMap map(x->value.shape(), shape);
    DUSK_CHECK(map.out_shape == shape, "broadcast_to: ", shape_str(x->value.shape()),
               " cannot reach ", shape_str(shape));
    Tensor<T> out = Tensor<T>::zeros(shape);
    for (int64_t i = 0; i < map.n; ++i) {
        int64_t xi, unused;
        map.locate(i, xi, unused);
        out[i] = x->value[xi];
    }
    auto backprop = [map](Node<T>& n) {
        Tensor<T>& gx = n.parents[0]->grad_buffer();
        for (int64_t i = 0; i < map.n; ++i) {
            int64_t xi, unused;
            map.locate(i, xi, unused);
            gx[xi] += n.grad[i];
        }
    };
    return ad_detail::make_node<T>(std::move(out), {x}, std::move(backprop), "broadcast");
}

template <typename T>
Var<T> slice(const Var<T>& x, int axis, int start, int stop) {
    const auto& shape = x->value.shape();
    DUSK_CHECK(axis >= 0 && axis < x->value.rank(), "slice: axis ", axis, " out of range for ",
               shape_str(shape));
    DUSK_CHECK(0 <= start && start < stop && stop <= shape[axis], "slice: range [", start, ",",
               stop, ") invalid for axis extent ", shape[axis]);
    std::vector<int> out_shape = shape;
    out_shape[axis] = stop - start;

    // Copy [outer, extent, inner] blocks.
    int64_t inner = 1, outer = 1;
    for (int d = axis + 1; d < x->value.rank(); ++d) inner *= shape[d];
    for (int d = 0; d < axis; ++d) outer *= shape[d];
    const int64_t in_extent = shape[axis], out_extent = stop - start;

    Tensor<T> out = Tensor<T>::zeros(out_shape);
    for (int64_t o = 0; o < outer; ++o) {
        const T* src = x->value.data() + (o * in_extent + start) * inner;
        T* dst = out.data() + o * out_extent * inner;
        std::copy(src, src + out_extent * inner, dst);
    }
    auto backprop = [=](Node<T>& n) {
        Tensor<T>& gx = n.parents[0]->grad_buffer();
        for (int64_t o = 0; o < outer; ++o) {
            const T* gsrc = n.grad.data() + o * out_extent * inner;
            T* gdst = gx.data() + (o * in_extent + start) * inner;
            kernels::table<T>().add(gdst, gsrc, gdst, out_extent * inner);
        }
    };
    return ad_detail::make_node<T>(std::move(out), {x}, std::move(backprop), "slice");
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& xs, int axis) {
    DUSK_CHECK(!xs.empty(), "concat: empty input list");
    const int rank = xs[0]->value.rank();
    DUSK_CHECK(axis >= 0 && axis < rank, "concat: axis ", axis, " out of range");
    std::vector<int> out_shape = xs[0]->value.shape();
    int total = 0;
    for (const auto& x : xs) {
        DUSK_CHECK(x->value.rank() == rank, "concat: rank mismatch");
        for (int d = 0; d < rank; ++d)
            DUSK_CHECK(d == axis || x->value.shape()[d] == out_shape[d],
                       "concat: shape mismatch ", shape_str(x->value.shape()), " vs ",
                       shape_str(out_shape), " on axis ", d);
        total += x->value.shape()[axis];
    }
    out_shape[axis] = total;

    int64_t inner = 1, outer = 1;
    for (int d = axis + 1; d < rank; ++d) inner *= out_shape[d];
    for (int d = 0; d < axis; ++d) outer *= out_shape[d];

    Tensor<T> out = Tensor<T>::zeros(out_shape);
    std::vector<int> extents;
    for (const auto& x : xs) extents.push_back(x->value.shape()[axis]);
    int64_t off = 0;
    for (size_t k = 0; k < xs.size(); ++k) {
        const int64_t ext = extents[k];
        for (int64_t o = 0; o < outer; ++o) {
            const T* src = xs[k]->value.data() + o * ext * inner;
            T* dst = out.data() + (o * total + off) * inner;
            std::copy(src, src + ext * inner, dst);
        }
        off += ext;
    }
    auto backprop = [extents, inner, outer, total](Node<T>& n) {
        int64_t off = 0;
        for (size_t k = 0; k < n.parents.size(); ++k) {
            const int64_t ext = extents[k];
            if (n.parents[k]->requires_grad) {
                Tensor<T>& gx = n.parents[k]->grad_buffer();
                for (int64_t o = 0; o < outer; ++o) {
                    const T* gsrc = n.grad.data() + (o * total + off) * inner;
                    T* gdst = gx.data() + o * ext * inner;
                    kernels::table<T>().add(gdst, gsrc, gdst, ext * inner);
                }
            }
            off += ext;
        }
    };
    return ad_detail::make_node<T>(Tensor<T>(std::move(out)), std::vector<Var<T>>(xs),
                                   std::move(backprop), "concat");
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
Var<T> sum(const Var<T>& x) {
    Tensor<T> out = Tensor<T>::scalar(kernels::table<T>().sum(x->value.data(), x->value.numel()));
    auto backprop = [](Node<T>& n) {
        Tensor<T>& gx = n.parents[0]->grad_buffer();
        const T g = n.grad[0];
        for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
    };
    return ad_detail::make_node<T>(std::move(out), {x}, std::move(backprop), "sum");
}

template <typename T>
Var<T> mean(const Var<T>& x) {
    const T inv = T(1) / static_cast<T>(x->value.numel());
    Tensor<T> out =
        Tensor<T>::scalar(kernels::table<T>().sum(x->value.data(), x->value.numel()) * inv);
    auto backprop = [inv](Node<T>& n) {
        Tensor<T>& gx = n.parents[0]->grad_buffer();
        const T g = n.grad[0] * inv;
        for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
    };
    return ad_detail::make_node<T>(std::move(out), {x}, std::move(backprop), "mean");
}

namespace ad_detail {
template <typename T>
Var<T> reduce_axis(const Var<T>& x, int axis, bool keepdim, bool take_mean, const char* name) {
    const auto& shape = x->value.shape();
    DUSK_CHECK(axis >= 0 && axis < x->value.rank(), name, ": axis ", axis, " out of range for ",
               shape_str(shape));
    int64_t inner = 1, outer = 1;
    for (int d = axis + 1; d < x->value.rank(); ++d) inner *= shape[d];
    for (int d = 0; d < axis; ++d) outer *= shape[d];
    const int64_t extent = shape[axis];

    std::vector<int> out_shape;
    for (int d = 0; d < x->value.rank(); ++d) {
        if (d == axis) {
            if (keepdim) out_shape.push_back(1);
        } else {
            out_shape.push_back(shape[d]);
        }
    }
    const T scale = take_mean ? T(1) / static_cast<T>(extent) : T(1);

    Tensor<T> out = Tensor<T>::zeros(out_shape);
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t e = 0; e < extent; ++e)
            kernels::table<T>().axpy(scale, x->value.data() + (o * extent + e) * inner,
                                     out.data() + o * inner, inner);

    auto backprop = [=](Node<T>& n) {
        Tensor<T>& gx = n.parents[0]->grad_buffer();
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t e = 0; e < extent; ++e)
                kernels::table<T>().axpy(scale, n.grad.data() + o * inner,
                                         gx.data() + (o * extent + e) * inner, inner);
    };
    return ad_detail::make_node<T>(std::move(out), {x}, std::move(backprop), name);
}
} // namespace ad_detail

template <typename T>
Var<T> sum_axis(const Var<T>& x, int axis, bool keepdim = false) {
    return ad_detail::reduce_axis(x, axis, keepdim, false, "sum_axis");
}
template <typename T>
Var<T> mean_axis(const Var<T>& x, int axis, bool keepdim = false) {
    return ad_detail::reduce_axis(x, axis, keepdim, true, "mean_axis");
}

template <typename T>
Var<T> l2norm(const Var<T>& x) {
    const T sq = kernels::table<T>().dot(x->value.data(), x->value.data(), x->value.numel());
    const T norm = std::sqrt(sq);
    Tensor<T> out = Tensor<T>::scalar(norm);
    auto backprop = [norm](Node<T>& n) {
        const Var<T>& x = n.parents[0];
        Tensor<T>& gx = x->grad_buffer();
        const T denom = norm > T(0) ? norm : std::numeric_limits<T>::min();
        kernels::table<T>().axpy(n.grad[0] / denom, x->value.data(), gx.data(), gx.numel());
    };
    return ad_detail::make_node<T>(std::move(out), {x}, std::move(backprop), "l2norm");
}

// ---------------------------------------------------------------------------
// matmul / conv2d / avgpool2d
// ---------------------------------------------------------------------------

namespace ad_detail {
// C[m,n] = A[m,k] * B[k,n], accumulated as rank-1 row updates so scalar and
// SIMD kernels associate identically per output element.
template <typename T>
void matmul_raw(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
    const auto& kt = kernels::table<T>();
    for (int64_t i = 0; i < m; ++i)
        for (int64_t p = 0; p < k; ++p) kt.axpy(a[i * k + p], b + p * n, c + i * n, n);
}
} // namespace ad_detail

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    DUSK_CHECK(a->value.rank() == 2 && b->value.rank() == 2, "matmul expects rank-2 operands, got ",
               shape_str(a->value.shape()), " and ", shape_str(b->value.shape()));
    const int64_t m = a->value.size(0), k = a->value.size(1);
    DUSK_CHECK(b->value.size(0) == k, "matmul inner extents differ: ", shape_str(a->value.shape()),
               " vs ", shape_str(b->value.shape()));
    const int64_t n = b->value.size(1);

    Tensor<T> out = Tensor<T>::zeros({static_cast<int>(m), static_cast<int>(n)});
    ad_detail::matmul_raw(a->value.data(), b->value.data(), out.data(), m, k, n);

    auto backprop = [m, k, n](Node<T>& node) {
        const Var<T>& a = node.parents[0];
        const Var<T>& b = node.parents[1];
        const auto& kt = kernels::table<T>();
        const T* g = node.grad.data();
        if (a->requires_grad) { // dA[i,p] = <g[i,:], B[p,:]>
            Tensor<T>& ga = a->grad_buffer();
            for (int64_t i = 0; i < m; ++i)
                for (int64_t p = 0; p < k; ++p)
                    ga[i * k + p] += kt.dot(g + i * n, b->value.data() + p * n, n);
        }
        if (b->requires_grad) { // dB[p,:] += A[i,p] * g[i,:]
            Tensor<T>& gb = b->grad_buffer();
            for (int64_t i = 0; i < m; ++i)
                for (int64_t p = 0; p < k; ++p)
                    kt.axpy(a->value[i * k + p], g + i * n, gb.data() + p * n, n);
        }
    };
    return ad_detail::make_node<T>(std::move(out), {a, b}, std::move(backprop), "matmul");
}

namespace ad_detail {

struct ConvDims {
    int N, Cin, H, W, Cout, kh, kw, stride, pad, Ho, Wo;
};

// col is [Cin*kh*kw, Ho*Wo] for one sample; zero padding.
template <typename T>
void im2col(const T* x, const ConvDims& d, T* col) {
    int64_t row = 0;
    for (int c = 0; c < d.Cin; ++c)
        for (int dy = 0; dy < d.kh; ++dy)
            for (int dx = 0; dx < d.kw; ++dx, ++row) {
                T* out_row = col + row * (d.Ho * d.Wo);
                for (int oy = 0; oy < d.Ho; ++oy) {
                    const int iy = oy * d.stride - d.pad + dy;
                    for (int ox = 0; ox < d.Wo; ++ox) {
                        const int ix = ox * d.stride - d.pad + dx;
                        out_row[oy * d.Wo + ox] =
                            (iy >= 0 && iy < d.H && ix >= 0 && ix < d.W)
                                ? x[(static_cast<int64_t>(c) * d.H + iy) * d.W + ix]
                                : T(0);
                    }
                }
            }
}

template <typename T>
void col2im_accum(const T* col, const ConvDims& d, T* gx) {
    int64_t row = 0;
    for (int c = 0; c < d.Cin; ++c)
        for (int dy = 0; dy < d.kh; ++dy)
            for (int dx = 0; dx < d.kw; ++dx, ++row) {
                const T* src_row = col + row * (d.Ho * d.Wo);
                for (int oy = 0; oy < d.Ho; ++oy) {
                    const int iy = oy * d.stride - d.pad + dy;
                    if (iy < 0 || iy >= d.H) continue;
                    for (int ox = 0; ox < d.Wo; ++ox) {
                        const int ix = ox * d.stride - d.pad + dx;
                        if (ix < 0 || ix >= d.W) continue;
                        gx[(static_cast<int64_t>(c) * d.H + iy) * d.W + ix] +=
                            src_row[oy * d.Wo + ox];
                    }
                }
            }
}

} // namespace ad_detail

// x: [N,Cin,H,W], w: [Cout,Cin,kh,kw], bias: [Cout] or null. Zero padding.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int stride, int pad) {
    DUSK_CHECK(x->value.rank() == 4, "conv2d input must be [N,C,H,W], got ",
               shape_str(x->value.shape()));
    DUSK_CHECK(w->value.rank() == 4, "conv2d weight must be [Cout,Cin,kh,kw], got ",
               shape_str(w->value.shape()));
    DUSK_CHECK(stride >= 1, "conv2d stride must be >= 1, got ", stride);
    DUSK_CHECK(pad >= 0, "conv2d padding must be >= 0, got ", pad);
    ad_detail::ConvDims d;
    d.N = x->value.size(0);
    d.Cin = x->value.size(1);
    d.H = x->value.size(2);
    d.W = x->value.size(3);
    d.Cout = w->value.size(0);
    d.kh = w->value.size(2);
    d.kw = w->value.size(3);
    d.stride = stride;
    d.pad = pad;
    DUSK_CHECK(w->value.size(1) == d.Cin, "conv2d channel mismatch: input ",
               shape_str(x->value.shape()), " vs weight ", shape_str(w->value.shape()));
    d.Ho = (d.H + 2 * pad - d.kh) / stride + 1;
    d.Wo = (d.W + 2 * pad - d.kw) / stride + 1;
    DUSK_CHECK(d.Ho >= 1 && d.Wo >= 1, "conv2d output would be empty for input ",
               shape_str(x->value.shape()));
    if (bias)
        DUSK_CHECK(bias->value.rank() == 1 && bias->value.size(0) == d.Cout,
                   "conv2d bias must be [Cout], got ", shape_str(bias->value.shape()));

    const int64_t ckk = static_cast<int64_t>(d.Cin) * d.kh * d.kw;
    const int64_t ow = static_cast<int64_t>(d.Ho) * d.Wo;

    Tensor<T> out = Tensor<T>::zeros({d.N, d.Cout, d.Ho, d.Wo});
    std::vector<T> col(static_cast<size_t>(ckk * ow));
    for (int s = 0; s < d.N; ++s) {
        ad_detail::im2col(x->value.data() + static_cast<int64_t>(s) * d.Cin * d.H * d.W, d,
                          col.data());
        T* out_s = out.data() + static_cast<int64_t>(s) * d.Cout * ow;
        ad_detail::matmul_raw(w->value.data(), col.data(), out_s, d.Cout, ckk, ow);
        if (bias)
            for (int co = 0; co < d.Cout; ++co)
                for (int64_t q = 0; q < ow; ++q) out_s[co * ow + q] += bias->value[co];
    }

    std::vector<Var<T>> parents = {x, w};
    if (bias) parents.push_back(bias);
    auto backprop = [d, ckk, ow](Node<T>& node) {
        const Var<T>& x = node.parents[0];
        const Var<T>& w = node.parents[1];
        const Var<T> bias = node.parents.size() > 2 ? node.parents[2] : nullptr;
        const auto& kt = kernels::table<T>();
        std::vector<T> col(static_cast<size_t>(ckk * ow));
        std::vector<T> gcol(static_cast<size_t>(ckk * ow));
        for (int s = 0; s < d.N; ++s) {
            const T* g_s = node.grad.data() + static_cast<int64_t>(s) * d.Cout * ow;
            if (x->requires_grad || w->requires_grad)
                ad_detail::im2col(x->value.data() + static_cast<int64_t>(s) * d.Cin * d.H * d.W, d,
                                  col.data());
            if (w->requires_grad) { // dW[co,q] += <g[co,:], col[q,:]>
                Tensor<T>& gw = w->grad_buffer();
                for (int co = 0; co < d.Cout; ++co)
                    for (int64_t q = 0; q < ckk; ++q)
                        gw[co * ckk + q] += kt.dot(g_s + co * ow, col.data() + q * ow, ow);
            }
            if (bias && bias->requires_grad) {
                Tensor<T>& gb = bias->grad_buffer();
                for (int co = 0; co < d.Cout; ++co) gb[co] += kt.sum(g_s + co * ow, ow);
            }
            if (x->requires_grad) { // gcol = W^T g, then scatter
                std::fill(gcol.begin(), gcol.end(), T(0));
                for (int co = 0; co < d.Cout; ++co)
                    for (int64_t q = 0; q < ckk; ++q)
                        kt.axpy(w->value[co * ckk + q], g_s + co * ow, gcol.data() + q * ow, ow);
                ad_detail::col2im_accum(gcol.data(), d,
                                        x->grad_buffer().data() +
                                            static_cast<int64_t>(s) * d.Cin * d.H * d.W);
            }
        }
    };
    return ad_detail::make_node<T>(std::move(out), std::move(parents), std::move(backprop),
                                   "conv2d");
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, int stride, int pad) {
    return conv2d(x, w, Var<T>(nullptr), stride, pad);
}

// k x k windows, stride k, windows fully inside (extents must divide).
template <typename T>
Var<T> avgpool2d(const Var<T>& x, int k) {
    DUSK_CHECK(x->value.rank() == 4, "avgpool2d input must be [N,C,H,W], got ",
               shape_str(x->value.shape()));
    const int N = x->value.size(0), C = x->value.size(1), H = x->value.size(2),
              W = x->value.size(3);
    DUSK_CHECK(k >= 1 && H % k == 0 && W % k == 0, "avgpool2d: window ", k,
               " must divide spatial extents of ", shape_str(x->value.shape()));
    const int Ho = H / k, Wo = W / k;
    const T inv = T(1) / static_cast<T>(k * k);

    Tensor<T> out = Tensor<T>::zeros({N, C, Ho, Wo});
    for (int64_t nc = 0; nc < static_cast<int64_t>(N) * C; ++nc) {
        const T* src = x->value.data() + nc * H * W;
        T* dst = out.data() + nc * Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy)
            for (int ox = 0; ox < Wo; ++ox) {
                T acc = T(0);
                for (int dy = 0; dy < k; ++dy)
                    for (int dx = 0; dx < k; ++dx) acc += src[(oy * k + dy) * W + ox * k + dx];
                dst[oy * Wo + ox] = acc * inv;
            }
    }
    auto backprop = [=](Node<T>& n) {
        Tensor<T>& gx = n.parents[0]->grad_buffer();
        for (int64_t nc = 0; nc < static_cast<int64_t>(N) * C; ++nc) {
            const T* g = n.grad.data() + nc * Ho * Wo;
            T* dst = gx.data() + nc * H * W;
            for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                    const T gv = g[oy * Wo + ox] * inv;
                    for (int dy = 0; dy < k; ++dy)
                        for (int dx = 0; dx < k; ++dx) dst[(oy * k + dy) * W + ox * k + dx] += gv;
                }
        }
    };
    return ad_detail::make_node<T>(std::move(out), {x}, std::move(backprop), "avgpool2d");
}

// ---------------------------------------------------------------------------
// Fused softmax cross-entropy (mean over the batch)
// ---------------------------------------------------------------------------

template <typename T>
Var<T> cross_entropy(const Var<T>& logits, const std::vector<int>& labels) {
    DUSK_CHECK(logits->value.rank() == 2, "cross_entropy expects [N,K] logits, got ",
               shape_str(logits->value.shape()));
    const int N = logits->value.size(0), K = logits->value.size(1);
    DUSK_CHECK(static_cast<int>(labels.size()) == N, "cross_entropy: ", labels.size(),
               " labels for batch of ", N);
    for (int lbl : labels)
        DUSK_CHECK(lbl >= 0 && lbl < K, "cross_entropy: label ", lbl, " outside [0,", K, ")");

    T loss = T(0);
    for (int i = 0; i < N; ++i) {
        const T* row = logits->value.data() + static_cast<int64_t>(i) * K;
        T mx = row[0];
        for (int j = 1; j < K; ++j) mx = std::max(mx, row[j]);
        T lse = T(0);
        for (int j = 0; j < K; ++j) lse += std::exp(row[j] - mx);
        loss += std::log(lse) + mx - row[labels[static_cast<size_t>(i)]];
    }
    loss /= static_cast<T>(N);

    auto backprop = [labels, N, K](Node<T>& n) {
        const Var<T>& logits = n.parents[0];
        Tensor<T>& gx = logits->grad_buffer();
        const T g = n.grad[0] / static_cast<T>(N);
        for (int i = 0; i < N; ++i) {
            const T* row = logits->value.data() + static_cast<int64_t>(i) * K;
            T mx = row[0];
            for (int j = 1; j < K; ++j) mx = std::max(mx, row[j]);
            T lse = T(0);
            for (int j = 0; j < K; ++j) lse += std::exp(row[j] - mx);
            for (int j = 0; j < K; ++j) {
                T p = std::exp(row[j] - mx) / lse;
                if (j == labels[static_cast<size_t>(i)]) p -= T(1);
                gx[static_cast<int64_t>(i) * K + j] += g * p;
            }
        }
    };
    return ad_detail::make_node<T>(Tensor<T>::scalar(loss), {logits}, std::move(backprop),
                                   "cross_entropy");
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

template <typename T>
void backward(const Var<T>& root) {
    DUSK_CHECK(root != nullptr, "backward on null node");
    DUSK_CHECK(root->value.numel() == 1, "backward root must be scalar-shaped, got ",
               shape_str(root->value.shape()));
    DUSK_CHECK(!root->backward_ran, "backward called twice on the same root without a new tape");
    root->backward_ran = true;
    if (!root->requires_grad) return;

    // Iterative post-order DFS; reverse gives children-before-parents.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> done;   // fully expanded
    std::unordered_set<Node<T>*> open;   // on the current DFS path
    struct Frame {
        Node<T>* node;
        size_t next_parent;
    };
    std::vector<Frame> stack{{root.get(), 0}};
    open.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            Node<T>* p = f.node->parents[f.next_parent++].get();
            if (!p->requires_grad || done.count(p)) continue;
            DUSK_CHECK(!open.count(p), "cycle detected in autodiff graph");
            open.insert(p);
            stack.push_back({p, 0});
        } else {
            order.push_back(f.node);
            done.insert(f.node);
            open.erase(f.node);
            stack.pop_back();
        }
    }

    root->grad_buffer().fill(T(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backprop && n->grad.defined()) n->backprop(*n);
    }
}

} // namespace duskforge
