#pragma once

#include "duskforge/autodiff.hpp"
#include "duskforge/checkpoint.hpp"
#include "duskforge/optim.hpp"
#include "duskforge/rng.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace duskforge {

// A named trainable tensor owned by a network struct.
template <typename T>
struct PTensor {
    std::string name;
    Tensor<T> value;
};

// Per-tape view of parameters. Binding the same PTensor twice returns the
// same node, so a parameter shared between branches accumulates one gradient.
template <typename T>
class Binder {
public:
    explicit Binder(bool trainable) : trainable_(trainable) {}

    Var<T> operator()(PTensor<T>& p) {
        auto it = index_.find(&p);
        if (it != index_.end()) return bound_[it->second].second;
        Var<T> v = trainable_ ? make_param(p.value) : make_const(p.value);
        index_.emplace(&p, bound_.size());
        bound_.emplace_back(&p, v);
        return v;
    }

    bool trainable() const { return trainable_; }

    // Gradients gathered after backward, in binding order.
    std::vector<ParamGrad<T>> param_grads() const {
        std::vector<ParamGrad<T>> out;
        out.reserve(bound_.size());
        for (const auto& [p, var] : bound_)
            out.push_back({p->name, &p->value, var->grad.defined() ? &var->grad : nullptr});
        return out;
    }

    const std::vector<std::pair<PTensor<T>*, Var<T>>>& bound() const { return bound_; }

private:
    bool trainable_;
    std::vector<std::pair<PTensor<T>*, Var<T>>> bound_;
    std::unordered_map<PTensor<T>*, size_t> index_;
};

using ParamList = std::vector<PTensor<float>*>;

inline void save_params(Checkpoint& ck, const ParamList& params) {
    for (const PTensor<float>* p : params) ck.put(p->name, p->value);
}

inline void load_params(const Checkpoint& ck, const ParamList& params) {
    for (PTensor<float>* p : params) {
        const Tensor<float>& t = ck.f32(p->name);
        DUSK_CHECK(t.shape() == p->value.shape(), "checkpoint entry '", p->name, "' has shape ",
                   shape_str(t.shape()), ", expected ", shape_str(p->value.shape()));
        p->value = t;
    }
}

// FNV-1a over raw parameter bytes, for frozen-network assertions.
inline uint64_t hash_params(const ParamList& params) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const unsigned char* p, size_t n) {
        for (size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const PTensor<float>* p : params) {
        mix(reinterpret_cast<const unsigned char*>(p->name.data()), p->name.size());
        mix(reinterpret_cast<const unsigned char*>(p->value.data()),
            static_cast<size_t>(p->value.numel()) * sizeof(float));
    }
    return h;
}

// Initializers. fan_in counts incoming connections.
template <typename T>
void init_he_normal(Tensor<T>& t, int fan_in, Rng& rng) {
    const double std = std::sqrt(2.0 / fan_in);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.normal(0.0, std));
}

template <typename T>
void init_uniform_fanin(Tensor<T>& t, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(-bound, bound));
}

} // namespace duskforge
