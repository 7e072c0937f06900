#pragma once

#include "duskforge/tensor.hpp"

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace duskforge {

// One trainable tensor plus the gradient computed for it this step.
template <typename T>
struct ParamGrad {
    std::string name;
    Tensor<T>* param = nullptr;
    const Tensor<T>* grad = nullptr; // null or undefined means "no gradient this step"
};

template <typename T>
void sgd_step(const std::vector<ParamGrad<T>>& params, T lr) {
    DUSK_CHECK(lr > T(0), "sgd_step: learning rate must be positive, got ", lr);
    for (const auto& pg : params) {
        if (!pg.grad || !pg.grad->defined()) continue;
        DUSK_CHECK(same_shape(*pg.param, *pg.grad), "sgd_step: grad shape ",
                   shape_str(pg.grad->shape()), " does not match param '", pg.name, "' ",
                   shape_str(pg.param->shape()));
        for (int64_t i = 0; i < pg.param->numel(); ++i) (*pg.param)[i] -= lr * (*pg.grad)[i];
    }
}

// Adam with bias correction. Moments are keyed by parameter name so state
// survives checkpoint round-trips.
template <typename T>
class Adam {
public:
    struct Config {
        T beta1 = T(0.9);
        T beta2 = T(0.999);
        T eps = T(1e-8);
    };

    Adam() = default;
    explicit Adam(Config cfg) : cfg_(cfg) {}

    void step(const std::vector<ParamGrad<T>>& params, T lr) {
        DUSK_CHECK(lr > T(0), "adam_step: learning rate must be positive, got ", lr);
        ++t_;
        const T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(t_));
        const T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(t_));
        for (const auto& pg : params) {
            if (!pg.grad || !pg.grad->defined()) continue;
            DUSK_CHECK(same_shape(*pg.param, *pg.grad), "adam_step: grad shape ",
                       shape_str(pg.grad->shape()), " does not match param '", pg.name, "' ",
                       shape_str(pg.param->shape()));
            Slot& s = slots_[pg.name];
            if (!s.m.defined()) {
                s.m = Tensor<T>::zeros(pg.param->shape());
                s.v = Tensor<T>::zeros(pg.param->shape());
            }
            for (int64_t i = 0; i < pg.param->numel(); ++i) {
                const T g = (*pg.grad)[i];
                s.m[i] = cfg_.beta1 * s.m[i] + (T(1) - cfg_.beta1) * g;
                s.v[i] = cfg_.beta2 * s.v[i] + (T(1) - cfg_.beta2) * g * g;
                const T mhat = s.m[i] / bc1;
                const T vhat = s.v[i] / bc2;
                (*pg.param)[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

    int64_t step_count() const { return t_; }

    // State export/import for checkpointing; entries ordered by name.
    std::vector<std::pair<std::string, Tensor<T>>> export_state() const {
        std::vector<std::pair<std::string, Tensor<T>>> out;
        for (const auto& [name, slot] : slots_) {
            out.emplace_back("m/" + name, slot.m);
            out.emplace_back("v/" + name, slot.v);
        }
        return out;
    }
    void import_state(const std::string& name, Tensor<T> moment) {
        DUSK_CHECK(name.size() > 2 && (name[0] == 'm' || name[0] == 'v') && name[1] == '/',
                   "adam: malformed state entry '", name, "'");
        Slot& s = slots_[name.substr(2)];
        (name[0] == 'm' ? s.m : s.v) = std::move(moment);
    }
    void set_step_count(int64_t t) { t_ = t; }

private:
    struct Slot {
        Tensor<T> m, v;
    };
    Config cfg_;
    std::map<std::string, Slot> slots_;
    int64_t t_ = 0;
};

} // namespace duskforge
