#pragma once

#include "duskforge/autodiff.hpp"
#include "duskforge/rng.hpp"

#include <functional>
#include <string>
#include <vector>

namespace duskforge::diag {

// Central finite differences against reverse-mode gradients. The numeric
// side only ever evaluates forward values, and it evaluates them on the
// f64 instantiation of the same graph builder (`build_ref`), which keeps
// the difference quotient out of f32 cancellation noise while remaining
// independent of the backward rules under test.
//
// Error metric: per leaf tensor, |analytic - numeric| normalized by the
// largest gradient magnitude seen in that leaf (clamped below by `floor`),
// so uniformly-tiny gradients are not amplified into false alarms.
template <typename T>
struct FdCase {
    std::string name;
    std::vector<Tensor<T>> leaves;
    std::function<Var<T>(const std::vector<Var<T>>&)> build; // must return a scalar node
    std::function<Var<double>(const std::vector<Var<double>>&)> build_ref;
    T step;
    T tolerance;
    T floor;
    int max_checks_per_leaf = 8;
};

template <typename T>
struct FdReport {
    std::string name;
    T max_rel_err = T(0);
    T tolerance = T(0);
    bool pass = false;
    int checked = 0;
    std::string worst_leaf;
    int64_t worst_index = -1;
};

template <typename T>
FdReport<T> run_fd_case(const FdCase<T>& c) {
    FdReport<T> rep;
    rep.name = c.name;
    rep.tolerance = c.tolerance;

    // Analytic pass in T.
    std::vector<Var<T>> leaf_vars;
    leaf_vars.reserve(c.leaves.size());
    for (const auto& t : c.leaves) leaf_vars.push_back(make_param(t));
    Var<T> root = c.build(leaf_vars);
    DUSK_CHECK(root->value.numel() == 1, "gradcheck case '", c.name,
               "' must build a scalar root, got ", shape_str(root->value.shape()));
    backward(root);

    // Numeric side in f64.
    DUSK_CHECK(static_cast<bool>(c.build_ref), "gradcheck case '", c.name,
               "' is missing the f64 reference builder");
    std::vector<Tensor<double>> work;
    work.reserve(c.leaves.size());
    for (const auto& t : c.leaves) {
        auto d = Tensor<double>::zeros(t.shape());
        for (int64_t i = 0; i < t.numel(); ++i) d[i] = static_cast<double>(t[i]);
        work.push_back(std::move(d));
    }
    auto eval_at = [&]() -> double {
        std::vector<Var<double>> vars;
        vars.reserve(work.size());
        for (const auto& t : work) vars.push_back(make_const(t));
        return c.build_ref(vars)->value.item();
    };

    const double step = static_cast<double>(c.step);
    for (size_t li = 0; li < c.leaves.size(); ++li) {
        const Tensor<T>& grad = leaf_vars[li]->grad;
        const int64_t n = c.leaves[li].numel();

        std::vector<int64_t> picks;
        if (n <= c.max_checks_per_leaf) {
            for (int64_t i = 0; i < n; ++i) picks.push_back(i);
        } else {
            Rng rng(derive_seed(0x9dc4c0ffee ^ li, streams::init, std::hash<std::string>{}(c.name)));
            for (int i = 0; i < c.max_checks_per_leaf; ++i)
                picks.push_back(rng.uniform_int(0, static_cast<int>(n - 1)));
        }

        double scale = static_cast<double>(c.floor);
        if (grad.defined())
            for (int64_t i = 0; i < n; ++i)
                scale = std::max(scale, std::abs(static_cast<double>(grad[i])));

        for (int64_t idx : picks) {
            const double orig = work[li][idx];
            work[li][idx] = orig + step;
            const double up = eval_at();
            work[li][idx] = orig - step;
            const double down = eval_at();
            work[li][idx] = orig;
            const double numeric = (up - down) / (2.0 * step);
            const double analytic = grad.defined() ? static_cast<double>(grad[idx]) : 0.0;
            const double denom = std::max(scale, std::abs(numeric));
            const double rel = std::abs(analytic - numeric) / denom;
            ++rep.checked;
            if (rel > static_cast<double>(rep.max_rel_err)) {
                rep.max_rel_err = static_cast<T>(rel);
                rep.worst_leaf = "leaf" + std::to_string(li);
                rep.worst_index = idx;
            }
        }
    }
    rep.pass = rep.max_rel_err < c.tolerance;
    return rep;
}

inline float default_step(float) { return 1e-3f; }
inline double default_step(double) { return 1e-5; }
inline float default_tolerance(float) { return 1e-3f; }
inline double default_tolerance(double) { return 1e-6; }
inline float default_floor(float) { return 1e-3f; }
inline double default_floor(double) { return 1e-8; }

// Convenience for writing a case from one generic builder lambda that works
// for both scalar types (ops are overloaded on Var<T>).
template <typename T, typename Builder>
FdCase<T> make_fd_case(std::string name, std::vector<Tensor<T>> leaves, Builder build) {
    FdCase<T> c;
    c.name = std::move(name);
    c.leaves = std::move(leaves);
    c.build = build;
    c.build_ref = build;
    c.step = default_step(T{});
    c.tolerance = default_tolerance(T{});
    c.floor = default_floor(T{});
    return c;
}

// Registered named cases covering every differentiable op, every loss, and
// the full stage-1/stage-2 training graphs. Implemented in gradcheck.cpp.
std::vector<std::string> registered_fd_cases();
FdReport<float> run_registered_f32(const std::string& name);
FdReport<double> run_registered_f64(const std::string& name);

} // namespace duskforge::diag
