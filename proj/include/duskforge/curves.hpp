#pragma once

#include "duskforge/autodiff.hpp"

#include <string>

namespace duskforge {

// Pixel-wise darkening curve families. Every family takes the curve input x
// and a darkening degree alpha, both in [0,1], and guarantees
//   f(x, a) <= x,  f monotone nondecreasing in x,  f(x, 0) = x.
// The iterative quadratic composes h(x,a) = a*x^2 + (1-a)*x with itself;
// the gamma family raises to 1/(1 - a*(1-eps)) so that a = 0 is exponent 1;
// the reciprocal family is (1-a)x / (1-ax) with a capped at 1-eps.
enum class CurveFamily {
    iterative_quadratic,
    gamma_curve,
    reciprocal_curve,
    heuristic_brightness, // fixed scale, no learned maps
    heuristic_gamma,      // fixed exponent, no learned maps
};

struct CurveSpec {
    CurveFamily family = CurveFamily::iterative_quadratic;
    int iterations = 8;             // iterative_quadratic only
    bool per_iteration_maps = false; // one alpha map per iteration instead of a shared one
    double heuristic_param = 0.2;    // brightness scale or fixed gamma exponent

    int map_count() const {
        return family == CurveFamily::iterative_quadratic && per_iteration_maps ? iterations : 1;
    }
    bool learnable() const {
        return family == CurveFamily::iterative_quadratic || family == CurveFamily::gamma_curve ||
               family == CurveFamily::reciprocal_curve;
    }
};

CurveFamily parse_curve_family(const std::string& name);
std::string curve_family_name(CurveFamily f);

inline constexpr double kCurveEps = 1e-3;

namespace curve_detail {

template <typename T>
void check_unit_range(const Tensor<T>& t, const char* what) {
    for (int64_t i = 0; i < t.numel(); ++i)
        DUSK_CHECK(t[i] >= T(0) && t[i] <= T(1), "curve ", what,
                   " outside [0,1]: ", t[i], " (inputs are clamped upstream; this is a bug)");
}

template <typename T>
Var<T> quadratic_step(const Var<T>& x, const Var<T>& alpha) {
    // h(x,a) = x + a*(x^2 - x); exact identity at a = 0.
    return add(x, mul(alpha, sub(mul(x, x), x)));
}

} // namespace curve_detail

// alphas holds spec.map_count() maps, each the same shape as x.
template <typename T>
Var<T> curve_apply(const Var<T>& x, const std::vector<Var<T>>& alphas, const CurveSpec& spec) {
    DUSK_CHECK(spec.learnable(), "curve_apply called for a heuristic family");
    DUSK_CHECK(static_cast<int>(alphas.size()) == spec.map_count(), "curve_apply: got ",
               alphas.size(), " alpha maps, expected ", spec.map_count());
    curve_detail::check_unit_range(x->value, "input");
    for (const auto& a : alphas) {
        DUSK_CHECK(same_shape(x->value, a->value), "curve_apply: alpha shape ",
                   shape_str(a->value.shape()), " does not match input ",
                   shape_str(x->value.shape()));
        curve_detail::check_unit_range(a->value, "alpha");
    }

    switch (spec.family) {
        case CurveFamily::iterative_quadratic: {
            DUSK_CHECK(spec.iterations >= 1, "iterative_quadratic needs iterations >= 1");
            Var<T> y = x;
            for (int i = 0; i < spec.iterations; ++i)
                y = curve_detail::quadratic_step(y, alphas[spec.per_iteration_maps ? i : 0]);
            return y;
        }
        case CurveFamily::gamma_curve: {
            // exponent = 1 / (1 - a*(1-eps)) in [1, 1/eps]
            auto denom = add_scalar(mul_scalar(alphas[0], -(1.0 - kCurveEps)), 1.0);
            auto exponent = pow_scalar(denom, -1.0);
            return pow_elem(x, exponent);
        }
        case CurveFamily::reciprocal_curve: {
            auto a = clamp(alphas[0], 0.0, 1.0 - kCurveEps);
            auto num = mul(add_scalar(neg(a), 1.0), x);
            auto den = add_scalar(neg(mul(a, x)), 1.0);
            return div(num, den);
        }
        default:
            throw Error("curve_apply: unhandled family");
    }
}

template <typename T>
Var<T> curve_apply(const Var<T>& x, const Var<T>& alpha, const CurveSpec& spec) {
    return curve_apply(x, std::vector<Var<T>>{alpha}, spec);
}

// Parameterless stand-ins used by the ablation configs.
template <typename T>
Var<T> darken_heuristic(const Var<T>& image, const CurveSpec& spec) {
    switch (spec.family) {
        case CurveFamily::heuristic_brightness:
            DUSK_CHECK(spec.heuristic_param > 0.0 && spec.heuristic_param <= 1.0,
                       "brightness scale must be in (0,1], got ", spec.heuristic_param);
            return mul_scalar(image, spec.heuristic_param);
        case CurveFamily::heuristic_gamma:
            DUSK_CHECK(spec.heuristic_param >= 1.0, "fixed gamma must be >= 1, got ",
                       spec.heuristic_param);
            return pow_scalar(image, spec.heuristic_param);
        default:
            throw Error("darken_heuristic: not a heuristic family");
    }
}

} // namespace duskforge
