#include "duskforge/autodiff.hpp"
#include "duskforge/gradcheck.hpp"
#include "duskforge/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace duskforge;

namespace {

template <typename T>
Tensor<T> random_tensor(Rng& rng, std::vector<int> shape, T lo, T hi) {
    auto t = Tensor<T>::zeros(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

// Generic per-op finite-difference property: random small tensors, f32 and
// f64 tolerances from the harness defaults, kink-free inputs by construction.
template <typename T, typename Builder>
void check_op(const std::string& name, Builder build, std::vector<Tensor<T>> leaves) {
    auto c = diag::make_fd_case<T>(name, std::move(leaves), build);
    auto rep = diag::run_fd_case(c);
    INFO(name, ": max rel err ", rep.max_rel_err, " over ", rep.checked, " probes");
    CHECK(rep.pass);
}

template <typename T>
void check_all_ops() {
    Rng rng(T(0) == 0.f ? 1234 : 5678);
    auto a = random_tensor<T>(rng, {3, 4}, T(-1), T(1));
    auto b = random_tensor<T>(rng, {3, 4}, T(0.3), T(1.5));
    auto row = random_tensor<T>(rng, {4}, T(0.3), T(1.2));

    check_op<T>("add", [](const auto& v) { return sum(add(v[0], v[1])); }, {a, b});
    check_op<T>("sub+mul", [](const auto& v) { return sum(mul(sub(v[0], v[1]), v[1])); }, {a, b});
    check_op<T>("div", [](const auto& v) { return sum(div(v[0], v[1])); }, {a, b});
    check_op<T>("broadcast_row", [](const auto& v) { return sum(mul(v[0], v[1])); }, {a, row});
    check_op<T>("pow", [](const auto& v) { return sum(pow_scalar(v[0], 3.0)); }, {a});
    check_op<T>("sqrt", [](const auto& v) { return sum(pow_scalar(v[0], 0.5)); }, {b});
    check_op<T>("exp", [](const auto& v) { return sum(exp(v[0])); }, {a});
    check_op<T>("log", [](const auto& v) { return sum(log(v[0])); }, {b});
    check_op<T>("sigmoid", [](const auto& v) { return sum(sigmoid(v[0])); }, {a});
    check_op<T>("mean_axis", [](const auto& v) { return sum(mul(mean_axis(v[0], 1), v[1])); },
                {a, random_tensor<T>(rng, {3}, T(-1), T(1))});
    check_op<T>("l2norm", [](const auto& v) { return l2norm(v[0]); }, {b});
    check_op<T>(
        "broadcast_to",
        [](const auto& v) { return sum(mul(broadcast_to(v[0], {3, 4}), v[1])); },
        {random_tensor<T>(rng, {1, 4}, T(-1), T(1)), b});
    check_op<T>("slice", [](const auto& v) { return sum(slice(v[0], 1, 1, 3)); }, {a});
    check_op<T>(
        "concat",
        [](const auto& v) {
            return sum(pow_scalar(concat(std::vector{v[0], v[1]}, 1), 2.0));
        },
        {a, b});
    check_op<T>(
        "matmul", [](const auto& v) { return sum(matmul(v[0], v[1])); },
        {random_tensor<T>(rng, {2, 3}, T(-1), T(1)), random_tensor<T>(rng, {3, 4}, T(-1), T(1))});

    // Kinked ops: keep probes away from their kinks.
    auto pos = random_tensor<T>(rng, {3, 4}, T(0.1), T(0.9));
    auto far = random_tensor<T>(rng, {3, 4}, T(0.2), T(0.4));
    check_op<T>("relu_positive", [](const auto& v) { return sum(relu(v[0])); }, {pos});
    check_op<T>("clamp_interior", [](const auto& v) { return sum(clamp(v[0], 0.0, 1.0)); }, {far});
    check_op<T>("abs_positive", [](const auto& v) { return sum(abs(v[0])); }, {pos});
    check_op<T>("max_scalar_above", [](const auto& v) { return sum(max_scalar(v[0], 0.05)); },
                {pos});

    check_op<T>(
        "conv2d", [](const auto& v) { return sum(conv2d(v[0], v[1], v[2], 1, 1)); },
        {random_tensor<T>(rng, {1, 2, 5, 5}, T(-1), T(1)),
         random_tensor<T>(rng, {3, 2, 3, 3}, T(-0.5), T(0.5)),
         random_tensor<T>(rng, {3}, T(-0.1), T(0.1))});
    check_op<T>(
        "conv2d_stride2", [](const auto& v) { return sum(conv2d(v[0], v[1], v[2], 2, 1)); },
        {random_tensor<T>(rng, {2, 2, 6, 6}, T(-1), T(1)),
         random_tensor<T>(rng, {2, 2, 3, 3}, T(-0.5), T(0.5)),
         random_tensor<T>(rng, {2}, T(-0.1), T(0.1))});
    check_op<T>("avgpool2d",
                [](const auto& v) { return sum(pow_scalar(avgpool2d(v[0], 2), 2.0)); },
                {random_tensor<T>(rng, {1, 2, 4, 4}, T(-1), T(1))});
    check_op<T>("cross_entropy", [](const auto& v) { return cross_entropy(v[0], {1, 0, 2}); },
                {random_tensor<T>(rng, {3, 4}, T(-2), T(2))});
}

} // namespace

TEST_CASE("frozen forward values") {
    auto x = make_const(Tensor<float>::from_data({2}, {3.f, 4.f}));
    auto y = mul_scalar(x, 2.f);
    CHECK(y->value[0] == 6.f);
    CHECK(y->value[1] == 8.f);

    auto zeros = make_const(Tensor<float>::zeros({3, 5, 2}));
    CHECK(sum(zeros)->value.item() == 0.f);
}

TEST_CASE("analytic gradients: x^2, mean, l2norm^2") {
    auto x = make_param(Tensor<float>::scalar(3.f));
    auto y = mul(x, x);
    backward(y);
    CHECK(x->grad[0] == doctest::Approx(6.f));

    auto v = make_param(Tensor<float>::full({4}, 2.f));
    auto m = mean(v);
    backward(m);
    for (int i = 0; i < 4; ++i) CHECK(v->grad[i] == doctest::Approx(0.25f));

    auto w = make_param(Tensor<float>::from_data({2}, {3.f, 4.f}));
    auto n2 = pow_scalar(l2norm(w), 2.f);
    backward(n2);
    CHECK(w->grad[0] == doctest::Approx(6.f).epsilon(1e-4));
    CHECK(w->grad[1] == doctest::Approx(8.f).epsilon(1e-4));
}

TEST_CASE("backward contract errors") {
    auto x = make_param(Tensor<float>::from_data({2}, {1.f, 2.f}));
    auto y = mul(x, x);
    CHECK_THROWS_WITH_AS(backward(y), doctest::Contains("scalar"), Error);

    auto s = sum(y);
    backward(s);
    CHECK_THROWS_WITH_AS(backward(s), doctest::Contains("twice"), Error);
}

TEST_CASE("shape mismatch errors name both shapes") {
    auto a = make_const(Tensor<float>::zeros({2, 3}));
    auto b = make_const(Tensor<float>::zeros({2, 4}));
    CHECK_THROWS_WITH_AS(static_cast<void>(add(a, b)), doctest::Contains("[2,3]"), Error);
    CHECK_THROWS_WITH_AS(static_cast<void>(matmul(a, b)), doctest::Contains("[2,4]"), Error);
}

TEST_CASE("non-finite forward values are rejected") {
    auto a = make_const(Tensor<float>::from_data({2}, {1.f, 0.f}));
    auto b = make_const(Tensor<float>::from_data({2}, {0.f, 0.f}));
    CHECK_THROWS_WITH_AS(static_cast<void>(div(a, b)), doctest::Contains("div"), Error);
}

TEST_CASE("clamp subgradient is 1 at the boundary") {
    auto x = make_param(Tensor<float>::from_data({3}, {0.f, 0.5f, 1.f}));
    auto y = sum(clamp(x, 0.f, 1.f));
    backward(y);
    CHECK(x->grad[0] == 1.f); // at lower boundary
    CHECK(x->grad[1] == 1.f);
    CHECK(x->grad[2] == 1.f); // at upper boundary

    auto z = make_param(Tensor<float>::from_data({3}, {-0.5f, 0.f, 2.f}));
    auto w = sum(max_scalar(z, 0.f));
    backward(w);
    CHECK(z->grad[0] == 0.f);
    CHECK(z->grad[1] == 1.f); // boundary passes through
    CHECK(z->grad[2] == 1.f);
}

TEST_CASE("per-op gradcheck against central finite differences (f32)") { check_all_ops<float>(); }
TEST_CASE("per-op gradcheck against central finite differences (f64)") { check_all_ops<double>(); }

TEST_CASE("backward linearity in the loss") {
    Rng rng(99);
    auto xt = random_tensor<float>(rng, {8}, -1.f, 1.f);

    auto grad_of = [&](float ca, float cb) {
        auto x = make_param(xt);
        auto f = sum(mul(x, x));
        auto g = sum(exp(x));
        auto root = add(mul_scalar(f, ca), mul_scalar(g, cb));
        backward(root);
        return x->grad;
    };
    auto gf = grad_of(1.f, 0.f);
    auto gg = grad_of(0.f, 1.f);
    auto combined = grad_of(2.f, 3.f);
    for (int64_t i = 0; i < combined.numel(); ++i)
        CHECK(combined[i] == doctest::Approx(2.f * gf[i] + 3.f * gg[i]).epsilon(1e-6));
}

TEST_CASE("deterministic forward and backward") {
    auto run = [] {
        Rng rng(7);
        auto x = make_param(random_tensor<float>(rng, {4, 4}, -1.f, 1.f));
        auto w = make_param(random_tensor<float>(rng, {4, 4}, -1.f, 1.f));
        auto loss = mean(pow_scalar(matmul(x, w), 2.f));
        backward(loss);
        return std::make_tuple(loss->value.item(), x->grad.vec(), w->grad.vec());
    };
    auto [l1, gx1, gw1] = run();
    auto [l2, gx2, gw2] = run();
    CHECK(l1 == l2);
    CHECK(gx1 == gx2);
    CHECK(gw1 == gw2);
}

TEST_CASE("gradients flow only into requires_grad leaves") {
    auto p = make_param(Tensor<float>::from_data({2}, {1.f, 2.f}));
    auto c = make_const(Tensor<float>::from_data({2}, {3.f, 4.f}));
    auto loss = sum(mul(p, c));
    backward(loss);
    CHECK(p->grad.defined());
    CHECK_FALSE(c->grad.defined());
}
