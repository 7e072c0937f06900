#include "duskforge/optim.hpp"

#include <doctest.h>

using namespace duskforge;

TEST_CASE("sgd step matches the closed form") {
    auto p = Tensor<float>::scalar(1.f);
    auto g = Tensor<float>::scalar(2.f);
    sgd_step<float>({{"p", &p, &g}}, 0.1f);
    CHECK(p.item() == doctest::Approx(0.8f));

    // Zero gradient leaves the parameter untouched.
    auto z = Tensor<float>::scalar(0.f);
    sgd_step<float>({{"p", &p, &z}}, 0.1f);
    CHECK(p.item() == doctest::Approx(0.8f));
}

TEST_CASE("adam first step moves by about lr in the gradient direction") {
    Adam<float> adam;
    auto p = Tensor<float>::from_data({2}, {1.f, -1.f});
    auto g = Tensor<float>::from_data({2}, {0.7f, -0.002f});
    const float lr = 1e-3f;
    adam.step({{"p", &p, &g}}, lr);
    // Bias-corrected first step: delta = lr * g / (|g| + eps) ~ lr * sign(g).
    CHECK(p[0] == doctest::Approx(1.f - lr).epsilon(1e-3));
    CHECK(p[1] == doctest::Approx(-1.f + lr).epsilon(1e-2));
}

TEST_CASE("optimizer errors") {
    auto p = Tensor<float>::zeros({2});
    auto g = Tensor<float>::zeros({3});
    CHECK_THROWS_WITH_AS(sgd_step<float>({{"p", &p, &g}}, 0.1f), doctest::Contains("[3]"), Error);
    CHECK_THROWS_AS(sgd_step<float>({}, 0.f), Error);
    Adam<float> adam;
    CHECK_THROWS_AS(adam.step({{"p", &p, &g}}, 1e-3f), Error);
}

TEST_CASE("adam state round-trips through export/import") {
    Adam<float> a;
    auto p = Tensor<float>::from_data({2}, {0.5f, -0.5f});
    auto g = Tensor<float>::from_data({2}, {0.1f, 0.2f});
    a.step({{"w", &p, &g}}, 1e-3f);
    a.step({{"w", &p, &g}}, 1e-3f);

    Adam<float> b;
    for (auto& [name, moment] : a.export_state()) b.import_state(name, moment);
    b.set_step_count(a.step_count());

    auto pa = p, pb = p;
    a.step({{"w", &pa, &g}}, 1e-3f);
    b.step({{"w", &pb, &g}}, 1e-3f);
    CHECK(pa.vec() == pb.vec());
}
