#include "duskforge/tensor.hpp"

#include <doctest.h>

using namespace duskforge;

TEST_CASE("tensor construction and invariants") {
    auto t = Tensor<float>::zeros({2, 3});
    CHECK(t.numel() == 6);
    CHECK(t.rank() == 2);
    CHECK(t.strides() == std::vector<int64_t>{3, 1});

    auto s = Tensor<float>::scalar(4.f);
    CHECK(s.rank() == 0);
    CHECK(s.numel() == 1);
    CHECK(s.item() == 4.f);

    Tensor<float> undef;
    CHECK_FALSE(undef.defined());
    CHECK(undef.numel() == 0);

    CHECK_THROWS_AS(Tensor<float>::zeros({2, 0}), Error);
    CHECK_THROWS_AS(Tensor<float>::from_data({2, 2}, {1.f, 2.f, 3.f}), Error);
    CHECK_THROWS_AS(Tensor<float>::zeros({4}).reshaped({5}), Error);
}

TEST_CASE("broadcast shape rules follow trailing alignment") {
    CHECK(broadcast_shapes({2, 3}, {3}) == std::vector<int>{2, 3});
    CHECK(broadcast_shapes({4, 1, 5}, {2, 5}) == std::vector<int>{4, 2, 5});
    CHECK(broadcast_shapes({1}, {7}) == std::vector<int>{7});
    CHECK(broadcast_shapes({}, {2, 2}) == std::vector<int>{2, 2});
    CHECK_THROWS_WITH_AS(static_cast<void>(broadcast_shapes({2, 3}, {2, 4})),
                         doctest::Contains("[2,3]"), Error);
}

TEST_CASE("finiteness scan") {
    auto t = Tensor<float>::from_data({3}, {1.f, 2.f, 3.f});
    CHECK(all_finite(t));
    t[1] = std::numeric_limits<float>::quiet_NaN();
    CHECK_FALSE(all_finite(t));
}
