#include "duskforge/kernels.hpp"
#include "duskforge/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace duskforge;

namespace {

std::vector<float> random_vec(Rng& rng, int64_t n, float lo = -2.f, float hi = 2.f) {
    std::vector<float> v(static_cast<size_t>(n));
    for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
    return v;
}

// Sizes straddling vector width multiples, plus tiny and empty.
const std::vector<int64_t> kSizes = {0, 1, 3, 7, 8, 9, 15, 16, 17, 64, 255, 1024, 1033};

void check_equivalence(const kernels::KernelTable<float>& variant,
                       const kernels::KernelTable<float>& ref) {
    Rng rng(42);
    for (int64_t n : kSizes) {
        auto a = random_vec(rng, n);
        auto b = random_vec(rng, n, 0.1f, 2.f); // divisor stays away from zero
        std::vector<float> out_v(a.size()), out_r(a.size());

        // Elementwise kernels: one IEEE op per lane, must match bit for bit.
        variant.add(a.data(), b.data(), out_v.data(), n);
        ref.add(a.data(), b.data(), out_r.data(), n);
        CHECK(out_v == out_r);

        variant.sub(a.data(), b.data(), out_v.data(), n);
        ref.sub(a.data(), b.data(), out_r.data(), n);
        CHECK(out_v == out_r);

        variant.mul(a.data(), b.data(), out_v.data(), n);
        ref.mul(a.data(), b.data(), out_r.data(), n);
        CHECK(out_v == out_r);

        variant.div(a.data(), b.data(), out_v.data(), n);
        ref.div(a.data(), b.data(), out_r.data(), n);
        CHECK(out_v == out_r);

        variant.scale(1.7f, a.data(), out_v.data(), n);
        ref.scale(1.7f, a.data(), out_r.data(), n);
        CHECK(out_v == out_r);

        out_v = b;
        out_r = b;
        variant.axpy(-0.3f, a.data(), out_v.data(), n);
        ref.axpy(-0.3f, a.data(), out_r.data(), n);
        CHECK(out_v == out_r);

        out_v = b;
        out_r = b;
        variant.mul_acc(a.data(), b.data(), out_v.data(), n);
        ref.mul_acc(a.data(), b.data(), out_r.data(), n);
        CHECK(out_v == out_r);

        variant.clamp(a.data(), -0.5f, 0.5f, out_v.data(), n);
        ref.clamp(a.data(), -0.5f, 0.5f, out_r.data(), n);
        CHECK(out_v == out_r);

        variant.max_scalar(a.data(), 0.f, out_v.data(), n);
        ref.max_scalar(a.data(), 0.f, out_r.data(), n);
        CHECK(out_v == out_r);

        // Reductions reassociate; compare under a relative tolerance.
        const float dv = variant.dot(a.data(), b.data(), n);
        const float dr = ref.dot(a.data(), b.data(), n);
        CHECK(std::abs(dv - dr) <= 1e-5f * (1.f + std::abs(dr)) * std::sqrt(float(n) + 1.f));

        const float sv = variant.sum(a.data(), n);
        const float sr = ref.sum(a.data(), n);
        CHECK(std::abs(sv - sr) <= 1e-5f * (1.f + std::abs(sr)) * std::sqrt(float(n) + 1.f));
    }
}

} // namespace

TEST_CASE("scalar reference kernels compute what they claim") {
    const auto& k = kernels::table_f32_scalar();
    std::vector<float> a = {1.f, 2.f, 3.f};
    std::vector<float> b = {4.f, 5.f, 6.f};
    std::vector<float> out(3);
    k.add(a.data(), b.data(), out.data(), 3);
    CHECK(out == std::vector<float>{5.f, 7.f, 9.f});
    CHECK(k.dot(a.data(), b.data(), 3) == doctest::Approx(32.f));
    CHECK(k.sum(a.data(), 3) == doctest::Approx(6.f));
    k.clamp(a.data(), 1.5f, 2.5f, out.data(), 3);
    CHECK(out == std::vector<float>{1.5f, 2.f, 2.5f});
    k.max_scalar(a.data(), 2.f, out.data(), 3);
    CHECK(out == std::vector<float>{2.f, 2.f, 3.f});
    out = b;
    k.axpy(2.f, a.data(), out.data(), 3);
    CHECK(out == std::vector<float>{6.f, 9.f, 12.f});
}

TEST_CASE("AVX2 kernels are equivalent to the scalar reference") {
    const auto* avx2 = kernels::table_f32_avx2();
    if (!avx2) return; // not an x86 build
    check_equivalence(*avx2, kernels::table_f32_scalar());
}

TEST_CASE("NEON kernels are equivalent to the scalar reference") {
    const auto* neon = kernels::table_f32_neon();
    if (!neon) return; // not an ARM build
    check_equivalence(*neon, kernels::table_f32_scalar());
}

TEST_CASE("active dispatch table is one of the known variants") {
    const auto& active = kernels::table_f32();
    const std::string name = active.name;
    CHECK((name == "scalar" || name == "avx2" || name == "neon"));
    // f64 is always the scalar reference.
    CHECK(std::string(kernels::table_f64().name) == "scalar");
}
