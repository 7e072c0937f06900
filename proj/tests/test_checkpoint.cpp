#include "duskforge/checkpoint.hpp"
#include "duskforge/rng.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace duskforge;

namespace {
std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}
} // namespace

TEST_CASE("checkpoint save/load restores every tensor bit-exactly") {
    Rng rng(11);
    Checkpoint ck;
    auto t32 = Tensor<float>::zeros({3, 5});
    for (int64_t i = 0; i < t32.numel(); ++i) t32[i] = static_cast<float>(rng.uniform(-10, 10));
    auto t64 = Tensor<double>::zeros({2, 2, 2});
    for (int64_t i = 0; i < t64.numel(); ++i) t64[i] = rng.uniform(-1e6, 1e6);
    ck.put("darkener/conv0/w", t32);
    ck.put("precise/values", t64);
    ck.put_scalar("ema/tau", 0.99f);

    const std::string path = temp_path("dusk_ck_test.dftn");
    ck.save(path);
    auto back = Checkpoint::load(path);

    REQUIRE(back.size() == 3);
    CHECK(back.names() == std::vector<std::string>{"darkener/conv0/w", "precise/values", "ema/tau"});
    CHECK(back.f32("darkener/conv0/w").vec() == t32.vec());
    CHECK(back.f64("precise/values").vec() == t64.vec());
    CHECK(back.scalar("ema/tau") == 0.99f);
    CHECK(back.names_with_prefix("darkener/") ==
          std::vector<std::string>{"darkener/conv0/w"});
    std::remove(path.c_str());
}

TEST_CASE("malformed checkpoints produce structured errors") {
    const std::string path = temp_path("dusk_ck_bad.dftn");

    { // bad magic
        std::ofstream os(path, std::ios::binary);
        os << "NOPE then some garbage";
    }
    CHECK_THROWS_WITH_AS(Checkpoint::load(path), doctest::Contains("magic"), ValidationError);

    { // truncated payload: write a valid file then cut it short
        Checkpoint ck;
        ck.put("w", Tensor<float>::full({64}, 1.f));
        ck.save(path);
        auto sz = std::filesystem::file_size(path);
        std::filesystem::resize_file(path, sz - 40);
    }
    CHECK_THROWS_WITH_AS(Checkpoint::load(path), doctest::Contains("truncated"), ValidationError);

    CHECK_THROWS_AS(Checkpoint::load(temp_path("does_not_exist.dftn")), ValidationError);
    std::remove(path.c_str());
}

TEST_CASE("same contents serialize to identical bytes") {
    auto build = [] {
        Checkpoint ck;
        ck.put("a", Tensor<float>::full({4}, 0.25f));
        ck.put("b", Tensor<float>::full({2, 2}, -1.f));
        return ck;
    };
    const std::string p1 = temp_path("dusk_ck_a.dftn");
    const std::string p2 = temp_path("dusk_ck_b.dftn");
    build().save(p1);
    build().save(p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
    CHECK(s1.substr(0, 4) == "DFTN");
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}
