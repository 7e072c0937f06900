#include "duskforge/kernels.hpp"

#include "duskforge/common.hpp"

#include <cstdlib>
#include <cstring>
#include <string>
#include <thread>

namespace duskforge {

int worker_threads() {
    static const int cap = [] {
        int hw = static_cast<int>(std::thread::hardware_concurrency());
        if (hw <= 0) hw = 1;
        if (const char* env = std::getenv("DUSKFORGE_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1 && v < hw) return v;
            if (v >= hw) return hw;
        }
        return hw;
    }();
    return cap;
}

namespace kernels {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

struct Selection {
    const KernelTable<float>* f32;
    SimdLevel level;
};

Selection select() {
    std::string mode = "auto";
    if (const char* env = std::getenv("DUSKFORGE_SIMD")) mode = env;

    if (mode == "scalar") return {&table_f32_scalar(), SimdLevel::scalar};
    if (mode == "avx2") {
        const KernelTable<float>* t = table_f32_avx2();
        DUSK_CHECK(t != nullptr && cpu_has_avx2(), "DUSKFORGE_SIMD=avx2 but AVX2 is unavailable");
        return {t, SimdLevel::avx2};
    }
    if (mode == "neon") {
        const KernelTable<float>* t = table_f32_neon();
        DUSK_CHECK(t != nullptr, "DUSKFORGE_SIMD=neon but NEON is unavailable");
        return {t, SimdLevel::neon};
    }
    DUSK_CHECK(mode == "auto", "unknown DUSKFORGE_SIMD value '", mode,
               "' (expected auto|scalar|avx2|neon)");

    if (const KernelTable<float>* t = table_f32_avx2(); t != nullptr && cpu_has_avx2())
        return {t, SimdLevel::avx2};
    if (const KernelTable<float>* t = table_f32_neon(); t != nullptr)
        return {t, SimdLevel::neon};
    return {&table_f32_scalar(), SimdLevel::scalar};
}

const Selection& selection() {
    static const Selection s = select();
    return s;
}

} // namespace

const KernelTable<float>& table_f32() { return *selection().f32; }

// f64 exists for tight gradient checking, not throughput; scalar only.
const KernelTable<double>& table_f64() { return table_f64_scalar(); }

SimdLevel active_level() { return selection().level; }

} // namespace kernels
} // namespace duskforge
