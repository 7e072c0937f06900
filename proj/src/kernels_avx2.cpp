// AVX2 variants of the f32 kernels. Built with -mavx2 but without -mfma:
// each lane performs the same unfused mul/add sequence as the scalar
// reference, so elementwise kernels match it bit for bit. Only the two
// reductions reassociate (8 lane accumulators, lanes folded in index order).

#if defined(__AVX2__)

#include "duskforge/kernels.hpp"

#include <immintrin.h>

namespace duskforge::kernels {

namespace {

void add_v(const float* a, const float* b, float* out, int64_t n) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_v(const float* a, const float* b, float* out, int64_t n) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_v(const float* a, const float* b, float* out, int64_t n) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void div_v(const float* a, const float* b, float* out, int64_t n) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_div_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] / b[i];
}

void scale_v(float a, const float* x, float* out, int64_t n) {
    const __m256 va = _mm256_set1_ps(a);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) out[i] = a * x[i];
}

void axpy_v(float a, const float* x, float* y, int64_t n) {
    const __m256 va = _mm256_set1_ps(a);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 prod = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
    }
    for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void mul_acc_v(const float* a, const float* b, float* acc, int64_t n) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 prod = _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
        _mm256_storeu_ps(acc + i, _mm256_add_ps(_mm256_loadu_ps(acc + i), prod));
    }
    for (; i < n; ++i) acc[i] = acc[i] + a[i] * b[i];
}

float fold_lanes(__m256 v) {
    alignas(32) float lane[8];
    _mm256_store_ps(lane, v);
    float s = lane[0];
    for (int k = 1; k < 8; ++k) s += lane[k];
    return s;
}

float dot_v(const float* a, const float* b, int64_t n) {
    __m256 acc = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 prod = _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
        acc = _mm256_add_ps(acc, prod);
    }
    float s = fold_lanes(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

float sum_v(const float* x, int64_t n) {
    __m256 acc = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
    float s = fold_lanes(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

void clamp_v(const float* x, float lo, float hi, float* out, int64_t n) {
    const __m256 vlo = _mm256_set1_ps(lo);
    const __m256 vhi = _mm256_set1_ps(hi);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_min_ps(_mm256_max_ps(_mm256_loadu_ps(x + i), vlo), vhi));
    for (; i < n; ++i) out[i] = x[i] < lo ? lo : (x[i] > hi ? hi : x[i]);
}

void max_scalar_v(const float* x, float c, float* out, int64_t n) {
    const __m256 vc = _mm256_set1_ps(c);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_max_ps(_mm256_loadu_ps(x + i), vc));
    for (; i < n; ++i) out[i] = x[i] < c ? c : x[i];
}

const KernelTable<float> kAvx2F32 = {
    "avx2", add_v,  sub_v,     mul_v, div_v,   scale_v, axpy_v,
    mul_acc_v, dot_v, sum_v, clamp_v, max_scalar_v,
};

} // namespace

const KernelTable<float>* table_f32_avx2() { return &kAvx2F32; }

} // namespace duskforge::kernels

#else

#include "duskforge/kernels.hpp"

namespace duskforge::kernels {
const KernelTable<float>* table_f32_avx2() { return nullptr; }
} // namespace duskforge::kernels

#endif
