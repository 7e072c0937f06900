// NEON variants of the f32 kernels, 4-wide mirror of the AVX2 file.
// vmulq/vaddq are used instead of vmlaq to keep lanes unfused like the
// scalar reference.

#if defined(__ARM_NEON) || defined(__ARM_NEON__)

#include "duskforge/kernels.hpp"

#include <arm_neon.h>

namespace duskforge::kernels {

namespace {

void add_v(const float* a, const float* b, float* out, int64_t n) {
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vaddq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_v(const float* a, const float* b, float* out, int64_t n) {
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vsubq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_v(const float* a, const float* b, float* out, int64_t n) {
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void div_v(const float* a, const float* b, float* out, int64_t n) {
    int64_t i = 0;
#if defined(__aarch64__)
    for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vdivq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
#endif
    for (; i < n; ++i) out[i] = a[i] / b[i];
}

void scale_v(float a, const float* x, float* out, int64_t n) {
    const float32x4_t va = vdupq_n_f32(a);
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vmulq_f32(va, vld1q_f32(x + i)));
    for (; i < n; ++i) out[i] = a * x[i];
}

void axpy_v(float a, const float* x, float* y, int64_t n) {
    const float32x4_t va = vdupq_n_f32(a);
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t prod = vmulq_f32(va, vld1q_f32(x + i));
        vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), prod));
    }
    for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void mul_acc_v(const float* a, const float* b, float* acc, int64_t n) {
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t prod = vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i));
        vst1q_f32(acc + i, vaddq_f32(vld1q_f32(acc + i), prod));
    }
    for (; i < n; ++i) acc[i] = acc[i] + a[i] * b[i];
}

float fold_lanes(float32x4_t v) {
    float lane[4];
    vst1q_f32(lane, v);
    return ((lane[0] + lane[1]) + lane[2]) + lane[3];
}

float dot_v(const float* a, const float* b, int64_t n) {
    float32x4_t acc = vdupq_n_f32(0.f);
    int64_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = vaddq_f32(acc, vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    float s = fold_lanes(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

float sum_v(const float* x, int64_t n) {
    float32x4_t acc = vdupq_n_f32(0.f);
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) acc = vaddq_f32(acc, vld1q_f32(x + i));
    float s = fold_lanes(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

void clamp_v(const float* x, float lo, float hi, float* out, int64_t n) {
    const float32x4_t vlo = vdupq_n_f32(lo);
    const float32x4_t vhi = vdupq_n_f32(hi);
    int64_t i = 0;
    for (; i + 4 <= n; i += 4)
        vst1q_f32(out + i, vminq_f32(vmaxq_f32(vld1q_f32(x + i), vlo), vhi));
    for (; i < n; ++i) out[i] = x[i] < lo ? lo : (x[i] > hi ? hi : x[i]);
}

void max_scalar_v(const float* x, float c, float* out, int64_t n) {
    const float32x4_t vc = vdupq_n_f32(c);
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vmaxq_f32(vld1q_f32(x + i), vc));
    for (; i < n; ++i) out[i] = x[i] < c ? c : x[i];
}

const KernelTable<float> kNeonF32 = {
    "neon", add_v,  sub_v,     mul_v, div_v,   scale_v, axpy_v,
    mul_acc_v, dot_v, sum_v, clamp_v, max_scalar_v,
};

} // namespace

const KernelTable<float>* table_f32_neon() { return &kNeonF32; }

} // namespace duskforge::kernels

#else

#include "duskforge/kernels.hpp"

namespace duskforge::kernels {
const KernelTable<float>* table_f32_neon() { return nullptr; }
} // namespace duskforge::kernels

#endif
