#pragma once

#include <cstdint>

namespace duskforge::kernels {

// Flat-array inner loops behind all tensor arithmetic. Every entry has a
// scalar reference implementation; f32 additionally has AVX2 and NEON
// variants picked once at startup. Elementwise kernels are bit-identical
// across variants (one IEEE op per lane, no fused contraction); the two
// reductions (dot, sum) may differ in association and are equivalence-tested
// against the scalar reference under a relative tolerance.
template <typename T>
struct KernelTable {
    const char* name;
    void (*add)(const T* a, const T* b, T* out, int64_t n);
    void (*sub)(const T* a, const T* b, T* out, int64_t n);
    void (*mul)(const T* a, const T* b, T* out, int64_t n);
    void (*div)(const T* a, const T* b, T* out, int64_t n);
    void (*scale)(T a, const T* x, T* out, int64_t n);   // out = a*x
    void (*axpy)(T a, const T* x, T* y, int64_t n);      // y += a*x
    void (*mul_acc)(const T* a, const T* b, T* acc, int64_t n); // acc += a.*b
    T (*dot)(const T* a, const T* b, int64_t n);
    T (*sum)(const T* x, int64_t n);
    void (*clamp)(const T* x, T lo, T hi, T* out, int64_t n);
    void (*max_scalar)(const T* x, T c, T* out, int64_t n);
};

enum class SimdLevel { scalar, avx2, neon };

// Active tables (chosen once; DUSKFORGE_SIMD=scalar|avx2|neon|auto overrides).
const KernelTable<float>& table_f32();
const KernelTable<double>& table_f64();

// Reference tables, always scalar. Equivalence tests compare against these.
const KernelTable<float>& table_f32_scalar();
const KernelTable<double>& table_f64_scalar();

// Variant tables for targeted tests; null when unsupported on this CPU/build.
const KernelTable<float>* table_f32_avx2();
const KernelTable<float>* table_f32_neon();

SimdLevel active_level();

template <typename T>
const KernelTable<T>& table();
template <>
inline const KernelTable<float>& table<float>() { return table_f32(); }
template <>
inline const KernelTable<double>& table<double>() { return table_f64(); }

} // namespace duskforge::kernels
