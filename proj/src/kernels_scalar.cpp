#include "duskforge/kernels.hpp"

#include <algorithm>

namespace duskforge::kernels {

namespace {

template <typename T>
void add_s(const T* a, const T* b, T* out, int64_t n) {
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void sub_s(const T* a, const T* b, T* out, int64_t n) {
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void mul_s(const T* a, const T* b, T* out, int64_t n) {
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void div_s(const T* a, const T* b, T* out, int64_t n) {
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] / b[i];
}

template <typename T>
void scale_s(T a, const T* x, T* out, int64_t n) {
    for (int64_t i = 0; i < n; ++i) out[i] = a * x[i];
}

template <typename T>
void axpy_s(T a, const T* x, T* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

template <typename T>
void mul_acc_s(const T* a, const T* b, T* acc, int64_t n) {
    for (int64_t i = 0; i < n; ++i) acc[i] = acc[i] + a[i] * b[i];
}

template <typename T>
T dot_s(const T* a, const T* b, int64_t n) {
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <typename T>
T sum_s(const T* x, int64_t n) {
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

template <typename T>
void clamp_s(const T* x, T lo, T hi, T* out, int64_t n) {
    for (int64_t i = 0; i < n; ++i) out[i] = std::min(std::max(x[i], lo), hi);
}

template <typename T>
void max_scalar_s(const T* x, T c, T* out, int64_t n) {
    for (int64_t i = 0; i < n; ++i) out[i] = std::max(x[i], c);
}

template <typename T>
constexpr KernelTable<T> make_scalar_table() {
    return KernelTable<T>{
        "scalar",   add_s<T>, sub_s<T>,     mul_s<T>, div_s<T>,
        scale_s<T>, axpy_s<T>, mul_acc_s<T>, dot_s<T>, sum_s<T>,
        clamp_s<T>, max_scalar_s<T>,
    };
}

const KernelTable<float> kScalarF32 = make_scalar_table<float>();
const KernelTable<double> kScalarF64 = make_scalar_table<double>();

} // namespace

const KernelTable<float>& table_f32_scalar() { return kScalarF32; }
const KernelTable<double>& table_f64_scalar() { return kScalarF64; }

} // namespace duskforge::kernels
