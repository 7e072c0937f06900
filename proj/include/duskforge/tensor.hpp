#pragma once

#include "duskforge/common.hpp"

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

namespace duskforge {

// Dense row-major array. Rank 0 with one element is a scalar; a
// default-constructed Tensor is empty (numel 0) and stands for "not
// allocated", e.g. an untouched gradient slot.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape) {
        Tensor t;
        t.shape_ = std::move(shape);
        t.validate_shape();
        t.data_.assign(static_cast<size_t>(product(t.shape_)), T(0));
        t.defined_ = true;
        return t;
    }

    static Tensor full(std::vector<int> shape, T v) {
        Tensor t = zeros(std::move(shape));
        t.fill(v);
        return t;
    }

    static Tensor from_data(std::vector<int> shape, std::vector<T> data) {
        Tensor t;
        t.shape_ = std::move(shape);
        t.validate_shape();
        DUSK_CHECK(static_cast<int64_t>(data.size()) == product(t.shape_),
                   "tensor data length ", data.size(), " does not match shape ",
                   shape_str(t.shape_));
        t.data_ = std::move(data);
        t.defined_ = true;
        return t;
    }

    static Tensor scalar(T v) { return from_data({}, {v}); }

    bool defined() const { return defined_; }
    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int size(int axis) const { return shape_.at(static_cast<size_t>(axis)); }
    int64_t numel() const { return defined_ ? static_cast<int64_t>(data_.size()) : 0; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    T item() const {
        DUSK_CHECK(numel() == 1, "item() on tensor of shape ", shape_str(shape_));
        return data_[0];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    // Same data, new extents. Element count must be preserved.
    Tensor reshaped(std::vector<int> shape) const {
        Tensor t;
        t.shape_ = std::move(shape);
        t.validate_shape();
        DUSK_CHECK(product(t.shape_) == numel(), "cannot reshape ", shape_str(shape_), " (",
                   numel(), " elements) to ", shape_str(t.shape_));
        t.data_ = data_;
        t.defined_ = true;
        return t;
    }

    std::vector<int64_t> strides() const {
        std::vector<int64_t> s(shape_.size(), 1);
        for (int i = static_cast<int>(shape_.size()) - 2; i >= 0; --i)
            s[i] = s[i + 1] * shape_[i + 1];
        return s;
    }

    static int64_t product(const std::vector<int>& shape) {
        int64_t n = 1;
        for (int e : shape) n *= e;
        return n;
    }

private:
    void validate_shape() const {
        for (int e : shape_)
            DUSK_CHECK(e > 0, "non-positive extent in shape ", shape_str(shape_));
    }

    std::vector<int> shape_;
    std::vector<T> data_;
    bool defined_ = false;
};

template <typename T>
bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
    return a.shape() == b.shape();
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
    for (int64_t i = 0; i < t.numel(); ++i)
        if (!std::isfinite(t[i])) return false;
    return true;
}

// NumPy-style trailing alignment: extents must match or one of them be 1.
inline std::vector<int> broadcast_shapes(const std::vector<int>& a, const std::vector<int>& b) {
    const size_t ra = a.size(), rb = b.size();
    const size_t r = std::max(ra, rb);
    std::vector<int> out(r, 1);
    for (size_t i = 0; i < r; ++i) {
        const int ea = i < ra ? a[ra - 1 - i] : 1;
        const int eb = i < rb ? b[rb - 1 - i] : 1;
        DUSK_CHECK(ea == eb || ea == 1 || eb == 1, "shapes not broadcastable: ", shape_str(a),
                   " vs ", shape_str(b));
        out[r - 1 - i] = std::max(ea, eb);
    }
    return out;
}

template <typename T>
Tensor<T> cast_tensor(const Tensor<float>& src) {
    std::vector<T> data(static_cast<size_t>(src.numel()));
    for (int64_t i = 0; i < src.numel(); ++i) data[static_cast<size_t>(i)] = static_cast<T>(src[i]);
    return Tensor<T>::from_data(src.shape(), std::move(data));
}

} // namespace duskforge
