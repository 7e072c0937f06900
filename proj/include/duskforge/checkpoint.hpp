#pragma once

#include "duskforge/tensor.hpp"

#include <map>
#include <string>
#include <vector>

namespace duskforge {

// Named-tensor container with a fixed little-endian binary layout:
//   magic "DFTN" | version u32 | count u32 | per tensor:
//   name_len u32, name bytes, rank u32, extents u32[rank],
//   dtype u8 (0 = f32, 1 = f64), raw element data.
// Entry order is preserved, so identical contents produce identical bytes.
class Checkpoint {
public:
    void put(const std::string& name, Tensor<float> t);
    void put(const std::string& name, Tensor<double> t);
    void put_scalar(const std::string& name, float v) { put(name, Tensor<float>::scalar(v)); }

    bool has(const std::string& name) const;
    const Tensor<float>& f32(const std::string& name) const;
    const Tensor<double>& f64(const std::string& name) const;
    float scalar(const std::string& name) const { return f32(name).item(); }

    const std::vector<std::string>& names() const { return order_; }
    size_t size() const { return order_.size(); }

    // Names starting with `prefix`, in insertion order.
    std::vector<std::string> names_with_prefix(const std::string& prefix) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

private:
    struct Entry {
        uint8_t dtype; // 0 = f32, 1 = f64
        Tensor<float> t32;
        Tensor<double> t64;
    };
    const Entry& entry(const std::string& name) const;

    std::vector<std::string> order_;
    std::map<std::string, Entry> entries_;
};

} // namespace duskforge
