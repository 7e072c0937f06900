#include "duskforge/checkpoint.hpp"

#include "duskforge/common.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace duskforge {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'D', 'F', 'T', 'N'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

uint32_t read_u32(std::istream& is, const std::string& path, const char* what) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw ValidationError(format_msg("checkpoint '", path, "': truncated reading ", what));
    return v;
}

} // namespace

void Checkpoint::put(const std::string& name, Tensor<float> t) {
    DUSK_CHECK(t.defined(), "checkpoint entry '", name, "' is undefined");
    if (!entries_.count(name)) order_.push_back(name);
    entries_[name] = Entry{0, std::move(t), {}};
}

void Checkpoint::put(const std::string& name, Tensor<double> t) {
    DUSK_CHECK(t.defined(), "checkpoint entry '", name, "' is undefined");
    if (!entries_.count(name)) order_.push_back(name);
    entries_[name] = Entry{1, {}, std::move(t)};
}

bool Checkpoint::has(const std::string& name) const { return entries_.count(name) > 0; }

const Checkpoint::Entry& Checkpoint::entry(const std::string& name) const {
    auto it = entries_.find(name);
    DUSK_CHECK(it != entries_.end(), "checkpoint has no entry '", name, "'");
    return it->second;
}

const Tensor<float>& Checkpoint::f32(const std::string& name) const {
    const Entry& e = entry(name);
    DUSK_CHECK(e.dtype == 0, "checkpoint entry '", name, "' is f64, requested as f32");
    return e.t32;
}

const Tensor<double>& Checkpoint::f64(const std::string& name) const {
    const Entry& e = entry(name);
    DUSK_CHECK(e.dtype == 1, "checkpoint entry '", name, "' is f32, requested as f64");
    return e.t64;
}

std::vector<std::string> Checkpoint::names_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& n : order_)
        if (n.rfind(prefix, 0) == 0) out.push_back(n);
    return out;
}

void Checkpoint::save(const std::string& path) const {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream os(path, std::ios::binary);
    DUSK_CHECK(os.good(), "cannot open '", path, "' for writing");
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, static_cast<uint32_t>(order_.size()));
    for (const auto& name : order_) {
        const Entry& e = entries_.at(name);
        write_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        const auto& shape = e.dtype == 0 ? e.t32.shape() : e.t64.shape();
        write_u32(os, static_cast<uint32_t>(shape.size()));
        for (int ext : shape) write_u32(os, static_cast<uint32_t>(ext));
        const uint8_t tag = e.dtype;
        os.write(reinterpret_cast<const char*>(&tag), 1);
        if (e.dtype == 0)
            os.write(reinterpret_cast<const char*>(e.t32.data()),
                     static_cast<std::streamsize>(e.t32.numel() * sizeof(float)));
        else
            os.write(reinterpret_cast<const char*>(e.t64.data()),
                     static_cast<std::streamsize>(e.t64.numel() * sizeof(double)));
    }
    DUSK_CHECK(os.good(), "write failed for checkpoint '", path, "'");
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is.good()) throw ValidationError(format_msg("cannot open checkpoint '", path, "'"));
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw ValidationError(format_msg("checkpoint '", path, "': bad magic, not a DFTN file"));
    const uint32_t version = read_u32(is, path, "version");
    if (version != kVersion)
        throw ValidationError(
            format_msg("checkpoint '", path, "': unsupported version ", version));
    const uint32_t count = read_u32(is, path, "tensor count");

    Checkpoint ck;
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = read_u32(is, path, "name length");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is)
            throw ValidationError(format_msg("checkpoint '", path, "': truncated reading name"));
        const uint32_t rank = read_u32(is, path, "rank");
        std::vector<int> shape(rank);
        int64_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            shape[d] = static_cast<int>(read_u32(is, path, "extent"));
            numel *= shape[d];
        }
        uint8_t tag = 0;
        is.read(reinterpret_cast<char*>(&tag), 1);
        if (!is)
            throw ValidationError(format_msg("checkpoint '", path, "': truncated reading dtype"));
        if (tag == 0) {
            std::vector<float> data(static_cast<size_t>(numel));
            is.read(reinterpret_cast<char*>(data.data()),
                    static_cast<std::streamsize>(numel * sizeof(float)));
            if (!is)
                throw ValidationError(
                    format_msg("checkpoint '", path, "': truncated payload for '", name, "'"));
            ck.put(name, Tensor<float>::from_data(shape, std::move(data)));
        } else if (tag == 1) {
            std::vector<double> data(static_cast<size_t>(numel));
            is.read(reinterpret_cast<char*>(data.data()),
                    static_cast<std::streamsize>(numel * sizeof(double)));
            if (!is)
                throw ValidationError(
                    format_msg("checkpoint '", path, "': truncated payload for '", name, "'"));
            ck.put(name, Tensor<double>::from_data(shape, std::move(data)));
        } else {
            throw ValidationError(format_msg("checkpoint '", path, "': unknown dtype tag ",
                                             static_cast<int>(tag), " for '", name, "'"));
        }
    }
    return ck;
}

} // namespace duskforge
