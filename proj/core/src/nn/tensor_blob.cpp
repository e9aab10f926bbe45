#include "cmedl/nn/tensor_blob.hpp"

#include <cstdio>

#include "cmedl/byte_io.hpp"
#include "cmedl/errors.hpp"
#include "cmedl/image_io.hpp"

namespace cmedl::nn {

namespace {

std::uint8_t dtype_code(const torch::Tensor& t) {
    switch (t.scalar_type()) {
        case torch::kFloat: return 0;
        case torch::kDouble: return 1;
        case torch::kLong: return 2;
        case torch::kByte: return 3;
        default: throw FormatError("unsupported tensor dtype in checkpoint");
    }
}

torch::ScalarType dtype_of(std::uint8_t code) {
    switch (code) {
        case 0: return torch::kFloat;
        case 1: return torch::kDouble;
        case 2: return torch::kLong;
        case 3: return torch::kByte;
        default: throw FormatError("unknown tensor dtype code " + std::to_string(code));
    }
}

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv(const void* p, std::size_t n, std::uint64_t h) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) h = (h ^ b[i]) * kFnvPrime;
    return h;
}

}  // namespace

std::vector<char> encode_tensors(const NamedTensors& tensors) {
    detail::ByteWriter w;
    w.magic("CMW1");
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t0] : tensors) {
        const auto t = t0.detach().contiguous().cpu();
        w.str16(name);
        w.u8(dtype_code(t));
        w.u8(static_cast<std::uint8_t>(t.dim()));
        for (auto d : t.sizes()) w.i64(d);
        w.raw(t.data_ptr(), t.numel() * t.element_size());  // host is little-endian
    }
    return std::move(w.buffer());
}

NamedTensors decode_tensors(const std::vector<char>& bytes, const std::string& context) {
    detail::ByteReader r(bytes, context);
    r.expect_magic("CMW1");
    const auto n = r.u32();
    NamedTensors out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        auto name = r.str16();
        const auto dt = dtype_of(r.u8());
        const auto nd = r.u8();
        std::vector<std::int64_t> dims(nd);
        for (auto& d : dims) {
            d = r.i64();
            if (d < 0) throw FormatError(context + ": negative tensor dimension");
        }
        auto t = torch::empty(dims, torch::TensorOptions().dtype(dt));
        r.raw(t.data_ptr(), t.numel() * t.element_size());
        out.emplace_back(std::move(name), std::move(t));
    }
    if (r.remaining() != 0) throw FormatError(context + ": trailing bytes");
    return out;
}

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors) {
    write_file_bytes(path, encode_tensors(tensors));
}

NamedTensors load_tensors(const std::filesystem::path& path) { return decode_tensors(read_file_bytes(path), path.string()); }

std::uint64_t hash_tensors(const NamedTensors& tensors) {
    std::uint64_t h = kFnvOffset;
    for (const auto& [name, t0] : tensors) {
        const auto t = t0.detach().contiguous().cpu();
        h = fnv(name.data(), name.size(), h);
        const auto code = dtype_code(t);
        h = fnv(&code, 1, h);
        for (auto d : t.sizes()) h = fnv(&d, sizeof d, h);
        h = fnv(t.data_ptr(), t.numel() * t.element_size(), h);
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

NamedTensors module_parameters(const torch::nn::Module& m, const std::string& prefix) {
    NamedTensors out;
    for (const auto& item : m.named_parameters()) out.emplace_back(prefix + "." + item.key(), item.value());
    return out;
}

NamedTensors module_state(const torch::nn::Module& m, const std::string& prefix) {
    auto out = module_parameters(m, prefix);
    for (const auto& item : m.named_buffers()) out.emplace_back(prefix + "." + item.key(), item.value());
    return out;
}

}  // namespace cmedl::nn
