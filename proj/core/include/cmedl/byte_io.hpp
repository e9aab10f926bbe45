#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "cmedl/errors.hpp"

namespace cmedl::detail {

// Little-endian writer/reader over an in-memory buffer.
class ByteWriter {
public:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const char*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void magic(std::string_view m) { raw(m.data(), m.size()); }
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) { le(v); }
    void u32(std::uint32_t v) { le(v); }
    void u64(std::uint64_t v) { le(v); }
    void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v)); }
    void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
    void str16(std::string_view s) {
        u16(static_cast<std::uint16_t>(s.size()));
        raw(s.data(), s.size());
    }
    std::vector<char>& buffer() { return buf_; }

private:
    template <typename U>
    void le(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    std::vector<char> buf_;
};

class ByteReader {
public:
    ByteReader(const std::vector<char>& buf, std::string context) : buf_(buf), ctx_(std::move(context)) {}

    void need(std::size_t n) const {
        if (pos_ + n > buf_.size()) throw FormatError(ctx_ + ": truncated file");
    }
    void expect_magic(std::string_view m) {
        need(m.size());
        if (std::memcmp(buf_.data() + pos_, m.data(), m.size()) != 0)
            throw FormatError(ctx_ + ": bad magic (expected " + std::string(m) + ")");
        pos_ += m.size();
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf_[pos_++]);
    }
    std::uint16_t u16() { return le<std::uint16_t>(); }
    std::uint32_t u32() { return le<std::uint32_t>(); }
    std::uint64_t u64() { return le<std::uint64_t>(); }
    std::int64_t i64() { return static_cast<std::int64_t>(le<std::uint64_t>()); }
    float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
    double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
    std::string str16() {
        auto n = u16();
        need(n);
        std::string s(buf_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    void raw(void* dst, std::size_t n) {
        need(n);
        std::memcpy(dst, buf_.data() + pos_, n);
        pos_ += n;
    }
    std::size_t remaining() const { return buf_.size() - pos_; }
    const std::string& context() const { return ctx_; }

private:
    template <typename U>
    U le() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            v |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i));
        pos_ += sizeof(U);
        return v;
    }
    const std::vector<char>& buf_;
    std::string ctx_;
    std::size_t pos_ = 0;
};

}  // namespace cmedl::detail
