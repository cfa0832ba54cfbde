#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fieldstore/error.h"

namespace fieldstore {

/// Little-endian fixed-width encoder over a growable byte buffer.
class Encoder {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<std::byte>(v)); }
    void u16(std::uint16_t v) { put_le(v); }
    void u32(std::uint32_t v) { put_le(v); }
    void u64(std::uint64_t v) { put_le(v); }
    /// u32 length prefix followed by the bytes.
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(std::as_bytes(std::span(s.data(), s.size())));
    }
    void raw(std::span<const std::byte> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

    /// Overwrites a previously written u32 (for back-patched lengths).
    void patch_u32(std::size_t at, std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_[at + i] = static_cast<std::byte>((v >> (8 * i)) & 0xff);
    }

    std::size_t size() const noexcept { return buf_.size(); }
    std::span<const std::byte> bytes() const noexcept { return buf_; }
    std::vector<std::byte> take() && { return std::move(buf_); }

private:
    template <typename T>
    void put_le(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
    }

    std::vector<std::byte> buf_;
};

/// Bounds-checked little-endian decoder. Throws CorruptCatalogue on underrun.
class Decoder {
public:
    explicit Decoder(std::span<const std::byte> data) : data_(data) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint16_t u16() { return get_le<std::uint16_t>(); }
    std::uint32_t u32() { return get_le<std::uint32_t>(); }
    std::uint64_t u64() { return get_le<std::uint64_t>(); }
    std::string str() {
        const auto n = u32();
        auto b = take(n);
        return std::string(reinterpret_cast<const char*>(b.data()), b.size());
    }
    std::span<const std::byte> take(std::size_t n) {
        if (n > remaining()) throw CorruptCatalogue("truncated record");
        auto out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    bool done() const noexcept { return pos_ == data_.size(); }

private:
    template <typename T>
    T get_le() {
        auto b = take(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<std::uint8_t>(b[i])) << (8 * i);
        return v;
    }

    std::span<const std::byte> data_;
    std::size_t pos_ = 0;
};

inline std::span<const std::byte> as_bytes(std::string_view s) noexcept {
    return std::as_bytes(std::span(s.data(), s.size()));
}

inline std::string to_string(std::span<const std::byte> b) {
    return std::string(reinterpret_cast<const char*>(b.data()), b.size());
}

}  // namespace fieldstore
