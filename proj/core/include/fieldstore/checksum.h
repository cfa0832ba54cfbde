#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace fieldstore {

/// CRC32C (Castagnoli polynomial).
std::uint32_t crc32c(std::span<const std::byte> data);
std::uint32_t crc32c(std::string_view data);

/// 128-bit MD5 digest, used to derive object ids from unique strings.
std::array<std::uint8_t, 16> md5(std::string_view data);

/// 64-bit FNV-1a. Cheap stable hash for seeding generators.
constexpr std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : data) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace fieldstore
