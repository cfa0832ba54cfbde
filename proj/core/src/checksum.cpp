#include "fieldstore/checksum.h"

#include <openssl/evp.h>

#include <boost/crc.hpp>

#include "fieldstore/error.h"

namespace fieldstore {

namespace {
using Crc32c = boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true>;
}

std::uint32_t crc32c(std::span<const std::byte> data) {
    Crc32c crc;
    crc.process_bytes(data.data(), data.size());
    return crc.checksum();
}

std::uint32_t crc32c(std::string_view data) {
    return crc32c(std::as_bytes(std::span(data.data(), data.size())));
}

std::array<std::uint8_t, 16> md5(std::string_view data) {
    std::array<std::uint8_t, 16> out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_md5(), nullptr) != 1 || len != out.size()) {
        throw Error("md5 digest failed");
    }
    return out;
}

}  // namespace fieldstore
