#include "fieldstore/engine/engine.h"

#include <cstdio>

#include "fieldstore/checksum.h"
#include "fieldstore/error.h"

namespace fieldstore {

namespace {

std::uint64_t parse_hex64(std::string_view s) {
    std::uint64_t v = 0;
    for (char c : s) {
        v <<= 4;
        if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F') v |= static_cast<std::uint64_t>(c - 'A' + 10);
        else throw InvalidArgument("bad hex digit in object id");
    }
    return v;
}

}  // namespace

std::string ObjectId::hex() const {
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(hi),
                  static_cast<unsigned long long>(lo));
    return buf;
}

ObjectId ObjectId::from_hex(std::string_view hex) {
    if (hex.size() != 32) throw InvalidArgument("object id must have 32 hex digits");
    return ObjectId{parse_hex64(hex.substr(0, 16)), parse_hex64(hex.substr(16))};
}

ObjectId ObjectId::digest(std::string_view unique) {
    const auto d = md5(unique);
    ObjectId id;
    for (int i = 0; i < 8; ++i) {
        id.hi = (id.hi << 8) | d[i];
        id.lo = (id.lo << 8) | d[8 + i];
    }
    return id;
}

std::string KvRef::uri() const {
    return "kv://" + ns + "/" + id.hex();
}

KvRef KvRef::parse(std::string_view uri) {
    constexpr std::string_view kScheme = "kv://";
    if (uri.substr(0, kScheme.size()) != kScheme) throw InvalidArgument("not a kv uri: " + std::string(uri));
    const auto slash = uri.rfind('/');
    if (slash < kScheme.size()) throw InvalidArgument("bad kv uri: " + std::string(uri));
    return KvRef{std::string(uri.substr(kScheme.size(), slash - kScheme.size())), ObjectId::from_hex(uri.substr(slash + 1))};
}

EngineOpCounters EngineOpCounters::since(const EngineOpCounters& earlier) const {
    EngineOpCounters d;
    d.kv_put = kv_put - earlier.kv_put;
    d.kv_get = kv_get - earlier.kv_get;
    d.kv_list = kv_list - earlier.kv_list;
    d.blob_write = blob_write - earlier.blob_write;
    d.blob_read = blob_read - earlier.blob_read;
    d.ns_create = ns_create - earlier.ns_create;
    d.id_alloc = id_alloc - earlier.id_alloc;
    return d;
}

std::vector<std::byte> Engine::blob_read(const std::string& ns, const ObjectId& id, std::uint64_t offset,
                                         std::uint64_t length) {
    std::vector<std::byte> out(length);
    blob_read(ns, id, offset, out);
    return out;
}

}  // namespace fieldstore
