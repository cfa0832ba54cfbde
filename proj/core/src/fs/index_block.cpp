#include "fieldstore/fs/index_block.h"

#include "fieldstore/checksum.h"
#include "fieldstore/error.h"

namespace fieldstore::fsb {

namespace {
constexpr std::uint32_t kIndexMagic = 0x58444946;  // "FIDX"
}

std::uint32_t UriStore::insert(const std::string& uri) {
    if (auto it = ids_.find(uri); it != ids_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(uris_.size());
    uris_.push_back(uri);
    ids_.emplace(uri, id);
    return id;
}

std::optional<std::uint32_t> UriStore::find(const std::string& uri) const {
    if (auto it = ids_.find(uri); it != ids_.end()) return it->second;
    return std::nullopt;
}

const std::string& UriStore::at(std::uint32_t id) const {
    if (id >= uris_.size()) throw CorruptCatalogue("uri id " + std::to_string(id) + " not in uri store");
    return uris_[id];
}

void UriStore::encode(Encoder& e) const {
    e.u32(static_cast<std::uint32_t>(uris_.size()));
    for (const auto& u : uris_) e.str(u);
}

UriStore UriStore::decode(Decoder& d) {
    UriStore store;
    const auto n = d.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        auto uri = d.str();
        if (store.find(uri)) throw CorruptCatalogue("duplicate uri in uri store");
        store.insert(uri);
    }
    return store;
}

std::optional<IndexValue> IndexBlock::find(std::string_view element_key) const {
    if (auto it = entries_.find(element_key); it != entries_.end()) return it->second;
    return std::nullopt;
}

std::vector<std::byte> IndexBlock::serialize() const {
    Encoder e;
    e.u32(kIndexMagic);
    e.u32(static_cast<std::uint32_t>(entries_.size()));
    for (const auto& [key, v] : entries_) {
        e.str(key);
        e.u32(v.uri_id);
        e.u64(v.offset);
        e.u64(v.length);
    }
    e.u32(crc32c(e.bytes()));
    return std::move(e).take();
}

IndexBlock IndexBlock::deserialize(std::span<const std::byte> bytes) {
    if (bytes.size() < 12) throw CorruptCatalogue("index block too short");
    const auto body = bytes.first(bytes.size() - 4);
    if (Decoder(bytes.last(4)).u32() != crc32c(body)) throw CorruptCatalogue("index block checksum mismatch");
    Decoder d(body);
    if (d.u32() != kIndexMagic) throw CorruptCatalogue("bad index block magic");
    IndexBlock block;
    const auto n = d.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        auto key = d.str();
        IndexValue v;
        v.uri_id = d.u32();
        v.offset = d.u64();
        v.length = d.u64();
        block.entries_.emplace(std::move(key), v);
    }
    if (!d.done()) throw CorruptCatalogue("trailing bytes in index block");
    return block;
}

void encode_axes(Encoder& e, const AxisSet& axes) {
    e.u32(static_cast<std::uint32_t>(axes.dims().size()));
    for (const auto& [dim, values] : axes.dims()) {
        e.str(dim);
        e.u32(static_cast<std::uint32_t>(values.size()));
        for (const auto& v : values) e.str(v);
    }
}

AxisSet decode_axes(Decoder& d) {
    AxisSet axes;
    const auto ndims = d.u32();
    for (std::uint32_t i = 0; i < ndims; ++i) {
        const auto dim = d.str();
        const auto n = d.u32();
        for (std::uint32_t j = 0; j < n; ++j) axes.insert(dim, d.str());
    }
    return axes;
}

}  // namespace fieldstore::fsb
