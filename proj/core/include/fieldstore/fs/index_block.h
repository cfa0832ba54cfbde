#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fieldstore/axis_set.h"
#include "fieldstore/codec.h"

namespace fieldstore::fsb {

/// Dense integer <-> uri bijection. Ids are assigned from 0 in insertion order.
class UriStore {
public:
    std::uint32_t insert(const std::string& uri);
    std::optional<std::uint32_t> find(const std::string& uri) const;
    const std::string& at(std::uint32_t id) const;
    std::size_t size() const noexcept { return uris_.size(); }

    void encode(Encoder& e) const;
    static UriStore decode(Decoder& d);

    friend bool operator==(const UriStore& a, const UriStore& b) { return a.uris_ == b.uris_; }

private:
    std::vector<std::string> uris_;
    std::map<std::string, std::uint32_t, std::less<>> ids_;
};

struct IndexValue {
    std::uint32_t uri_id = 0;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;

    friend bool operator==(const IndexValue&, const IndexValue&) = default;
};

/// Element key (canonical string) -> location, sorted by key.
///
/// On disk: u32 magic, u32 count, then per entry {u32 keylen, key, u32 uri_id,
/// u64 offset, u64 length}, then a u32 CRC32C of everything before it.
class IndexBlock {
public:
    /// Inserts or replaces.
    void put(std::string element_key, IndexValue value) { entries_[std::move(element_key)] = value; }
    std::optional<IndexValue> find(std::string_view element_key) const;

    const std::map<std::string, IndexValue, std::less<>>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    void clear() noexcept { entries_.clear(); }

    std::vector<std::byte> serialize() const;
    /// Throws CorruptCatalogue on bad magic, truncation, or checksum mismatch.
    static IndexBlock deserialize(std::span<const std::byte> bytes);

    friend bool operator==(const IndexBlock&, const IndexBlock&) = default;

private:
    std::map<std::string, IndexValue, std::less<>> entries_;
};

void encode_axes(Encoder& e, const AxisSet& axes);
AxisSet decode_axes(Decoder& d);

}  // namespace fieldstore::fsb
