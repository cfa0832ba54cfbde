#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fieldstore/axis_set.h"
#include "fieldstore/fs/index_block.h"

namespace fieldstore::fsb {

/// Largest record appended to a shared file with one write(2). Appends up to
/// this size do not interleave on the filesystems we target.
inline constexpr std::size_t kAtomicAppendLimit = 4096;

/// Pointer to one serialized IndexBlock plus everything needed to decide
/// whether it is worth loading.
struct IndexRef {
    std::string collocation;  // canonical
    std::string file;         // name relative to the dataset directory
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    AxisSet axes;
    UriStore uris;

    friend bool operator==(const IndexRef&, const IndexRef&) = default;
};

enum class TocKind : std::uint16_t {
    kInit = 1,
    kSubtocPtr = 2,
    kFullIndex = 3,
    kMask = 4,
};

/// One TOC entry. `name` is the dataset key for INIT and the sub-TOC file name
/// for SUBTOC_PTR and MASK. A FULL_INDEX names the sub-TOC it supersedes and
/// ranks at that sub-TOC's position, so closing a session does not reorder
/// its entries against other sessions'. `index` is used by FULL_INDEX only.
struct TocRecord {
    TocKind kind = TocKind::kInit;
    std::string name;
    IndexRef index;

    static TocRecord init(std::string dataset) { return {TocKind::kInit, std::move(dataset), {}}; }
    static TocRecord subtoc(std::string file) { return {TocKind::kSubtocPtr, std::move(file), {}}; }
    static TocRecord full_index(IndexRef ref, std::string replaces) {
        return {TocKind::kFullIndex, std::move(replaces), std::move(ref)};
    }
    static TocRecord mask(std::string file) { return {TocKind::kMask, std::move(file), {}}; }

    friend bool operator==(const TocRecord&, const TocRecord&) = default;
};

// Framing shared by TOC and sub-TOC records:
//   u32 magic | u16 kind | u32 payload length | payload | u32 CRC32C(previous bytes)

/// Throws InvalidArgument when the record exceeds kAtomicAppendLimit.
std::vector<std::byte> encode_toc_record(const TocRecord& record);

/// Sub-TOC entries have no size limit; they are appended by their owner only.
std::vector<std::byte> encode_subtoc_entry(const IndexRef& ref);

template <typename T>
struct ParseResult {
    std::vector<T> records;
    /// Bytes at the end that do not yet form a complete record.
    std::size_t incomplete_tail = 0;
};

/// Parses a record stream. An incomplete final record is reported, not
/// thrown: its append is still in flight. Checksum failures on complete
/// records throw CorruptCatalogue.
ParseResult<TocRecord> parse_toc(std::span<const std::byte> bytes);
ParseResult<IndexRef> parse_subtoc(std::span<const std::byte> bytes);

}  // namespace fieldstore::fsb
