#include "fieldstore/fs/toc.h"

#include "fieldstore/checksum.h"
#include "fieldstore/codec.h"
#include "fieldstore/error.h"

namespace fieldstore::fsb {

namespace {

constexpr std::uint32_t kTocMagic = 0x434f5446;     // "FTOC"
constexpr std::uint32_t kSubtocMagic = 0x42535446;  // "FTSB"
constexpr std::uint16_t kSubtocEntry = 1;
constexpr std::size_t kHeader = 4 + 2 + 4;
constexpr std::size_t kTrailer = 4;

void encode_ref(Encoder& e, const IndexRef& ref) {
    e.str(ref.collocation);
    e.str(ref.file);
    e.u64(ref.offset);
    e.u64(ref.length);
    encode_axes(e, ref.axes);
    ref.uris.encode(e);
}

IndexRef decode_ref(Decoder& d) {
    IndexRef ref;
    ref.collocation = d.str();
    ref.file = d.str();
    ref.offset = d.u64();
    ref.length = d.u64();
    ref.axes = decode_axes(d);
    ref.uris = UriStore::decode(d);
    return ref;
}

std::vector<std::byte> frame(std::uint32_t magic, std::uint16_t kind, std::span<const std::byte> payload) {
    Encoder e;
    e.u32(magic);
    e.u16(kind);
    e.u32(static_cast<std::uint32_t>(payload.size()));
    e.raw(payload);
    e.u32(crc32c(e.bytes()));
    return std::move(e).take();
}

struct Frame {
    std::uint16_t kind;
    std::span<const std::byte> payload;
};

/// Splits a stream into verified frames. Stops at an incomplete tail.
template <typename F>
std::size_t for_each_frame(std::span<const std::byte> bytes, std::uint32_t magic, F&& fn) {
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const auto rest = bytes.subspan(pos);
        if (rest.size() < kHeader) return rest.size();
        Decoder h(rest.first(kHeader));
        const auto m = h.u32();
        const auto kind = h.u16();
        const auto len = h.u32();
        if (m != magic) throw CorruptCatalogue("bad record magic at offset " + std::to_string(pos));
        const std::size_t total = kHeader + std::size_t{len} + kTrailer;
        if (rest.size() < total) return rest.size();
        const auto body = rest.first(total - kTrailer);
        if (Decoder(rest.subspan(total - kTrailer, kTrailer)).u32() != crc32c(body))
            throw CorruptCatalogue("record checksum mismatch at offset " + std::to_string(pos));
        fn(Frame{kind, body.subspan(kHeader)});
        pos += total;
    }
    return 0;
}

}  // namespace

std::vector<std::byte> encode_toc_record(const TocRecord& record) {
    Encoder p;
    switch (record.kind) {
        case TocKind::kInit:
        case TocKind::kSubtocPtr:
        case TocKind::kMask:
            p.str(record.name);
            break;
        case TocKind::kFullIndex:
            p.str(record.name);
            encode_ref(p, record.index);
            break;
    }
    auto out = frame(kTocMagic, static_cast<std::uint16_t>(record.kind), p.bytes());
    if (out.size() > kAtomicAppendLimit)
        throw InvalidArgument("TOC record of " + std::to_string(out.size()) + " bytes exceeds the " +
                              std::to_string(kAtomicAppendLimit) + " byte atomic append limit");
    return out;
}

std::vector<std::byte> encode_subtoc_entry(const IndexRef& ref) {
    Encoder p;
    encode_ref(p, ref);
    return frame(kSubtocMagic, kSubtocEntry, p.bytes());
}

ParseResult<TocRecord> parse_toc(std::span<const std::byte> bytes) {
    ParseResult<TocRecord> out;
    out.incomplete_tail = for_each_frame(bytes, kTocMagic, [&](const Frame& f) {
        Decoder d(f.payload);
        TocRecord r;
        switch (static_cast<TocKind>(f.kind)) {
            case TocKind::kInit:
            case TocKind::kSubtocPtr:
            case TocKind::kMask:
                r.kind = static_cast<TocKind>(f.kind);
                r.name = d.str();
                break;
            case TocKind::kFullIndex:
                r.kind = TocKind::kFullIndex;
                r.name = d.str();
                r.index = decode_ref(d);
                break;
            default:
                throw CorruptCatalogue("unknown TOC record kind " + std::to_string(f.kind));
        }
        if (!d.done()) throw CorruptCatalogue("trailing bytes in TOC record");
        out.records.push_back(std::move(r));
    });
    return out;
}

ParseResult<IndexRef> parse_subtoc(std::span<const std::byte> bytes) {
    ParseResult<IndexRef> out;
    out.incomplete_tail = for_each_frame(bytes, kSubtocMagic, [&](const Frame& f) {
        if (f.kind != kSubtocEntry) throw CorruptCatalogue("unknown sub-TOC entry kind " + std::to_string(f.kind));
        Decoder d(f.payload);
        out.records.push_back(decode_ref(d));
        if (!d.done()) throw CorruptCatalogue("trailing bytes in sub-TOC entry");
    });
    return out;
}

}  // namespace fieldstore::fsb
