#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fieldstore {

/// Where a field's bytes live. `uri` is only meaningful to the backend that produced it.
struct LocationDescriptor {
    std::string uri;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;

    friend bool operator==(const LocationDescriptor&, const LocationDescriptor&) = default;
};

/// Backend-specific bulk reader. Segments passed in are already coalesced.
class SegmentReader {
public:
    virtual ~SegmentReader() = default;
    virtual void read(std::span<const LocationDescriptor> segments, std::span<std::byte> out) const = 0;
};

/// Lazy reader over an ordered list of locations. Nothing is read until `read`.
class DataHandle {
public:
    DataHandle() = default;
    DataHandle(std::string backend, std::shared_ptr<const SegmentReader> reader,
               std::vector<LocationDescriptor> segments);

    const std::string& backend() const noexcept { return backend_; }
    const std::vector<LocationDescriptor>& segments() const noexcept { return segments_; }
    bool empty() const noexcept { return segments_.empty(); }
    std::uint64_t size() const noexcept;

    std::vector<std::byte> read() const;
    /// `out.size()` must equal `size()`.
    void read_into(std::span<std::byte> out) const;

private:
    friend DataHandle merge_handles(std::span<const DataHandle> handles);
    friend DataHandle concat_handles(std::span<const DataHandle> handles);
    static DataHandle join(std::span<const DataHandle> handles, bool coalesce);

    std::string backend_;
    std::shared_ptr<const SegmentReader> reader_;
    std::vector<LocationDescriptor> segments_;
};

/// Concatenates handles in order, coalescing neighbouring segments that are
/// contiguous ranges of the same uri. Empty handles are ignored. Throws
/// InvalidArgument when handles come from different backends.
DataHandle merge_handles(std::span<const DataHandle> handles);
/// Like `merge_handles` but keeps every segment separate.
DataHandle concat_handles(std::span<const DataHandle> handles);

}  // namespace fieldstore
