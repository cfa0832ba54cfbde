#include "fieldstore/data_handle.h"

#include <numeric>

#include "fieldstore/error.h"

namespace fieldstore {

DataHandle::DataHandle(std::string backend, std::shared_ptr<const SegmentReader> reader,
                       std::vector<LocationDescriptor> segments)
    : backend_(std::move(backend)), reader_(std::move(reader)), segments_(std::move(segments)) {
    if (!segments_.empty() && !reader_) throw InvalidArgument("data handle with segments needs a reader");
}

std::uint64_t DataHandle::size() const noexcept {
    return std::accumulate(segments_.begin(), segments_.end(), std::uint64_t{0},
                           [](std::uint64_t acc, const LocationDescriptor& s) { return acc + s.length; });
}

std::vector<std::byte> DataHandle::read() const {
    std::vector<std::byte> out(size());
    read_into(out);
    return out;
}

void DataHandle::read_into(std::span<std::byte> out) const {
    if (out.size() != size()) throw InvalidArgument("output buffer size does not match handle size");
    if (segments_.empty()) return;
    reader_->read(segments_, out);
}

DataHandle DataHandle::join(std::span<const DataHandle> handles, bool coalesce) {
    DataHandle merged;
    for (const auto& h : handles) {
        if (h.empty()) continue;
        if (merged.reader_ == nullptr) {
            merged.backend_ = h.backend_;
            merged.reader_ = h.reader_;
        } else if (merged.backend_ != h.backend_) {
            throw InvalidArgument("cannot merge handles from backends '" + merged.backend_ + "' and '" +
                                  h.backend_ + "'");
        }
        for (const auto& seg : h.segments_) {
            if (coalesce && !merged.segments_.empty()) {
                auto& last = merged.segments_.back();
                if (last.uri == seg.uri && last.offset + last.length == seg.offset) {
                    last.length += seg.length;
                    continue;
                }
            }
            merged.segments_.push_back(seg);
        }
    }
    return merged;
}

DataHandle merge_handles(std::span<const DataHandle> handles) { return DataHandle::join(handles, true); }

DataHandle concat_handles(std::span<const DataHandle> handles) { return DataHandle::join(handles, false); }

}  // namespace fieldstore
