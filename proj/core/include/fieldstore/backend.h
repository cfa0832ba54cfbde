#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fieldstore/data_handle.h"
#include "fieldstore/schema.h"

namespace fieldstore {

struct ListEntry {
    Identifier identifier;
    LocationDescriptor location;
};

/// Filesystem-level operation counts for one session. Handles created by the
/// session keep counting into the same instance.
struct IoCounters {
    struct Snapshot {
        std::uint64_t file_opens = 0;
        std::uint64_t file_reads = 0;
        std::uint64_t bytes_read = 0;
        std::uint64_t toc_reads = 0;
        std::uint64_t subtoc_reads = 0;
        std::uint64_t index_loads = 0;
        std::uint64_t syncs = 0;
        std::uint64_t toc_appends = 0;

        friend bool operator==(const Snapshot&, const Snapshot&) = default;
    };

    std::atomic<std::uint64_t> file_opens{0};
    std::atomic<std::uint64_t> file_reads{0};
    std::atomic<std::uint64_t> bytes_read{0};
    std::atomic<std::uint64_t> toc_reads{0};
    std::atomic<std::uint64_t> subtoc_reads{0};
    std::atomic<std::uint64_t> index_loads{0};
    std::atomic<std::uint64_t> syncs{0};
    std::atomic<std::uint64_t> toc_appends{0};

    Snapshot snapshot() const noexcept;
    void reset() noexcept;
};

/// Everything a backend instance knows about the session that owns it.
struct SessionContext {
    std::uint64_t session_id = 0;
    std::shared_ptr<IoCounters> counters;
};

/// Bulk field bytes.
class StoreBackend {
public:
    virtual ~StoreBackend() = default;

    /// Takes a copy of `data`; returns where it will live.
    virtual LocationDescriptor archive(const SplitKey& key, std::span<const std::byte> data) = 0;
    /// Blocks until all archived bytes are durable and readable by others.
    virtual void flush() = 0;
    /// Builds a lazy handle. Performs no I/O.
    virtual DataHandle retrieve(const LocationDescriptor& location) const = 0;
    /// Releases per-session write resources. Later archives start fresh.
    virtual void close() = 0;
};

/// Index of archived fields.
class CatalogueBackend {
public:
    virtual ~CatalogueBackend() = default;

    virtual void archive(const SplitKey& key, const LocationDescriptor& location) = 0;
    virtual void flush() = 0;
    virtual void close() = 0;

    virtual std::vector<std::string> axis(const Identifier& dataset, const Identifier& collocation,
                                          const std::string& dim) = 0;
    /// Not finding the field is not an error.
    virtual std::optional<LocationDescriptor> retrieve(const SplitKey& key) = 0;
    /// Entries of `dataset` matching `partial`, each identifier once, newest location.
    virtual std::vector<ListEntry> list(const Identifier& dataset, const PartialIdentifier& partial) = 0;
};

/// Creates the per-session Store/Catalogue pair of one deployment.
class Backend {
public:
    virtual ~Backend() = default;

    virtual std::string name() const = 0;
    virtual std::unique_ptr<StoreBackend> make_store(const SessionContext& ctx) = 0;
    virtual std::unique_ptr<CatalogueBackend> make_catalogue(const SessionContext& ctx) = 0;
};

}  // namespace fieldstore
