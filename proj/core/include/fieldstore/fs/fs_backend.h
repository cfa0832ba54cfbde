#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fieldstore/backend.h"
#include "fieldstore/fs/index_block.h"
#include "fieldstore/fs/toc.h"
#include "fieldstore/posix.h"

namespace fieldstore::fsb {

struct FsOptions {
    std::filesystem::path root;
    std::size_t buffer_size = 8u << 20;
    /// Wall-clock source for generated file names, in nanoseconds. Tests pin
    /// it to force timestamp collisions.
    std::function<std::uint64_t()> clock;
};

/// Per-session unique file name stem: collocation key, time, host, pid and a
/// process-wide counter.
std::string unique_stem(const std::string& collocation, const FsOptions& options);

/// Creates `dir/<stem><ext>` with O_EXCL, retrying with a new stem on collision.
/// Returns the open descriptor and the file name.
std::pair<UniqueFd, std::string> create_unique_file(const std::filesystem::path& dir, const std::string& collocation,
                                                    const std::string& ext, const FsOptions& options, int flags);

class FsSegmentReader final : public SegmentReader {
public:
    explicit FsSegmentReader(std::shared_ptr<IoCounters> counters) : counters_(std::move(counters)) {}
    void read(std::span<const LocationDescriptor> segments, std::span<std::byte> out) const override;

private:
    std::shared_ptr<IoCounters> counters_;
};

class FsStore final : public StoreBackend {
public:
    FsStore(std::shared_ptr<const FsOptions> options, SessionContext ctx);
    ~FsStore() override;

    LocationDescriptor archive(const SplitKey& key, std::span<const std::byte> data) override;
    void flush() override;
    DataHandle retrieve(const LocationDescriptor& location) const override;
    void close() override;

private:
    struct DataFile {
        UniqueFd fd;
        std::string path;
        std::uint64_t size = 0;
        std::vector<std::byte> buffer;
        bool dirty = false;
    };

    void drain(DataFile& f);

    std::shared_ptr<const FsOptions> options_;
    SessionContext ctx_;
    std::shared_ptr<const FsSegmentReader> reader_;
    std::map<std::string, DataFile> files_;  // keyed by dataset/collocation
};

class FsCatalogue final : public CatalogueBackend {
public:
    FsCatalogue(std::shared_ptr<const Schema> schema, std::shared_ptr<const FsOptions> options, SessionContext ctx);
    ~FsCatalogue() override;

    void archive(const SplitKey& key, const LocationDescriptor& location) override;
    void flush() override;
    void close() override;

    std::vector<std::string> axis(const Identifier& dataset, const Identifier& collocation,
                                  const std::string& dim) override;
    std::optional<LocationDescriptor> retrieve(const SplitKey& key) override;
    std::vector<ListEntry> list(const Identifier& dataset, const PartialIdentifier& partial) override;

private:
    struct CollocWriter {
        std::string collocation;
        UniqueFd index_fd;
        std::string index_file;
        std::uint64_t index_size = 0;
        UniqueFd full_fd;
        std::string full_file;
        IndexBlock partial;
        IndexBlock full;
        AxisSet partial_axes;
        AxisSet full_axes;
        UriStore uris;
    };

    struct DatasetWriter {
        std::filesystem::path dir;
        UniqueFd toc_fd;
        UniqueFd subtoc_fd;
        std::string subtoc_file;
        std::map<std::string, CollocWriter> collocs;
    };

    struct IndexEntry {
        IndexRef ref;
        Identifier collocation;
        std::shared_ptr<const IndexBlock> block;
        bool loaded = false;
    };

    struct DatasetView {
        std::filesystem::path dir;
        std::vector<IndexEntry> entries;  // newest first
    };

    DatasetWriter& writer_for(const Identifier& dataset, const std::string& canonical);
    void append_toc(DatasetWriter& w, const TocRecord& record);
    DatasetView& view_for(const Identifier& dataset);
    DatasetView preload(const std::filesystem::path& dir);
    const IndexBlock* load(const DatasetView& view, IndexEntry& entry);

    std::shared_ptr<const Schema> schema_;
    std::shared_ptr<const FsOptions> options_;
    SessionContext ctx_;
    std::map<std::string, DatasetWriter> writers_;
    std::map<std::string, DatasetView> views_;
};

class FsBackend final : public Backend {
public:
    FsBackend(std::shared_ptr<const Schema> schema, FsOptions options);

    std::string name() const override { return "fs"; }
    std::unique_ptr<StoreBackend> make_store(const SessionContext& ctx) override;
    std::unique_ptr<CatalogueBackend> make_catalogue(const SessionContext& ctx) override;

    const FsOptions& options() const noexcept { return *options_; }

private:
    std::shared_ptr<const Schema> schema_;
    std::shared_ptr<const FsOptions> options_;
};

/// Creates the dataset directory, its schema copy and its TOC if absent.
/// Racing initialisers all succeed; a schema copy that differs from `schema`
/// raises SchemaError.
void init_dataset_dir(const std::filesystem::path& dir, const Schema& schema, const std::string& dataset);

}  // namespace fieldstore::fsb
