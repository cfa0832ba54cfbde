#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fieldstore/axis_set.h"
#include "fieldstore/backend.h"
#include "fieldstore/engine/engine.h"

namespace fieldstore::objb {

/// Blob ids are taken from engine allocations of this many ids.
inline constexpr std::uint64_t kIdBatch = 1024;
inline constexpr const char* kRootNamespace = "root";

/// `obj://<ns>/<hex>`
std::string blob_uri(const std::string& ns, const ObjectId& id);
std::pair<std::string, ObjectId> parse_blob_uri(std::string_view uri);

/// `uri\noffset\nlength`
std::string encode_descriptor(const LocationDescriptor& loc);
LocationDescriptor decode_descriptor(std::string_view text);

/// Key-value objects of one dataset.
KvRef dataset_kv(const std::string& dataset);
KvRef index_kv(const std::string& dataset, const std::string& collocation);
KvRef axis_kv(const std::string& dataset, const std::string& collocation, const std::string& dim);

class ObjSegmentReader final : public SegmentReader {
public:
    explicit ObjSegmentReader(std::shared_ptr<Engine> engine) : engine_(std::move(engine)) {}
    void read(std::span<const LocationDescriptor> segments, std::span<std::byte> out) const override;

private:
    std::shared_ptr<Engine> engine_;
};

class ObjStore final : public StoreBackend {
public:
    ObjStore(std::shared_ptr<Engine> engine, SessionContext ctx);

    LocationDescriptor archive(const SplitKey& key, std::span<const std::byte> data) override;
    void flush() override {}
    DataHandle retrieve(const LocationDescriptor& location) const override;
    void close() override {}

private:
    std::shared_ptr<Engine> engine_;
    SessionContext ctx_;
    std::shared_ptr<const ObjSegmentReader> reader_;
    std::set<std::string> namespaces_;
    std::map<std::string, IdRange> ids_;
};

class ObjCatalogue final : public CatalogueBackend {
public:
    ObjCatalogue(std::shared_ptr<const Schema> schema, std::shared_ptr<Engine> engine, SessionContext ctx);

    void archive(const SplitKey& key, const LocationDescriptor& location) override;
    void flush() override {}
    void close() override {}

    std::vector<std::string> axis(const Identifier& dataset, const Identifier& collocation,
                                  const std::string& dim) override;
    std::optional<LocationDescriptor> retrieve(const SplitKey& key) override;
    std::vector<ListEntry> list(const Identifier& dataset, const PartialIdentifier& partial) override;

private:
    struct View {
        std::optional<KvRef> index;
        AxisSet axes;
    };

    /// Dataset KV if the dataset is registered in the root KV. Positive answers are cached.
    std::optional<KvRef> find_dataset(const std::string& dataset);
    const View& view_for(const std::string& dataset, const std::string& collocation);

    std::shared_ptr<const Schema> schema_;
    std::shared_ptr<Engine> engine_;
    SessionContext ctx_;

    bool root_ready_ = false;
    std::set<std::string> datasets_ready_;
    std::map<std::string, KvRef> indexes_ready_;
    std::set<std::string> axes_written_;

    std::map<std::string, KvRef> datasets_;
    std::map<std::string, View> views_;
};

class ObjBackend final : public Backend {
public:
    ObjBackend(std::shared_ptr<const Schema> schema, std::shared_ptr<Engine> engine);

    std::string name() const override { return "obj"; }
    std::unique_ptr<StoreBackend> make_store(const SessionContext& ctx) override;
    std::unique_ptr<CatalogueBackend> make_catalogue(const SessionContext& ctx) override;

    const std::shared_ptr<Engine>& engine() const noexcept { return engine_; }

private:
    std::shared_ptr<const Schema> schema_;
    std::shared_ptr<Engine> engine_;
};

}  // namespace fieldstore::objb
