#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "fieldstore/backend.h"
#include "fieldstore/config.h"
#include "fieldstore/data_handle.h"
#include "fieldstore/schema.h"

namespace fieldstore {

class Engine;
class Session;

/// One deployment: a schema plus a configured backend. Cheap to copy; all
/// copies share the backend. Work happens through sessions.
class FieldStore {
public:
    FieldStore(Schema schema, std::shared_ptr<Backend> backend, BackendKind kind,
               std::shared_ptr<Engine> engine = nullptr);

    /// Opens the backend named by `config`, loading its schema.
    static FieldStore open(const StoreConfig& config);

    /// A fresh session. A session corresponds to one reading and/or writing
    /// process: it is single-threaded, and sessions run concurrently.
    Session session() const;

    const Schema& schema() const noexcept { return *schema_; }
    BackendKind kind() const noexcept { return kind_; }
    /// The KV/blob engine behind the obj backend, null for fs.
    const std::shared_ptr<Engine>& engine() const noexcept { return engine_; }

private:
    std::shared_ptr<const Schema> schema_;
    std::shared_ptr<Backend> backend_;
    BackendKind kind_;
    std::shared_ptr<Engine> engine_;
};

enum class Merge { kYes, kNo };

/// Archive/flush/retrieve/list/close over one Store+Catalogue pair.
///
/// Visibility: data archived here is visible to other sessions after
/// `flush()` returns. The obj backend makes it visible earlier, when
/// `archive()` returns. Readers see a snapshot of each dataset taken on their
/// first retrieve or list of it.
class Session {
public:
    Session(Session&&) noexcept = default;
    Session& operator=(Session&&) noexcept = default;
    ~Session();

    /// Throws InvalidArgument for empty data or identifiers not matching the schema.
    void archive(const Identifier& id, std::span<const std::byte> data);
    void flush();

    /// Handle over every found field, in query order. Missing fields are skipped.
    DataHandle retrieve(std::span<const Identifier> query, Merge merge = Merge::kYes);
    DataHandle retrieve(const Identifier& id) { return retrieve(std::span(&id, 1)); }
    /// Expands value lists and wildcards through the catalogue axes, then retrieves.
    DataHandle retrieve(const PartialIdentifier& request);

    std::vector<ListEntry> list(const PartialIdentifier& partial);
    std::vector<std::string> axis(const Identifier& dataset, const Identifier& collocation, const std::string& dim);

    /// Flushes any pending archives, then persists final catalogue state.
    /// The session may archive again afterwards; that starts a new generation
    /// of per-session structures.
    void close();

    std::uint64_t id() const noexcept { return ctx_.session_id; }
    const IoCounters& io_counters() const noexcept { return *ctx_.counters; }
    IoCounters& io_counters() noexcept { return *ctx_.counters; }

private:
    friend class FieldStore;
    Session(std::shared_ptr<const Schema> schema, Backend& backend);

    std::shared_ptr<const Schema> schema_;
    SessionContext ctx_;
    std::unique_ptr<StoreBackend> store_;
    std::unique_ptr<CatalogueBackend> catalogue_;
    bool pending_ = false;
};

}  // namespace fieldstore
