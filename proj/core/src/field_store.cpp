#include "fieldstore/field_store.h"

#include <unistd.h>

#include <algorithm>
#include <atomic>

#include "fieldstore/engine/local_engine.h"
#include "fieldstore/engine/socket.h"
#include "fieldstore/error.h"
#include "fieldstore/fs/fs_backend.h"
#include "fieldstore/obj/obj_backend.h"

namespace fieldstore {

IoCounters::Snapshot IoCounters::snapshot() const noexcept {
    return {file_opens.load(),   file_reads.load(),  bytes_read.load(), toc_reads.load(),
            subtoc_reads.load(), index_loads.load(), syncs.load(),      toc_appends.load()};
}

void IoCounters::reset() noexcept {
    for (auto* c : {&file_opens, &file_reads, &bytes_read, &toc_reads, &subtoc_reads, &index_loads, &syncs,
                    &toc_appends})
        c->store(0);
}

FieldStore::FieldStore(Schema schema, std::shared_ptr<Backend> backend, BackendKind kind,
                       std::shared_ptr<Engine> engine)
    : schema_(std::make_shared<const Schema>(std::move(schema))),
      backend_(std::move(backend)),
      kind_(kind),
      engine_(std::move(engine)) {
    if (!backend_) throw InvalidArgument("field store needs a backend");
}

FieldStore FieldStore::open(const StoreConfig& config) {
    auto schema = std::make_shared<const Schema>(Schema::load(config.schema));
    std::shared_ptr<Backend> backend;
    std::shared_ptr<Engine> engine;
    switch (config.backend) {
        case BackendKind::kFs:
            backend = std::make_shared<fsb::FsBackend>(schema, fsb::FsOptions{config.root, config.fs_buffer_size, {}});
            break;
        case BackendKind::kObj:
            if (config.engine_socket)
                engine = std::make_shared<RemoteEngine>(*config.engine_socket);
            else
                engine = LocalEngine::open_shared(config.root, config.engine_mode);
            backend = std::make_shared<objb::ObjBackend>(schema, engine);
            break;
    }
    return FieldStore(*schema, std::move(backend), config.backend, std::move(engine));
}

Session FieldStore::session() const { return Session(schema_, *backend_); }

namespace {

std::uint64_t next_session_id() {
    static std::atomic<std::uint32_t> counter{0};
    return (static_cast<std::uint64_t>(::getpid()) << 32) | ++counter;
}

}  // namespace

Session::Session(std::shared_ptr<const Schema> schema, Backend& backend)
    : schema_(std::move(schema)), ctx_{next_session_id(), std::make_shared<IoCounters>()} {
    store_ = backend.make_store(ctx_);
    catalogue_ = backend.make_catalogue(ctx_);
}

Session::~Session() = default;

void Session::archive(const Identifier& id, std::span<const std::byte> data) {
    if (data.empty()) throw InvalidArgument("cannot archive an empty field");
    const auto key = schema_->split(id);
    const auto location = store_->archive(key, data);
    catalogue_->archive(key, location);
    pending_ = true;
}

void Session::flush() {
    if (!pending_) return;
    store_->flush();
    catalogue_->flush();
    pending_ = false;
}

DataHandle Session::retrieve(std::span<const Identifier> query, Merge merge) {
    std::vector<DataHandle> handles;
    handles.reserve(query.size());
    for (const auto& id : query) {
        if (auto location = catalogue_->retrieve(schema_->split(id))) handles.push_back(store_->retrieve(*location));
    }
    return merge == Merge::kYes ? merge_handles(handles) : concat_handles(handles);
}

DataHandle Session::retrieve(const PartialIdentifier& request) {
    const auto ids = expand_request(*schema_, request,
                                    [this](const Identifier& dataset, const Identifier& collocation,
                                           const std::string& dim) { return axis(dataset, collocation, dim); });
    return retrieve(ids);
}

std::vector<ListEntry> Session::list(const PartialIdentifier& partial) {
    Identifier dataset;
    for (const auto& dim : schema_->dataset_dims()) {
        const auto* values = partial.find(dim);
        if (!values || !values->is_single())
            throw InvalidArgument("list must fix a single value for dataset dimension '" + dim + "'");
        dataset.set(dim, values->values().front());
    }
    auto entries = catalogue_->list(dataset, partial);
    std::vector<std::pair<std::string, ListEntry>> keyed;
    keyed.reserve(entries.size());
    for (auto& e : entries) keyed.emplace_back(schema_->canonical(e.identifier), std::move(e));
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    entries.clear();
    for (auto& [_, e] : keyed) entries.push_back(std::move(e));
    return entries;
}

std::vector<std::string> Session::axis(const Identifier& dataset, const Identifier& collocation,
                                       const std::string& dim) {
    return catalogue_->axis(dataset, collocation, dim);
}

void Session::close() {
    flush();
    store_->close();
    catalogue_->close();
}

}  // namespace fieldstore
