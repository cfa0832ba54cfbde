#include "fieldstore/fs/fs_backend.h"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <set>

#include "fieldstore/error.h"

namespace fieldstore::fsb {

namespace fs = std::filesystem;

namespace {

std::atomic<std::uint64_t> g_name_counter{0};

void warn(const std::string& msg) { std::fprintf(stderr, "fieldstore: warning: %s\n", msg.c_str()); }

std::vector<std::byte> read_whole(int fd) {
    std::vector<std::byte> buf(posix::file_size(fd));
    buf.resize(posix::pread_full(fd, buf, 0));
    return buf;
}

std::string basename_of(const std::string& path) { return fs::path(path).filename().string(); }

}  // namespace

std::string unique_stem(const std::string& collocation, const FsOptions& options) {
    const std::uint64_t now =
        options.clock ? options.clock()
                      : static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                                       std::chrono::system_clock::now().time_since_epoch())
                                                       .count());
    static const std::string host = posix::hostname();
    return collocation + "." + std::to_string(now) + "." + host + "." + std::to_string(::getpid()) + "." +
           std::to_string(g_name_counter++);
}

std::pair<UniqueFd, std::string> create_unique_file(const fs::path& dir, const std::string& collocation,
                                                    const std::string& ext, const FsOptions& options, int flags) {
    for (;;) {
        auto name = unique_stem(collocation, options) + ext;
        try {
            auto fd = posix::open(dir / name, flags | O_CREAT | O_EXCL);
            return {std::move(fd), std::move(name)};
        } catch (const IoError& e) {
            if (e.code() != EEXIST) throw;
        }
    }
}

void init_dataset_dir(const fs::path& dir, const Schema& schema, const std::string& dataset) {
    fs::create_directories(dir.parent_path());
    posix::mkdir_if_absent(dir);

    const auto text = schema.to_text();
    if (!posix::create_file_atomic(dir / "schema", as_bytes(text))) {
        auto fd = posix::open(dir / "schema", O_RDONLY);
        const auto existing = to_string(read_whole(fd.get()));
        if (Schema::parse(existing) != schema)
            throw SchemaError("dataset " + dataset + " was created with a different schema");
    }
    posix::create_file_atomic(dir / "toc", encode_toc_record(TocRecord::init(dataset)));
}

// ---------------------------------------------------------------- reader

void FsSegmentReader::read(std::span<const LocationDescriptor> segments, std::span<std::byte> out) const {
    std::map<std::string, UniqueFd> open_files;
    std::size_t pos = 0;
    for (const auto& seg : segments) {
        auto it = open_files.find(seg.uri);
        if (it == open_files.end()) {
            it = open_files.emplace(seg.uri, posix::open(seg.uri, O_RDONLY)).first;
            if (counters_) ++counters_->file_opens;
        }
        std::uint64_t calls = 0;
        const auto n = posix::pread_full(it->second.get(), out.subspan(pos, seg.length), seg.offset, &calls);
        if (counters_) {
            counters_->file_reads += calls;
            counters_->bytes_read += n;
        }
        if (n != seg.length)
            throw IoError("short read of " + seg.uri + " at offset " + std::to_string(seg.offset), EIO);
        pos += seg.length;
    }
}

// ---------------------------------------------------------------- store

FsStore::FsStore(std::shared_ptr<const FsOptions> options, SessionContext ctx)
    : options_(std::move(options)),
      ctx_(std::move(ctx)),
      reader_(std::make_shared<FsSegmentReader>(ctx_.counters)) {}

FsStore::~FsStore() = default;

LocationDescriptor FsStore::archive(const SplitKey& key, std::span<const std::byte> data) {
    const auto dataset = key.dataset.str();
    const auto collocation = key.collocation.str();
    auto it = files_.find(dataset + "/" + collocation);
    if (it == files_.end()) {
        const auto dir = options_->root / dataset;
        fs::create_directories(options_->root);
        posix::mkdir_if_absent(dir);
        auto [fd, name] = create_unique_file(dir, collocation, ".data", *options_, O_WRONLY | O_APPEND);
        DataFile f;
        f.fd = std::move(fd);
        f.path = (dir / name).string();
        f.buffer.reserve(options_->buffer_size);
        it = files_.emplace(dataset + "/" + collocation, std::move(f)).first;
    }
    auto& f = it->second;
    const LocationDescriptor loc{f.path, f.size, data.size()};
    if (f.buffer.size() + data.size() > options_->buffer_size) drain(f);
    if (data.size() >= options_->buffer_size) {
        posix::write_all(f.fd.get(), data);
    } else {
        f.buffer.insert(f.buffer.end(), data.begin(), data.end());
    }
    f.size += data.size();
    f.dirty = true;
    return loc;
}

void FsStore::drain(DataFile& f) {
    if (f.buffer.empty()) return;
    posix::write_all(f.fd.get(), f.buffer);
    f.buffer.clear();
}

void FsStore::flush() {
    for (auto& [_, f] : files_) {
        if (!f.dirty) continue;
        drain(f);
        posix::datasync(f.fd.get());
        ++ctx_.counters->syncs;
        f.dirty = false;
    }
}

DataHandle FsStore::retrieve(const LocationDescriptor& location) const {
    return DataHandle("fs", reader_, {location});
}

void FsStore::close() {
    flush();
    files_.clear();
}

// ---------------------------------------------------------------- catalogue

FsCatalogue::FsCatalogue(std::shared_ptr<const Schema> schema, std::shared_ptr<const FsOptions> options,
                         SessionContext ctx)
    : schema_(std::move(schema)), options_(std::move(options)), ctx_(std::move(ctx)) {}

FsCatalogue::~FsCatalogue() = default;

FsCatalogue::DatasetWriter& FsCatalogue::writer_for(const Identifier& dataset, const std::string& canonical) {
    auto it = writers_.find(canonical);
    if (it != writers_.end()) return it->second;
    DatasetWriter w;
    w.dir = options_->root / canonical;
    init_dataset_dir(w.dir, *schema_, dataset.str());
    w.toc_fd = posix::open(w.dir / "toc", O_WRONLY | O_APPEND);
    return writers_.emplace(canonical, std::move(w)).first->second;
}

void FsCatalogue::append_toc(DatasetWriter& w, const TocRecord& record) {
    posix::write_once(w.toc_fd.get(), encode_toc_record(record));
    posix::datasync(w.toc_fd.get());
    ++ctx_.counters->toc_appends;
    ++ctx_.counters->syncs;
}

void FsCatalogue::archive(const SplitKey& key, const LocationDescriptor& location) {
    auto& w = writer_for(key.dataset, key.dataset.str());
    const auto collocation = key.collocation.str();
    auto it = w.collocs.find(collocation);
    if (it == w.collocs.end()) {
        CollocWriter c;
        c.collocation = collocation;
        std::tie(c.index_fd, c.index_file) =
            create_unique_file(w.dir, collocation, ".index", *options_, O_WRONLY | O_APPEND);
        std::tie(c.full_fd, c.full_file) = create_unique_file(w.dir, collocation, ".full", *options_, O_WRONLY);
        it = w.collocs.emplace(collocation, std::move(c)).first;
    }
    auto& c = it->second;
    const IndexValue value{c.uris.insert(basename_of(location.uri)), location.offset, location.length};
    auto element = key.element.str();
    c.partial.put(element, value);
    c.full.put(std::move(element), value);
    c.partial_axes.insert(key.element);
    c.full_axes.insert(key.element);
}

void FsCatalogue::flush() {
    for (auto& [_, w] : writers_) {
        std::vector<std::byte> entries;
        for (auto& [colloc, c] : w.collocs) {
            if (c.partial.empty()) continue;
            const auto block = c.partial.serialize();
            posix::write_all(c.index_fd.get(), block);
            posix::datasync(c.index_fd.get());
            ++ctx_.counters->syncs;
            const auto entry = encode_subtoc_entry(
                IndexRef{colloc, c.index_file, c.index_size, block.size(), c.partial_axes, c.uris});
            entries.insert(entries.end(), entry.begin(), entry.end());
            c.index_size += block.size();
            c.partial.clear();
            c.partial_axes = {};
        }
        if (entries.empty()) continue;

        const bool first = !w.subtoc_fd;
        if (first) {
            std::tie(w.subtoc_fd, w.subtoc_file) =
                create_unique_file(w.dir, "subtoc", ".subtoc", *options_, O_WRONLY | O_APPEND);
        }
        posix::write_all(w.subtoc_fd.get(), entries);
        posix::datasync(w.subtoc_fd.get());
        ++ctx_.counters->syncs;
        if (first) append_toc(w, TocRecord::subtoc(w.subtoc_file));
    }
}

void FsCatalogue::close() {
    flush();
    for (auto& [_, w] : writers_) {
        for (auto& [colloc, c] : w.collocs) {
            const auto block = c.full.serialize();
            posix::pwrite_all(c.full_fd.get(), block, 0);
            posix::datasync(c.full_fd.get());
            ++ctx_.counters->syncs;
            append_toc(w, TocRecord::full_index(IndexRef{colloc, c.full_file, 0, block.size(), c.full_axes, c.uris},
                                                  w.subtoc_file));
        }
        if (w.subtoc_fd) append_toc(w, TocRecord::mask(w.subtoc_file));
    }
    writers_.clear();
}

FsCatalogue::DatasetView FsCatalogue::preload(const fs::path& dir) {
    DatasetView view;
    view.dir = dir;
    auto toc = posix::open_if_exists(dir / "toc", O_RDONLY);
    if (!toc) return view;
    const auto bytes = read_whole(toc.get());
    ++ctx_.counters->toc_reads;
    const auto parsed = parse_toc(bytes);

    auto add_full = [&](const IndexRef& ref) {
        view.entries.push_back({ref, Identifier::parse(ref.collocation), nullptr, false});
    };
    std::set<std::string> masked;
    // Full indexes waiting for the pointer of the sub-TOC they supersede.
    std::map<std::string, std::vector<const IndexRef*>> deferred;
    for (auto r = parsed.records.rbegin(); r != parsed.records.rend(); ++r) {
        switch (r->kind) {
            case TocKind::kInit:
                break;
            case TocKind::kMask:
                masked.insert(r->name);
                break;
            case TocKind::kFullIndex:
                if (r->name.empty())
                    add_full(r->index);
                else
                    deferred[r->name].push_back(&r->index);
                break;
            case TocKind::kSubtocPtr: {
                if (auto d = deferred.find(r->name); d != deferred.end()) {
                    for (const auto* ref : d->second) add_full(*ref);
                    deferred.erase(d);
                }
                if (masked.contains(r->name)) break;
                auto fd = posix::open_if_exists(dir / r->name, O_RDONLY);
                if (!fd) {
                    warn("sub-TOC " + (dir / r->name).string() + " is missing; skipped");
                    break;
                }
                const auto sub = read_whole(fd.get());
                ++ctx_.counters->subtoc_reads;
                auto refs = parse_subtoc(sub).records;
                for (auto e = refs.rbegin(); e != refs.rend(); ++e) {
                    auto colloc = Identifier::parse(e->collocation);
                    view.entries.push_back({std::move(*e), std::move(colloc), nullptr, false});
                }
                break;
            }
        }
    }
    for (const auto& [_, refs] : deferred)
        for (const auto* ref : refs) add_full(*ref);
    return view;
}

FsCatalogue::DatasetView& FsCatalogue::view_for(const Identifier& dataset) {
    const auto canonical = dataset.str();
    auto it = views_.find(canonical);
    if (it == views_.end()) it = views_.emplace(canonical, preload(options_->root / canonical)).first;
    return it->second;
}

const IndexBlock* FsCatalogue::load(const DatasetView& view, IndexEntry& entry) {
    if (entry.loaded) return entry.block.get();
    entry.loaded = true;
    const auto path = view.dir / entry.ref.file;
    auto fd = posix::open_if_exists(path, O_RDONLY);
    if (!fd) {
        warn("index " + path.string() + " is missing; skipped");
        return nullptr;
    }
    std::vector<std::byte> buf(entry.ref.length);
    const auto n = posix::pread_full(fd.get(), buf, entry.ref.offset);
    ++ctx_.counters->index_loads;
    if (n < buf.size()) {
        warn("index " + path.string() + " is shorter than its sub-TOC entry; skipped");
        return nullptr;
    }
    entry.block = std::make_shared<const IndexBlock>(IndexBlock::deserialize(buf));
    return entry.block.get();
}

std::vector<std::string> FsCatalogue::axis(const Identifier& dataset, const Identifier& collocation,
                                           const std::string& dim) {
    auto& view = view_for(dataset);
    const auto colloc = collocation.str();
    std::set<std::string> values;
    for (const auto& e : view.entries) {
        if (e.ref.collocation != colloc) continue;
        if (auto it = e.ref.axes.dims().find(dim); it != e.ref.axes.dims().end())
            values.insert(it->second.begin(), it->second.end());
    }
    return {values.begin(), values.end()};
}

std::optional<LocationDescriptor> FsCatalogue::retrieve(const SplitKey& key) {
    auto& view = view_for(key.dataset);
    const auto colloc = key.collocation.str();
    const auto element = key.element.str();
    for (auto& e : view.entries) {
        if (e.ref.collocation != colloc || !e.ref.axes.may_contain(key.element)) continue;
        const auto* block = load(view, e);
        if (!block) continue;
        if (auto v = block->find(element))
            return LocationDescriptor{(view.dir / e.ref.uris.at(v->uri_id)).string(), v->offset, v->length};
    }
    return std::nullopt;
}

std::vector<ListEntry> FsCatalogue::list(const Identifier& dataset, const PartialIdentifier& partial) {
    auto& view = view_for(dataset);
    std::set<std::string> seen;
    std::vector<ListEntry> out;
    for (auto& e : view.entries) {
        if (!partial.matches_part(e.collocation)) continue;
        bool plausible = true;
        for (const auto& [kw, values] : partial.entries()) {
            if (values.is_wildcard() || schema_->level_of(kw) != KeyLevel::kElement) continue;
            const auto axis = e.ref.axes.dims().find(kw);
            if (axis == e.ref.axes.dims().end()) {
                plausible = false;
                break;
            }
            bool any = false;
            for (const auto& v : values.values()) any = any || axis->second.contains(v);
            if (!any) {
                plausible = false;
                break;
            }
        }
        if (!plausible) continue;
        const auto* block = load(view, e);
        if (!block) continue;
        for (const auto& [element, v] : block->entries()) {
            if (!seen.insert(e.ref.collocation + "|" + element).second) continue;
            auto id = schema_->join({dataset, e.collocation, Identifier::parse(element)});
            if (!partial.matches(id)) continue;
            out.push_back({std::move(id),
                           LocationDescriptor{(view.dir / e.ref.uris.at(v.uri_id)).string(), v.offset, v.length}});
        }
    }
    return out;
}

// ---------------------------------------------------------------- backend

FsBackend::FsBackend(std::shared_ptr<const Schema> schema, FsOptions options)
    : schema_(std::move(schema)), options_(std::make_shared<const FsOptions>(std::move(options))) {}

std::unique_ptr<StoreBackend> FsBackend::make_store(const SessionContext& ctx) {
    return std::make_unique<FsStore>(options_, ctx);
}

std::unique_ptr<CatalogueBackend> FsBackend::make_catalogue(const SessionContext& ctx) {
    return std::make_unique<FsCatalogue>(schema_, options_, ctx);
}

}  // namespace fieldstore::fsb
