#include "fieldstore/obj/obj_backend.h"

#include <charconv>

#include "fieldstore/error.h"

namespace fieldstore::objb {

namespace {

constexpr std::string_view kBlobScheme = "obj://";
const KvRef kRootKv{kRootNamespace, ObjectId{}};

// Reserved keys of the dataset and index key-values. Real keys are canonical
// `k=v` strings and never collide with these.
constexpr std::string_view kKeyEntry = "key";
constexpr std::string_view kSchemaEntry = "schema";
constexpr std::string_view kAxesEntry = "axes";

std::uint64_t parse_u64(std::string_view s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw CorruptCatalogue("bad number '" + std::string(s) + "' in descriptor");
    return v;
}

std::vector<std::string> split_commas(std::string_view s) {
    std::vector<std::string> out;
    while (!s.empty()) {
        const auto comma = s.find(',');
        out.emplace_back(s.substr(0, comma));
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    return out;
}

}  // namespace

std::string blob_uri(const std::string& ns, const ObjectId& id) {
    return std::string(kBlobScheme) + ns + "/" + id.hex();
}

std::pair<std::string, ObjectId> parse_blob_uri(std::string_view uri) {
    const auto slash = uri.rfind('/');
    if (!uri.starts_with(kBlobScheme) || slash == std::string_view::npos || slash < kBlobScheme.size())
        throw InvalidArgument("not a blob uri: " + std::string(uri));
    return {std::string(uri.substr(kBlobScheme.size(), slash - kBlobScheme.size())),
            ObjectId::from_hex(uri.substr(slash + 1))};
}

std::string encode_descriptor(const LocationDescriptor& loc) {
    return loc.uri + "\n" + std::to_string(loc.offset) + "\n" + std::to_string(loc.length);
}

LocationDescriptor decode_descriptor(std::string_view text) {
    const auto a = text.find('\n');
    const auto b = a == std::string_view::npos ? a : text.find('\n', a + 1);
    if (b == std::string_view::npos) throw CorruptCatalogue("malformed descriptor");
    return {std::string(text.substr(0, a)), parse_u64(text.substr(a + 1, b - a - 1)), parse_u64(text.substr(b + 1))};
}

KvRef dataset_kv(const std::string& dataset) { return {dataset, ObjectId{}}; }

KvRef index_kv(const std::string& dataset, const std::string& collocation) {
    return {dataset, ObjectId::digest(collocation)};
}

KvRef axis_kv(const std::string& dataset, const std::string& collocation, const std::string& dim) {
    return {dataset, ObjectId::digest(collocation + "/" + dim)};
}

// ---------------------------------------------------------------- store

void ObjSegmentReader::read(std::span<const LocationDescriptor> segments, std::span<std::byte> out) const {
    std::size_t pos = 0;
    for (const auto& seg : segments) {
        const auto [ns, id] = parse_blob_uri(seg.uri);
        engine_->blob_read(ns, id, seg.offset, out.subspan(pos, seg.length));
        pos += seg.length;
    }
}

ObjStore::ObjStore(std::shared_ptr<Engine> engine, SessionContext ctx)
    : engine_(std::move(engine)), ctx_(std::move(ctx)), reader_(std::make_shared<ObjSegmentReader>(engine_)) {}

LocationDescriptor ObjStore::archive(const SplitKey& key, std::span<const std::byte> data) {
    const auto ns = key.dataset.str();
    if (!namespaces_.contains(ns)) {
        engine_->ns_create_if_absent(ns);
        namespaces_.insert(ns);
    }
    auto& range = ids_[ns];
    if (range.count == 0) range = engine_->allocate_ids(ns, kIdBatch);
    const ObjectId id{0, range.first};
    ++range.first;
    --range.count;
    engine_->blob_write(ns, id, data);
    return {blob_uri(ns, id), 0, data.size()};
}

DataHandle ObjStore::retrieve(const LocationDescriptor& location) const {
    return DataHandle("obj", reader_, {location});
}

// ---------------------------------------------------------------- catalogue

ObjCatalogue::ObjCatalogue(std::shared_ptr<const Schema> schema, std::shared_ptr<Engine> engine, SessionContext ctx)
    : schema_(std::move(schema)), engine_(std::move(engine)), ctx_(std::move(ctx)) {}

void ObjCatalogue::archive(const SplitKey& key, const LocationDescriptor& location) {
    const auto writer = ctx_.session_id;
    const auto ds = key.dataset.str();
    const auto colloc = key.collocation.str();
    const auto dkv = dataset_kv(ds);

    if (!root_ready_) {
        engine_->ns_create_if_absent(kRootNamespace);
        root_ready_ = true;
    }
    if (!datasets_ready_.contains(ds)) {
        engine_->ns_create_if_absent(ds);
        if (!engine_->kv_get(kRootKv, ds)) {
            engine_->kv_put(dkv, kKeyEntry, ds, writer);
            engine_->kv_put(dkv, kSchemaEntry, schema_->to_text(), writer);
            engine_->kv_put(kRootKv, ds, dkv.uri(), writer);
        }
        datasets_ready_.insert(ds);
    }

    const auto index_key = ds + "|" + colloc;
    auto it = indexes_ready_.find(index_key);
    if (it == indexes_ready_.end()) {
        KvRef ikv;
        if (auto uri = engine_->kv_get(dkv, colloc)) {
            ikv = KvRef::parse(*uri);
        } else {
            ikv = index_kv(ds, colloc);
            std::string dims;
            for (const auto& d : schema_->element_dims()) dims += (dims.empty() ? "" : ",") + d;
            engine_->kv_put(ikv, kKeyEntry, colloc, writer);
            engine_->kv_put(ikv, kAxesEntry, dims, writer);
            engine_->kv_put(dkv, colloc, ikv.uri(), writer);
        }
        it = indexes_ready_.emplace(index_key, ikv).first;
    }

    for (const auto& [dim, value] : key.element.entries()) {
        auto cached = index_key + "|" + dim + "=" + value;
        if (axes_written_.contains(cached)) continue;
        engine_->kv_put(axis_kv(ds, colloc, dim), value, "1", writer);
        axes_written_.insert(std::move(cached));
    }
    engine_->kv_put(it->second, key.element.str(), encode_descriptor(location), writer);
}

std::optional<KvRef> ObjCatalogue::find_dataset(const std::string& dataset) {
    if (auto it = datasets_.find(dataset); it != datasets_.end()) return it->second;
    if (!engine_->ns_exists(kRootNamespace)) return std::nullopt;
    auto uri = engine_->kv_get(kRootKv, dataset);
    if (!uri) return std::nullopt;
    return datasets_.emplace(dataset, KvRef::parse(*uri)).first->second;
}

const ObjCatalogue::View& ObjCatalogue::view_for(const std::string& dataset, const std::string& collocation) {
    const auto key = dataset + "|" + collocation;
    if (auto it = views_.find(key); it != views_.end()) return it->second;
    View view;
    if (auto dkv = find_dataset(dataset)) {
        if (auto uri = engine_->kv_get(*dkv, collocation)) {
            view.index = KvRef::parse(*uri);
            const auto dims = engine_->kv_get(*view.index, kAxesEntry);
            for (const auto& dim : split_commas(dims.value_or("")))
                for (auto& v : engine_->kv_list(axis_kv(dataset, collocation, dim))) view.axes.insert(dim, std::move(v));
        }
    }
    return views_.emplace(key, std::move(view)).first->second;
}

std::vector<std::string> ObjCatalogue::axis(const Identifier& dataset, const Identifier& collocation,
                                            const std::string& dim) {
    return view_for(dataset.str(), collocation.str()).axes.values(dim);
}

std::optional<LocationDescriptor> ObjCatalogue::retrieve(const SplitKey& key) {
    const auto& view = view_for(key.dataset.str(), key.collocation.str());
    if (!view.index || !view.axes.may_contain(key.element)) return std::nullopt;
    auto value = engine_->kv_get(*view.index, key.element.str());
    if (!value) return std::nullopt;
    return decode_descriptor(*value);
}

std::vector<ListEntry> ObjCatalogue::list(const Identifier& dataset, const PartialIdentifier& partial) {
    std::vector<ListEntry> out;
    const auto ds = dataset.str();
    const auto dkv = find_dataset(ds);
    if (!dkv) return out;
    for (const auto& colloc_key : engine_->kv_list(*dkv)) {
        if (colloc_key == kKeyEntry || colloc_key == kSchemaEntry) continue;
        const auto collocation = Identifier::parse(colloc_key);
        if (!partial.matches_part(collocation)) continue;
        const auto uri = engine_->kv_get(*dkv, colloc_key);
        if (!uri) continue;
        const auto ikv = KvRef::parse(*uri);
        for (const auto& element_key : engine_->kv_list(ikv)) {
            if (element_key == kKeyEntry || element_key == kAxesEntry) continue;
            auto id = schema_->join({dataset, collocation, Identifier::parse(element_key)});
            if (!partial.matches(id)) continue;
            if (auto value = engine_->kv_get(ikv, element_key)) out.push_back({std::move(id), decode_descriptor(*value)});
        }
    }
    return out;
}

// ---------------------------------------------------------------- backend

ObjBackend::ObjBackend(std::shared_ptr<const Schema> schema, std::shared_ptr<Engine> engine)
    : schema_(std::move(schema)), engine_(std::move(engine)) {}

std::unique_ptr<StoreBackend> ObjBackend::make_store(const SessionContext& ctx) {
    return std::make_unique<ObjStore>(engine_, ctx);
}

std::unique_ptr<CatalogueBackend> ObjBackend::make_catalogue(const SessionContext& ctx) {
    return std::make_unique<ObjCatalogue>(schema_, engine_, ctx);
}

}  // namespace fieldstore::objb
