#include "fieldstore/engine/local_engine.h"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>

#include "fieldstore/checksum.h"
#include "fieldstore/codec.h"
#include "fieldstore/error.h"

namespace fieldstore {

namespace fs = std::filesystem;

namespace {

constexpr std::uint8_t kRecPut = 1;
constexpr std::uint8_t kRecAlloc = 2;

std::vector<std::byte> frame(std::uint8_t type, std::span<const std::byte> payload) {
    Encoder e;
    e.u32(static_cast<std::uint32_t>(payload.size() + 1));
    e.u8(type);
    e.raw(payload);
    e.u32(crc32c(e.bytes().subspan(4)));
    return std::move(e).take();
}

std::vector<std::byte> put_record(const ObjectId& id, std::string_view key, std::string_view value) {
    Encoder p;
    p.u64(id.hi);
    p.u64(id.lo);
    p.str(key);
    p.str(value);
    return frame(kRecPut, p.bytes());
}

std::vector<std::byte> alloc_record(std::uint64_t next) {
    Encoder p;
    p.u64(next);
    return frame(kRecAlloc, p.bytes());
}

void validate_ns_name(const std::string& ns) {
    if (ns.empty() || ns.size() > 200 || ns == "." || ns == ".." || ns.find('/') != std::string::npos ||
        ns.find('\0') != std::string::npos) {
        throw InvalidArgument("invalid namespace name '" + ns + "'");
    }
}

}  // namespace

struct LocalEngine::Namespace {
    std::string name;
    fs::path dir;  // empty in memory mode

    std::mutex mu;  // kvs, next_id, log
    std::map<ObjectId, std::map<std::string, std::string, std::less<>>> kvs;
    std::uint64_t next_id = 1;
    UniqueFd log;
    std::uint64_t log_records = 0;

    std::mutex blob_mu;  // memory-mode blobs
    std::map<ObjectId, std::shared_ptr<const std::vector<std::byte>>> blobs;

    std::size_t live_entries() const {
        std::size_t n = 1;
        for (const auto& [id, kv] : kvs) n += kv.size();
        return n;
    }
};

std::shared_ptr<LocalEngine> LocalEngine::in_memory() {
    return std::shared_ptr<LocalEngine>(new LocalEngine());
}

std::shared_ptr<LocalEngine> LocalEngine::open(const fs::path& dir) {
    std::shared_ptr<LocalEngine> engine(new LocalEngine());
    fs::create_directories(dir / "ns");
    engine->dir_ = fs::absolute(dir);
    engine->lock_fd_ = posix::open(dir / "LOCK", O_RDWR | O_CREAT);
    if (::flock(engine->lock_fd_.get(), LOCK_EX | LOCK_NB) != 0) {
        throw EngineError("engine directory " + dir.string() + " is in use by another process");
    }
    for (const auto& entry : fs::directory_iterator(dir / "ns")) {
        if (entry.is_directory()) engine->load_namespace(entry.path().filename().string());
    }
    return engine;
}

std::shared_ptr<LocalEngine> LocalEngine::open_shared(const fs::path& dir, EngineMode mode) {
    static std::mutex mu;
    static std::map<std::string, std::weak_ptr<LocalEngine>> registry;

    const auto key = std::string(mode == EngineMode::kMemory ? "mem:" : "dir:") + fs::absolute(dir).lexically_normal().string();
    std::lock_guard lock(mu);
    if (auto existing = registry[key].lock()) return existing;
    auto engine = mode == EngineMode::kMemory ? in_memory() : open(dir);
    registry[key] = engine;
    return engine;
}

LocalEngine::~LocalEngine() = default;

void LocalEngine::load_namespace(const std::string& name) {
    auto ns = std::make_unique<Namespace>();
    ns->name = name;
    ns->dir = dir_ / "ns" / name;
    fs::create_directories(ns->dir / "blobs");

    const auto log_path = ns->dir / "kv.log";
    ns->log = posix::open(log_path, O_RDWR | O_CREAT | O_APPEND);
    const auto size = posix::file_size(ns->log.get());
    std::vector<std::byte> buf(size);
    posix::pread_full(ns->log.get(), buf, 0);

    std::size_t good = 0;
    Decoder d(buf);
    try {
        while (!d.done()) {
            const auto len = d.u32();
            auto body = d.take(len);
            const auto crc = d.u32();
            if (len == 0 || crc32c(body) != crc) break;
            Decoder r(body.subspan(1));
            switch (static_cast<std::uint8_t>(body[0])) {
                case kRecPut: {
                    ObjectId id{r.u64(), r.u64()};
                    auto key = r.str();
                    ns->kvs[id][std::move(key)] = r.str();
                    break;
                }
                case kRecAlloc: ns->next_id = std::max(ns->next_id, r.u64()); break;
                default: throw CorruptCatalogue("unknown engine log record");
            }
            ++ns->log_records;
            good = d.position();
        }
    } catch (const CorruptCatalogue&) {
        // Torn tail from an interrupted append; everything before `good` is intact.
    }
    if (good != size) {
        if (::ftruncate(ns->log.get(), static_cast<off_t>(good)) != 0) throw IoError("ftruncate " + log_path.string(), errno);
        posix::datasync(ns->log.get());
    }

    auto* raw = ns.get();
    namespaces_.emplace(name, std::move(ns));
    if (raw->log_records > 4 * raw->live_entries() + 1024) compact_locked(*raw);
}

LocalEngine::Namespace* LocalEngine::find(const std::string& ns) {
    std::shared_lock lock(ns_mu_);
    auto it = namespaces_.find(ns);
    return it == namespaces_.end() ? nullptr : it->second.get();
}

LocalEngine::Namespace& LocalEngine::lookup(const std::string& ns) {
    if (auto* n = find(ns)) return *n;
    throw EngineError("unknown namespace '" + ns + "'");
}

void LocalEngine::append_log(Namespace& ns, std::span<const std::byte> record) {
    if (!ns.log) return;
    posix::write_all(ns.log.get(), record);
    posix::datasync(ns.log.get());
    ++ns.log_records;
}

void LocalEngine::maybe_fail(const EngineOpInfo& info) {
    std::lock_guard lock(fault_mu_);
    if (info.op == EngineOp::kKvPut && fail_put_ready_) {
        fail_put_ready_ = false;
        throw InjectedFault("injected fault before kv put");
    }
    if (fault_hook_ && fault_hook_(info)) throw InjectedFault("injected fault");
}

void LocalEngine::count(EngineOp op, const KvRef* kv, std::uint64_t writer) {
    std::lock_guard lock(counters_mu_);
    switch (op) {
        case EngineOp::kKvPut:
            ++counters_.kv_put;
            if (kv && writer != 0) counters_.kv_writers[*kv].insert(writer);
            break;
        case EngineOp::kKvGet: ++counters_.kv_get; break;
        case EngineOp::kKvList: ++counters_.kv_list; break;
        case EngineOp::kBlobWrite: ++counters_.blob_write; break;
        case EngineOp::kBlobRead: ++counters_.blob_read; break;
        case EngineOp::kNsCreate: ++counters_.ns_create; break;
        case EngineOp::kIdAlloc: ++counters_.id_alloc; break;
    }
}

bool LocalEngine::ns_create_if_absent(const std::string& name) {
    validate_ns_name(name);
    maybe_fail({EngineOp::kNsCreate, name, nullptr, {}});
    count(EngineOp::kNsCreate);
    std::unique_lock lock(ns_mu_);
    if (namespaces_.contains(name)) return false;
    if (durable()) {
        const auto dir = dir_ / "ns" / name;
        posix::mkdir_if_absent(dir);
        posix::mkdir_if_absent(dir / "blobs");
        auto ns = std::make_unique<Namespace>();
        ns->name = name;
        ns->dir = dir;
        ns->log = posix::open(dir / "kv.log", O_RDWR | O_CREAT | O_APPEND);
        posix::fsync_dir(dir);
        posix::fsync_dir(dir_ / "ns");
        namespaces_.emplace(name, std::move(ns));
    } else {
        auto ns = std::make_unique<Namespace>();
        ns->name = name;
        namespaces_.emplace(name, std::move(ns));
    }
    return true;
}

bool LocalEngine::ns_exists(const std::string& ns) {
    return find(ns) != nullptr;
}

void LocalEngine::kv_put(const KvRef& kv, std::string_view key, std::string_view value, std::uint64_t writer) {
    if (value.size() > kMaxKvValueSize) throw EngineError("kv value exceeds 16 MiB limit");
    maybe_fail({EngineOp::kKvPut, kv.ns, &kv.id, key});
    auto& ns = lookup(kv.ns);
    count(EngineOp::kKvPut, &kv, writer);
    std::lock_guard lock(ns.mu);
    append_log(ns, put_record(kv.id, key, value));
    auto& map = ns.kvs[kv.id];
    if (auto it = map.find(key); it != map.end()) {
        it->second.assign(value);
    } else {
        map.emplace(std::string(key), std::string(value));
    }
    if (ns.log && ns.log_records % 1024 == 0 && ns.log_records > 4 * ns.live_entries() + 1024) compact_locked(ns);
}

std::optional<std::string> LocalEngine::kv_get(const KvRef& kv, std::string_view key) {
    maybe_fail({EngineOp::kKvGet, kv.ns, &kv.id, key});
    auto& ns = lookup(kv.ns);
    count(EngineOp::kKvGet);
    std::lock_guard lock(ns.mu);
    auto it = ns.kvs.find(kv.id);
    if (it == ns.kvs.end()) return std::nullopt;
    auto v = it->second.find(key);
    if (v == it->second.end()) return std::nullopt;
    return v->second;
}

std::vector<std::string> LocalEngine::kv_list(const KvRef& kv) {
    maybe_fail({EngineOp::kKvList, kv.ns, &kv.id, {}});
    auto& ns = lookup(kv.ns);
    count(EngineOp::kKvList);
    std::lock_guard lock(ns.mu);
    std::vector<std::string> keys;
    if (auto it = ns.kvs.find(kv.id); it != ns.kvs.end()) {
        keys.reserve(it->second.size());
        for (const auto& [k, v] : it->second) keys.push_back(k);
    }
    return keys;
}

void LocalEngine::blob_write(const std::string& ns_name, const ObjectId& id, std::span<const std::byte> data) {
    maybe_fail({EngineOp::kBlobWrite, ns_name, &id, {}});
    auto& ns = lookup(ns_name);
    count(EngineOp::kBlobWrite);
    if (durable()) {
        static std::atomic<std::uint64_t> counter{0};
        const auto blobs = ns.dir / "blobs";
        const auto final_path = blobs / id.hex();
        auto tmp = blobs / (".tmp." + id.hex() + "." + std::to_string(::getpid()) + "." + std::to_string(counter++));
        {
            auto fd = posix::open(tmp, O_WRONLY | O_CREAT | O_EXCL);
            posix::write_all(fd.get(), data);
            posix::datasync(fd.get());
        }
        if (::rename(tmp.c_str(), final_path.c_str()) != 0) {
            const int err = errno;
            ::unlink(tmp.c_str());
            throw IoError("rename " + final_path.string(), err);
        }
        posix::fsync_dir(blobs);
    } else {
        auto copy = std::make_shared<const std::vector<std::byte>>(data.begin(), data.end());
        std::lock_guard lock(ns.blob_mu);
        ns.blobs[id] = std::move(copy);
    }
    std::lock_guard lock(fault_mu_);
    if (fail_put_armed_) {
        fail_put_armed_ = false;
        fail_put_ready_ = true;
    }
}

void LocalEngine::blob_read(const std::string& ns_name, const ObjectId& id, std::uint64_t offset,
                            std::span<std::byte> out) {
    maybe_fail({EngineOp::kBlobRead, ns_name, &id, {}});
    auto& ns = lookup(ns_name);
    count(EngineOp::kBlobRead);
    if (durable()) {
        auto fd = posix::open_if_exists(ns.dir / "blobs" / id.hex(), O_RDONLY);
        if (!fd) throw EngineError("blob " + id.hex() + " does not exist in '" + ns_name + "'");
        if (posix::pread_full(fd.get(), out, offset) != out.size()) {
            throw EngineError("read beyond end of blob " + id.hex());
        }
        return;
    }
    std::shared_ptr<const std::vector<std::byte>> blob;
    {
        std::lock_guard lock(ns.blob_mu);
        auto it = ns.blobs.find(id);
        if (it == ns.blobs.end()) throw EngineError("blob " + id.hex() + " does not exist in '" + ns_name + "'");
        blob = it->second;
    }
    if (offset > blob->size() || out.size() > blob->size() - offset) {
        throw EngineError("read beyond end of blob " + id.hex());
    }
    std::copy_n(blob->begin() + static_cast<std::ptrdiff_t>(offset), out.size(), out.begin());
}

IdRange LocalEngine::allocate_ids(const std::string& ns_name, std::uint64_t n) {
    if (n == 0) throw InvalidArgument("allocate_ids needs n > 0");
    maybe_fail({EngineOp::kIdAlloc, ns_name, nullptr, {}});
    auto& ns = lookup(ns_name);
    count(EngineOp::kIdAlloc);
    std::lock_guard lock(ns.mu);
    IdRange range{ns.next_id, n};
    append_log(ns, alloc_record(ns.next_id + n));
    ns.next_id += n;
    return range;
}

EngineOpCounters LocalEngine::counters_snapshot() const {
    std::lock_guard lock(counters_mu_);
    return counters_;
}

void LocalEngine::reset_counters() {
    std::lock_guard lock(counters_mu_);
    counters_ = {};
}

void LocalEngine::set_fault_hook(FaultHook hook) {
    std::lock_guard lock(fault_mu_);
    fault_hook_ = std::move(hook);
}

void LocalEngine::fail_next_put_after_blob_write() {
    std::lock_guard lock(fault_mu_);
    fail_put_armed_ = true;
    fail_put_ready_ = false;
}

void LocalEngine::compact(const std::string& name) {
    auto& ns = lookup(name);
    std::lock_guard lock(ns.mu);
    compact_locked(ns);
}

void LocalEngine::compact_locked(Namespace& ns) {
    if (!ns.log) return;

    const auto log_path = ns.dir / "kv.log";
    const auto tmp = ns.dir / "kv.log.compact";
    {
        auto fd = posix::open(tmp, O_WRONLY | O_CREAT | O_TRUNC);
        Encoder all;
        all.raw(alloc_record(ns.next_id));
        for (const auto& [id, kv] : ns.kvs) {
            for (const auto& [k, v] : kv) all.raw(put_record(id, k, v));
        }
        posix::write_all(fd.get(), all.bytes());
        posix::datasync(fd.get());
    }
    if (::rename(tmp.c_str(), log_path.c_str()) != 0) throw IoError("rename " + log_path.string(), errno);
    posix::fsync_dir(ns.dir);
    ns.log = posix::open(log_path, O_RDWR | O_APPEND);
    ns.log_records = ns.live_entries();
}

}  // namespace fieldstore
