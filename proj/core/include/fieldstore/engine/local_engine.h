#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <shared_mutex>

#include "fieldstore/config.h"
#include "fieldstore/engine/engine.h"
#include "fieldstore/posix.h"

namespace fieldstore {

/// Describes an operation about to run, for fault-injection hooks.
struct EngineOpInfo {
    EngineOp op;
    const std::string& ns;
    const ObjectId* id = nullptr;
    std::string_view key;
};

/// In-process engine. Durable mode keeps one append-only log per namespace
/// (key-value puts and id-allocation cursors) plus one file per blob,
/// replaced by rename. Memory mode keeps the same semantics without files.
///
/// Data directory layout (durable):
///
///   <dir>/LOCK                       flock'd by the owning process
///   <dir>/ns/<namespace>/kv.log      [u32 len][u8 type][payload][u32 crc32c]
///   <dir>/ns/<namespace>/blobs/<id>  raw blob bytes, id as 32 hex digits
///
/// A torn log tail (crash mid-append) is truncated on open.
class LocalEngine final : public Engine {
public:
    static std::shared_ptr<LocalEngine> in_memory();
    /// Takes an exclusive lock on `dir`; a second opener in any process fails.
    static std::shared_ptr<LocalEngine> open(const std::filesystem::path& dir);
    /// Process-wide registry so that sessions in one process share one engine per directory.
    static std::shared_ptr<LocalEngine> open_shared(const std::filesystem::path& dir, EngineMode mode);

    ~LocalEngine() override;

    bool ns_create_if_absent(const std::string& ns) override;
    bool ns_exists(const std::string& ns) override;
    void kv_put(const KvRef& kv, std::string_view key, std::string_view value, std::uint64_t writer = 0) override;
    std::optional<std::string> kv_get(const KvRef& kv, std::string_view key) override;
    std::vector<std::string> kv_list(const KvRef& kv) override;
    void blob_write(const std::string& ns, const ObjectId& id, std::span<const std::byte> data) override;
    using Engine::blob_read;
    void blob_read(const std::string& ns, const ObjectId& id, std::uint64_t offset, std::span<std::byte> out) override;
    IdRange allocate_ids(const std::string& ns, std::uint64_t n) override;
    EngineOpCounters counters_snapshot() const override;
    void reset_counters() override;

    /// Hook consulted before each operation; returning true makes the
    /// operation throw InjectedFault with no effect.
    using FaultHook = std::function<bool(const EngineOpInfo&)>;
    void set_fault_hook(FaultHook hook);
    /// One-shot: after the next successful blob write, the following kv put fails.
    void fail_next_put_after_blob_write();

    /// Rewrites a namespace log keeping only live state.
    void compact(const std::string& ns);

    bool durable() const noexcept { return !dir_.empty(); }
    const std::filesystem::path& directory() const noexcept { return dir_; }

private:
    struct Namespace;

    LocalEngine() = default;

    Namespace& lookup(const std::string& ns);
    Namespace* find(const std::string& ns);
    void load_namespace(const std::string& name);
    void append_log(Namespace& ns, std::span<const std::byte> record);
    void compact_locked(Namespace& ns);
    void maybe_fail(const EngineOpInfo& info);
    void count(EngineOp op, const KvRef* kv = nullptr, std::uint64_t writer = 0);

    std::filesystem::path dir_;
    UniqueFd lock_fd_;

    mutable std::shared_mutex ns_mu_;
    std::map<std::string, std::unique_ptr<Namespace>, std::less<>> namespaces_;

    mutable std::mutex counters_mu_;
    EngineOpCounters counters_;

    std::mutex fault_mu_;
    FaultHook fault_hook_;
    bool fail_put_armed_ = false;
    bool fail_put_ready_ = false;
};

}  // namespace fieldstore
