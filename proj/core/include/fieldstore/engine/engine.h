#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fieldstore {

/// 128-bit object id within a namespace. Id 0 is the namespace's primary key-value.
struct ObjectId {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;

    /// 32 lowercase hex digits.
    std::string hex() const;
    static ObjectId from_hex(std::string_view hex);
    /// MD5 of `unique`, so that name-derived ids spread uniformly.
    static ObjectId digest(std::string_view unique);

    friend auto operator<=>(const ObjectId&, const ObjectId&) = default;
};

/// A key-value object: namespace plus id.
struct KvRef {
    std::string ns;
    ObjectId id;

    /// `kv://<ns>/<hex>`
    std::string uri() const;
    static KvRef parse(std::string_view uri);

    friend auto operator<=>(const KvRef&, const KvRef&) = default;
};

struct IdRange {
    std::uint64_t first = 0;
    std::uint64_t count = 0;
};

enum class EngineOp : std::uint8_t { kKvPut, kKvGet, kKvList, kBlobWrite, kBlobRead, kNsCreate, kIdAlloc };

struct EngineOpCounters {
    std::uint64_t kv_put = 0;
    std::uint64_t kv_get = 0;
    std::uint64_t kv_list = 0;
    std::uint64_t blob_write = 0;
    std::uint64_t blob_read = 0;
    std::uint64_t ns_create = 0;
    std::uint64_t id_alloc = 0;
    /// Writer tags seen by `kv_put`, per key-value object. Tag 0 is not recorded.
    std::map<KvRef, std::set<std::uint64_t>> kv_writers;

    std::uint64_t total() const noexcept {
        return kv_put + kv_get + kv_list + blob_write + blob_read + ns_create + id_alloc;
    }
    /// Per-op difference `*this - earlier` (writer tags are not diffed).
    EngineOpCounters since(const EngineOpCounters& earlier) const;
};

inline constexpr std::size_t kMaxKvValueSize = 16u << 20;

/// Strongly consistent KV + blob store. Every operation is atomic; writes are
/// durable before returning (unless the engine runs in memory mode).
class Engine {
public:
    virtual ~Engine() = default;

    /// Exactly one of any set of concurrent callers gets `true`.
    virtual bool ns_create_if_absent(const std::string& ns) = 0;
    virtual bool ns_exists(const std::string& ns) = 0;

    virtual void kv_put(const KvRef& kv, std::string_view key, std::string_view value, std::uint64_t writer = 0) = 0;
    virtual std::optional<std::string> kv_get(const KvRef& kv, std::string_view key) = 0;
    /// Sorted key snapshot. An absent key-value lists as empty.
    virtual std::vector<std::string> kv_list(const KvRef& kv) = 0;

    /// Creates or atomically replaces the blob.
    virtual void blob_write(const std::string& ns, const ObjectId& id, std::span<const std::byte> data) = 0;
    /// Reads exactly `out.size()` bytes at `offset`. Throws if the blob is
    /// absent or the range exceeds it.
    virtual void blob_read(const std::string& ns, const ObjectId& id, std::uint64_t offset,
                           std::span<std::byte> out) = 0;
    std::vector<std::byte> blob_read(const std::string& ns, const ObjectId& id, std::uint64_t offset,
                                     std::uint64_t length);

    /// `n` fresh ids, never handed out before (including across restarts).
    virtual IdRange allocate_ids(const std::string& ns, std::uint64_t n) = 0;

    virtual EngineOpCounters counters_snapshot() const = 0;
    virtual void reset_counters() = 0;
};

}  // namespace fieldstore
