#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include "fieldstore/engine/engine.h"
#include "fieldstore/posix.h"

namespace fieldstore {

/// Local-socket protocol. Every frame is a little-endian u32 length followed
/// by that many bytes. Requests carry a u8 op code then op-specific fields;
/// responses carry a u8 status (0 ok, 1 error) then the result, or for errors
/// a u8 error class and a message. Strings are u32-length-prefixed.
enum class WireOp : std::uint8_t {
    kNsCreate = 1,
    kNsExists = 2,
    kKvPut = 3,
    kKvGet = 4,
    kKvList = 5,
    kBlobWrite = 6,
    kBlobRead = 7,
    kAllocIds = 8,
    kCounters = 9,
    kResetCounters = 10,
};

/// Serves one engine to many processes over a unix-domain socket.
class EngineServer {
public:
    EngineServer(std::shared_ptr<Engine> engine, std::filesystem::path socket_path);
    ~EngineServer();

    EngineServer(const EngineServer&) = delete;
    EngineServer& operator=(const EngineServer&) = delete;

    const std::filesystem::path& socket_path() const noexcept { return path_; }
    void stop();

private:
    void accept_loop();
    void serve(int fd);

    std::shared_ptr<Engine> engine_;
    std::filesystem::path path_;
    UniqueFd listen_fd_;
    std::atomic<bool> stopping_{false};
    std::thread acceptor_;

    std::mutex conn_mu_;
    std::set<int> conn_fds_;
    std::vector<std::thread> workers_;
};

/// Engine client speaking the local-socket protocol. Thread-safe; calls are
/// serialized over one connection.
class RemoteEngine final : public Engine {
public:
    explicit RemoteEngine(const std::filesystem::path& socket_path);

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

private:
    std::vector<std::byte> call(std::span<const std::byte> request) const;

    mutable std::mutex mu_;
    UniqueFd fd_;
};

}  // namespace fieldstore
