#include "fieldstore/engine/socket.h"

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "fieldstore/codec.h"
#include "fieldstore/error.h"

namespace fieldstore {

namespace {

constexpr std::uint32_t kMaxFrame = 1u << 30;

enum class ErrClass : std::uint8_t { kEngine = 0, kInvalidArgument = 1, kInjected = 2, kOther = 3 };

sockaddr_un make_addr(const std::filesystem::path& path) {
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    const auto s = path.string();
    if (s.size() >= sizeof addr.sun_path) throw InvalidArgument("socket path too long: " + s);
    std::memcpy(addr.sun_path, s.c_str(), s.size() + 1);
    return addr;
}

/// Returns false on clean EOF before any byte.
bool read_exact(int fd, std::span<std::byte> out) {
    std::size_t done = 0;
    while (done < out.size()) {
        const ssize_t n = ::recv(fd, out.data() + done, out.size() - done, 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError("recv", errno);
        }
        if (n == 0) {
            if (done == 0) return false;
            throw EngineError("engine connection closed mid-frame");
        }
        done += static_cast<std::size_t>(n);
    }
    return true;
}

void send_all(int fd, std::span<const std::byte> data) {
    while (!data.empty()) {
        const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError("send", errno);
        }
        data = data.subspan(static_cast<std::size_t>(n));
    }
}

void send_frame(int fd, std::span<const std::byte> body) {
    Encoder header;
    header.u32(static_cast<std::uint32_t>(body.size()));
    send_all(fd, header.bytes());
    send_all(fd, body);
}

std::optional<std::vector<std::byte>> recv_frame(int fd) {
    std::byte len_buf[4];
    if (!read_exact(fd, len_buf)) return std::nullopt;
    const auto len = Decoder(len_buf).u32();
    if (len > kMaxFrame) throw EngineError("oversized engine frame");
    std::vector<std::byte> body(len);
    if (!read_exact(fd, body) && len > 0) throw EngineError("engine connection closed mid-frame");
    return body;
}

void encode_kv(Encoder& e, const KvRef& kv) {
    e.str(kv.ns);
    e.u64(kv.id.hi);
    e.u64(kv.id.lo);
}

KvRef decode_kv(Decoder& d) {
    KvRef kv;
    kv.ns = d.str();
    kv.id.hi = d.u64();
    kv.id.lo = d.u64();
    return kv;
}

void encode_counters(Encoder& e, const EngineOpCounters& c) {
    for (auto v : {c.kv_put, c.kv_get, c.kv_list, c.blob_write, c.blob_read, c.ns_create, c.id_alloc}) e.u64(v);
    e.u32(static_cast<std::uint32_t>(c.kv_writers.size()));
    for (const auto& [kv, tags] : c.kv_writers) {
        encode_kv(e, kv);
        e.u32(static_cast<std::uint32_t>(tags.size()));
        for (auto t : tags) e.u64(t);
    }
}

EngineOpCounters decode_counters(Decoder& d) {
    EngineOpCounters c;
    for (auto* v : {&c.kv_put, &c.kv_get, &c.kv_list, &c.blob_write, &c.blob_read, &c.ns_create, &c.id_alloc}) {
        *v = d.u64();
    }
    const auto n = d.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        auto kv = decode_kv(d);
        auto& tags = c.kv_writers[kv];
        const auto m = d.u32();
        for (std::uint32_t j = 0; j < m; ++j) tags.insert(d.u64());
    }
    return c;
}

std::vector<std::byte> dispatch(Engine& engine, std::span<const std::byte> request) {
    Decoder d(request);
    Encoder out;
    out.u8(0);
    switch (static_cast<WireOp>(d.u8())) {
        case WireOp::kNsCreate: out.u8(engine.ns_create_if_absent(d.str()) ? 1 : 0); break;
        case WireOp::kNsExists: out.u8(engine.ns_exists(d.str()) ? 1 : 0); break;
        case WireOp::kKvPut: {
            auto kv = decode_kv(d);
            auto key = d.str();
            auto value = d.str();
            engine.kv_put(kv, key, value, d.u64());
            break;
        }
        case WireOp::kKvGet: {
            auto kv = decode_kv(d);
            auto v = engine.kv_get(kv, d.str());
            out.u8(v ? 1 : 0);
            if (v) out.str(*v);
            break;
        }
        case WireOp::kKvList: {
            auto keys = engine.kv_list(decode_kv(d));
            out.u32(static_cast<std::uint32_t>(keys.size()));
            for (const auto& k : keys) out.str(k);
            break;
        }
        case WireOp::kBlobWrite: {
            auto kv = decode_kv(d);
            const auto n = d.u64();
            engine.blob_write(kv.ns, kv.id, d.take(n));
            break;
        }
        case WireOp::kBlobRead: {
            auto kv = decode_kv(d);
            const auto offset = d.u64();
            const auto length = d.u64();
            auto bytes = engine.blob_read(kv.ns, kv.id, offset, length);
            out.raw(bytes);
            break;
        }
        case WireOp::kAllocIds: {
            auto ns = d.str();
            auto range = engine.allocate_ids(ns, d.u64());
            out.u64(range.first);
            out.u64(range.count);
            break;
        }
        case WireOp::kCounters: encode_counters(out, engine.counters_snapshot()); break;
        case WireOp::kResetCounters: engine.reset_counters(); break;
        default: throw EngineError("unknown engine op code");
    }
    return std::move(out).take();
}

std::vector<std::byte> error_response(ErrClass cls, std::string_view message) {
    Encoder out;
    out.u8(1);
    out.u8(static_cast<std::uint8_t>(cls));
    out.str(message);
    return std::move(out).take();
}

}  // namespace

// ---------------------------------------------------------------- server

EngineServer::EngineServer(std::shared_ptr<Engine> engine, std::filesystem::path socket_path)
    : engine_(std::move(engine)), path_(std::move(socket_path)) {
    ::unlink(path_.c_str());
    listen_fd_ = UniqueFd(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!listen_fd_) throw IoError("socket", errno);
    auto addr = make_addr(path_);
    if (::bind(listen_fd_.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        throw IoError("bind " + path_.string(), errno);
    }
    if (::listen(listen_fd_.get(), 128) != 0) throw IoError("listen", errno);
    acceptor_ = std::thread([this] { accept_loop(); });
}

EngineServer::~EngineServer() {
    stop();
}

void EngineServer::stop() {
    if (stopping_.exchange(true)) return;
    ::shutdown(listen_fd_.get(), SHUT_RDWR);
    if (acceptor_.joinable()) acceptor_.join();
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(conn_mu_);
        for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
        workers.swap(workers_);
    }
    for (auto& t : workers) t.join();
    ::unlink(path_.c_str());
}

void EngineServer::accept_loop() {
    while (!stopping_) {
        const int fd = ::accept4(listen_fd_.get(), nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0) {
            if (errno == EINTR) continue;
            return;
        }
        std::lock_guard lock(conn_mu_);
        if (stopping_) {
            ::close(fd);
            return;
        }
        conn_fds_.insert(fd);
        workers_.emplace_back([this, fd] { serve(fd); });
    }
}

void EngineServer::serve(int fd) {
    try {
        while (auto request = recv_frame(fd)) {
            std::vector<std::byte> response;
            try {
                response = dispatch(*engine_, *request);
            } catch (const InjectedFault& e) {
                response = error_response(ErrClass::kInjected, e.what());
            } catch (const InvalidArgument& e) {
                response = error_response(ErrClass::kInvalidArgument, e.what());
            } catch (const EngineError& e) {
                response = error_response(ErrClass::kEngine, e.what());
            } catch (const std::exception& e) {
                response = error_response(ErrClass::kOther, e.what());
            }
            send_frame(fd, response);
        }
    } catch (const std::exception&) {
        // Peer went away or sent garbage; drop the connection.
    }
    std::lock_guard lock(conn_mu_);
    conn_fds_.erase(fd);
    ::close(fd);
}

// ---------------------------------------------------------------- client

RemoteEngine::RemoteEngine(const std::filesystem::path& socket_path) {
    fd_ = UniqueFd(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!fd_) throw IoError("socket", errno);
    auto addr = make_addr(socket_path);
    if (::connect(fd_.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        throw IoError("connect " + socket_path.string(), errno);
    }
}

std::vector<std::byte> RemoteEngine::call(std::span<const std::byte> request) const {
    std::vector<std::byte> response;
    {
        std::lock_guard lock(mu_);
        send_frame(fd_.get(), request);
        auto frame = recv_frame(fd_.get());
        if (!frame) throw EngineError("engine service closed the connection");
        response = std::move(*frame);
    }
    Decoder d(response);
    if (d.u8() == 0) return {response.begin() + 1, response.end()};
    const auto cls = static_cast<ErrClass>(d.u8());
    auto message = d.str();
    switch (cls) {
        case ErrClass::kInjected: throw InjectedFault(message);
        case ErrClass::kInvalidArgument: throw InvalidArgument(message);
        case ErrClass::kEngine:
        case ErrClass::kOther: break;
    }
    throw EngineError(message);
}

bool RemoteEngine::ns_create_if_absent(const std::string& ns) {
    Encoder e;
    e.u8(static_cast<std::uint8_t>(WireOp::kNsCreate));
    e.str(ns);
    auto r = call(e.bytes());
    return Decoder(r).u8() != 0;
}

bool RemoteEngine::ns_exists(const std::string& ns) {
    Encoder e;
    e.u8(static_cast<std::uint8_t>(WireOp::kNsExists));
    e.str(ns);
    auto r = call(e.bytes());
    return Decoder(r).u8() != 0;
}

void RemoteEngine::kv_put(const KvRef& kv, std::string_view key, std::string_view value, std::uint64_t writer) {
    Encoder e;
    e.u8(static_cast<std::uint8_t>(WireOp::kKvPut));
    encode_kv(e, kv);
    e.str(key);
    e.str(value);
    e.u64(writer);
    call(e.bytes());
}

std::optional<std::string> RemoteEngine::kv_get(const KvRef& kv, std::string_view key) {
    Encoder e;
    e.u8(static_cast<std::uint8_t>(WireOp::kKvGet));
    encode_kv(e, kv);
    e.str(key);
    auto r = call(e.bytes());
    Decoder d(r);
    if (d.u8() == 0) return std::nullopt;
    return d.str();
}

std::vector<std::string> RemoteEngine::kv_list(const KvRef& kv) {
    Encoder e;
    e.u8(static_cast<std::uint8_t>(WireOp::kKvList));
    encode_kv(e, kv);
    auto r = call(e.bytes());
    Decoder d(r);
    std::vector<std::string> keys(d.u32());
    for (auto& k : keys) k = d.str();
    return keys;
}

void RemoteEngine::blob_write(const std::string& ns, const ObjectId& id, std::span<const std::byte> data) {
    Encoder e;
    e.u8(static_cast<std::uint8_t>(WireOp::kBlobWrite));
    encode_kv(e, KvRef{ns, id});
    e.u64(data.size());
    e.raw(data);
    call(e.bytes());
}

void RemoteEngine::blob_read(const std::string& ns, const ObjectId& id, std::uint64_t offset,
                             std::span<std::byte> out) {
    Encoder e;
    e.u8(static_cast<std::uint8_t>(WireOp::kBlobRead));
    encode_kv(e, KvRef{ns, id});
    e.u64(offset);
    e.u64(out.size());
    auto r = call(e.bytes());
    if (r.size() != out.size()) throw EngineError("blob read returned wrong length");
    std::copy(r.begin(), r.end(), out.begin());
}

IdRange RemoteEngine::allocate_ids(const std::string& ns, std::uint64_t n) {
    Encoder e;
    e.u8(static_cast<std::uint8_t>(WireOp::kAllocIds));
    e.str(ns);
    e.u64(n);
    auto r = call(e.bytes());
    Decoder d(r);
    IdRange range;
    range.first = d.u64();
    range.count = d.u64();
    return range;
}

EngineOpCounters RemoteEngine::counters_snapshot() const {
    Encoder e;
    e.u8(static_cast<std::uint8_t>(WireOp::kCounters));
    auto r = call(e.bytes());
    Decoder d(r);
    return decode_counters(d);
}

void RemoteEngine::reset_counters() {
    Encoder e;
    e.u8(static_cast<std::uint8_t>(WireOp::kResetCounters));
    call(e.bytes());
}

}  // namespace fieldstore
