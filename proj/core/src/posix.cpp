#include "fieldstore/posix.h"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>

#include "fieldstore/error.h"

namespace fieldstore {

IoError::IoError(const std::string& what, int err)
    : Error(what + ": " + std::strerror(err)), code_(err) {}

void UniqueFd::reset(int fd) noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = fd;
}

namespace posix {

UniqueFd open(const std::filesystem::path& path, int flags, unsigned mode) {
    int fd;
    do {
        fd = ::open(path.c_str(), flags | O_CLOEXEC, mode);
    } while (fd < 0 && errno == EINTR);
    if (fd < 0) throw IoError("open " + path.string(), errno);
    return UniqueFd(fd);
}

UniqueFd open_if_exists(const std::filesystem::path& path, int flags) {
    int fd;
    do {
        fd = ::open(path.c_str(), flags | O_CLOEXEC);
    } while (fd < 0 && errno == EINTR);
    if (fd < 0) {
        if (errno == ENOENT) return UniqueFd();
        throw IoError("open " + path.string(), errno);
    }
    return UniqueFd(fd);
}

void write_once(int fd, std::span<const std::byte> data) {
    ssize_t n;
    do {
        n = ::write(fd, data.data(), data.size());
    } while (n < 0 && errno == EINTR);
    if (n < 0) throw IoError("write", errno);
    if (static_cast<std::size_t>(n) != data.size()) throw IoError("short write", EIO);
}

void write_all(int fd, std::span<const std::byte> data) {
    while (!data.empty()) {
        const ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError("write", errno);
        }
        data = data.subspan(static_cast<std::size_t>(n));
    }
}

void pwrite_all(int fd, std::span<const std::byte> data, std::uint64_t offset) {
    while (!data.empty()) {
        const ssize_t n = ::pwrite(fd, data.data(), data.size(), static_cast<off_t>(offset));
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError("pwrite", errno);
        }
        data = data.subspan(static_cast<std::size_t>(n));
        offset += static_cast<std::uint64_t>(n);
    }
}

std::size_t pread_full(int fd, std::span<std::byte> out, std::uint64_t offset, std::uint64_t* syscalls) {
    std::size_t done = 0;
    while (done < out.size()) {
        const ssize_t n = ::pread(fd, out.data() + done, out.size() - done, static_cast<off_t>(offset + done));
        if (syscalls) ++*syscalls;
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError("pread", errno);
        }
        if (n == 0) break;
        done += static_cast<std::size_t>(n);
    }
    return done;
}

std::uint64_t file_size(int fd) {
    struct stat st {};
    if (::fstat(fd, &st) != 0) throw IoError("fstat", errno);
    return static_cast<std::uint64_t>(st.st_size);
}

void datasync(int fd) {
    if (::fdatasync(fd) != 0) throw IoError("fdatasync", errno);
}

void fsync_dir(const std::filesystem::path& dir) {
    auto fd = open(dir, O_RDONLY | O_DIRECTORY);
    if (::fsync(fd.get()) != 0) throw IoError("fsync " + dir.string(), errno);
}

bool mkdir_if_absent(const std::filesystem::path& dir) {
    if (::mkdir(dir.c_str(), 0755) == 0) return true;
    if (errno == EEXIST) return false;
    throw IoError("mkdir " + dir.string(), errno);
}

bool create_file_atomic(const std::filesystem::path& path, std::span<const std::byte> data) {
    static std::atomic<std::uint64_t> counter{0};
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        auto fd = open(tmp, O_WRONLY | O_CREAT | O_EXCL);
        write_all(fd.get(), data);
        datasync(fd.get());
    }
    const int rc = ::link(tmp.c_str(), path.c_str());
    const int err = errno;
    ::unlink(tmp.c_str());
    if (rc == 0) return true;
    if (err == EEXIST) return false;
    throw IoError("link " + path.string(), err);
}

std::string hostname() {
    char buf[256] = {};
    if (::gethostname(buf, sizeof buf - 1) != 0) return "localhost";
    return buf;
}

}  // namespace posix
}  // namespace fieldstore
