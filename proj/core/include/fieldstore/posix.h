#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fieldstore {

/// Owning file descriptor.
class UniqueFd {
public:
    UniqueFd() = default;
    explicit UniqueFd(int fd) noexcept : fd_(fd) {}
    UniqueFd(UniqueFd&& other) noexcept : fd_(other.release()) {}
    UniqueFd& operator=(UniqueFd&& other) noexcept {
        if (this != &other) reset(other.release());
        return *this;
    }
    UniqueFd(const UniqueFd&) = delete;
    UniqueFd& operator=(const UniqueFd&) = delete;
    ~UniqueFd() { reset(); }

    int get() const noexcept { return fd_; }
    explicit operator bool() const noexcept { return fd_ >= 0; }
    int release() noexcept {
        int fd = fd_;
        fd_ = -1;
        return fd;
    }
    void reset(int fd = -1) noexcept;

private:
    int fd_ = -1;
};

namespace posix {

UniqueFd open(const std::filesystem::path& path, int flags, unsigned mode = 0644);
/// Like `open` but returns an empty fd instead of throwing on ENOENT.
UniqueFd open_if_exists(const std::filesystem::path& path, int flags);

/// Single write(2) call; throws unless all bytes were written. For O_APPEND
/// descriptors this is the atomic-append primitive.
void write_once(int fd, std::span<const std::byte> data);
void write_all(int fd, std::span<const std::byte> data);
void pwrite_all(int fd, std::span<const std::byte> data, std::uint64_t offset);

/// Reads until `out` is full or EOF. Returns bytes read; `syscalls` counts read(2) calls.
std::size_t pread_full(int fd, std::span<std::byte> out, std::uint64_t offset, std::uint64_t* syscalls = nullptr);

std::uint64_t file_size(int fd);
void datasync(int fd);
void fsync_dir(const std::filesystem::path& dir);

/// mkdir(2). Returns true if this call created the directory.
bool mkdir_if_absent(const std::filesystem::path& dir);

/// Writes `data` to a temporary sibling, syncs it, then hard-links it into
/// place. Returns false (and leaves the existing file alone) if `path` exists.
bool create_file_atomic(const std::filesystem::path& path, std::span<const std::byte> data);

std::string hostname();

}  // namespace posix
}  // namespace fieldstore
