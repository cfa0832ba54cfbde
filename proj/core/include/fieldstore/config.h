#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace fieldstore {

enum class BackendKind { kFs, kObj };

enum class EngineMode { kDurable, kMemory };

/// Deployment configuration, read from `key = value` lines.
///
///   backend = fs | obj
///   schema  = <path>          (relative paths resolve against the config file)
///   root    = <path>          (fs root directory, or engine data directory)
///
/// Optional keys: `engine = durable | memory`, `engine_socket = <path>` (talk
/// to a running engine service instead of opening the directory in-process),
/// `fs_buffer_size = <bytes>`, `fs_stripe_count`, `fs_stripe_size` (recorded,
/// no effect on plain filesystems).
struct StoreConfig {
    BackendKind backend = BackendKind::kFs;
    std::filesystem::path schema;
    std::filesystem::path root;

    EngineMode engine_mode = EngineMode::kDurable;
    std::optional<std::filesystem::path> engine_socket;

    std::size_t fs_buffer_size = 8u << 20;
    unsigned fs_stripe_count = 8;
    std::size_t fs_stripe_size = 8u << 20;

    static StoreConfig parse(std::string_view text, const std::filesystem::path& base_dir = {});
    static StoreConfig load(const std::filesystem::path& path);
};

std::string_view to_string(BackendKind kind) noexcept;

}  // namespace fieldstore
