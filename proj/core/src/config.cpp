#include "fieldstore/config.h"

#include <charconv>
#include <fstream>
#include <sstream>

#include "fieldstore/error.h"

namespace fieldstore {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

std::size_t parse_size(std::string_view key, std::string_view v) {
    std::size_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw InvalidArgument("config key '" + std::string(key) + "' expects an integer, got '" + std::string(v) + "'");
    }
    return out;
}

}  // namespace

std::string_view to_string(BackendKind kind) noexcept {
    return kind == BackendKind::kFs ? "fs" : "obj";
}

StoreConfig StoreConfig::parse(std::string_view text, const std::filesystem::path& base_dir) {
    StoreConfig cfg;
    bool have_backend = false;
    bool have_schema = false;
    bool have_root = false;
    auto resolve = [&](std::string_view p) {
        std::filesystem::path path{std::string(p)};
        return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };

    std::istringstream in{std::string(text)};
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string_view line = raw;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw InvalidArgument("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key == "backend") {
            if (value == "fs") cfg.backend = BackendKind::kFs;
            else if (value == "obj") cfg.backend = BackendKind::kObj;
            else throw InvalidArgument("unknown backend '" + std::string(value) + "'");
            have_backend = true;
        } else if (key == "schema") {
            cfg.schema = resolve(value);
            have_schema = true;
        } else if (key == "root") {
            cfg.root = resolve(value);
            have_root = true;
        } else if (key == "engine") {
            if (value == "durable") cfg.engine_mode = EngineMode::kDurable;
            else if (value == "memory") cfg.engine_mode = EngineMode::kMemory;
            else throw InvalidArgument("unknown engine mode '" + std::string(value) + "'");
        } else if (key == "engine_socket") {
            cfg.engine_socket = resolve(value);
        } else if (key == "fs_buffer_size") {
            cfg.fs_buffer_size = parse_size(key, value);
        } else if (key == "fs_stripe_count") {
            cfg.fs_stripe_count = static_cast<unsigned>(parse_size(key, value));
        } else if (key == "fs_stripe_size") {
            cfg.fs_stripe_size = parse_size(key, value);
        } else {
            throw InvalidArgument("config line " + std::to_string(lineno) + ": unknown key '" + std::string(key) + "'");
        }
    }
    if (!have_backend || !have_schema || !have_root) {
        throw InvalidArgument("config must set backend, schema and root");
    }
    return cfg;
}

StoreConfig StoreConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.parent_path());
}

}  // namespace fieldstore
