#include <stdlib.h>

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include "fieldstore/config.h"
#include "fieldstore/engine/socket.h"
#include "fieldstore/error.h"
#include "hammer/hammer.h"

namespace {

std::filesystem::path self_exe() { return std::filesystem::read_symlink("/proc/self/exe"); }

std::filesystem::path make_socket_dir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "hammer-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw fieldstore::IoError("mkdtemp", errno);
    return tmpl;
}

void print_summary(const hammer::RunResult& result) {
    for (const auto& p : result.phases) {
        std::printf("rep %d %-8s sessions=%zu bytes=%llu seconds=%.6f bandwidth=%.1f MiB/s skew=%.6fs%s", p.repetition + 1,
                    p.phase.c_str(), p.sessions.size(), static_cast<unsigned long long>(p.bytes), p.seconds,
                    p.bandwidth / (1 << 20), p.start_skew_s, p.skew_flagged ? " SKEW" : "");
        if (p.phase == "list") std::printf(" listed=%llu", static_cast<unsigned long long>(p.listed));
        std::printf("\n");
        for (const auto& f : p.failures) std::printf("  error: %s\n", f.c_str());
    }
    for (const auto& a : result.summary)
        std::printf("%-8s mean=%.1f MiB/s stddev=%.1f MiB/s over %d\n", a.phase.c_str(), a.mean / (1 << 20),
                    a.stddev / (1 << 20), a.count);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc == 3 && std::string_view(argv[1]) == "--worker") return hammer::worker_main(argv[2]);

    CLI::App app{"Parallel archive/retrieve/list benchmark for fieldstore"};
    hammer::HammerConfig cfg;
    std::vector<std::string> modes;
    std::string pattern = "none";
    std::filesystem::path config_path;
    std::filesystem::path out_path;
    bool threads = false;

    app.add_option("--mode", modes, "Phases for pattern none, run in order (write, read, list)")->delimiter(',');
    app.add_option("--pattern", pattern, "none | wr | repeated")->check(CLI::IsMember({"none", "wr", "repeated"}));
    app.add_option("--nparams", cfg.nparams)->check(CLI::PositiveNumber);
    app.add_option("--nlevels", cfg.nlevels)->check(CLI::PositiveNumber);
    app.add_option("--nsteps", cfg.nsteps)->check(CLI::PositiveNumber);
    app.add_option("--nensembles", cfg.nensembles)->check(CLI::PositiveNumber);
    app.add_option("--sessions", cfg.sessions_per_node, "Sessions per ensemble member")->check(CLI::PositiveNumber);
    app.add_option("--field-size", cfg.field_size, "Bytes per field")->check(CLI::PositiveNumber);
    app.add_flag("--verify", cfg.verify, "Check every retrieved payload");
    app.add_option("--reps", cfg.repetitions)->check(CLI::PositiveNumber);
    app.add_option("--ops", cfg.ops, "Operations per session in the repeated pattern")->check(CLI::PositiveNumber);
    app.add_option("--config", config_path, "Store configuration file")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out_path, "CSV report");
    app.add_flag("--threads", threads, "Run sessions as threads of this process");
    CLI11_PARSE(app, argc, argv);

    try {
        cfg.pattern = hammer::parse_pattern(pattern);
        if (!modes.empty()) {
            cfg.modes.clear();
            for (const auto& m : modes) cfg.modes.push_back(hammer::parse_mode(m));
        }
        cfg.validate();

        config_path = std::filesystem::absolute(config_path);
        const auto store_cfg = fieldstore::StoreConfig::load(config_path);
        const auto store = fieldstore::FieldStore::open(store_cfg);

        std::unique_ptr<hammer::Runner> runner;
        std::unique_ptr<fieldstore::EngineServer> server;
        std::filesystem::path socket_dir;
        if (threads) {
            runner = std::make_unique<hammer::ThreadRunner>(store, cfg);
        } else {
            std::optional<std::filesystem::path> socket = store_cfg.engine_socket;
            if (store.engine() && !socket) {
                socket_dir = make_socket_dir();
                socket = socket_dir / "engine.sock";
                server = std::make_unique<fieldstore::EngineServer>(store.engine(), *socket);
            }
            runner = std::make_unique<hammer::ProcessRunner>(self_exe(), config_path, socket, cfg);
        }

        const auto result = hammer::run_pattern(cfg, *runner, store.engine().get());
        if (server) server->stop();
        if (!socket_dir.empty()) std::filesystem::remove_all(socket_dir);

        print_summary(result);
        if (!out_path.empty()) {
            std::ofstream out(out_path);
            hammer::write_csv(out, result);
            if (!out) throw fieldstore::IoError("write " + out_path.string(), errno);
        }
        return result.ok() ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "hammer: " << e.what() << '\n';
        return 2;
    }
}
