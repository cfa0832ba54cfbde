#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <iostream>
#include <latch>
#include <nlohmann/json.hpp>
#include <thread>

#include "fieldstore/config.h"
#include "fieldstore/error.h"
#include "fieldstore/posix.h"
#include "hammer/hammer.h"

extern char** environ;

namespace hammer {

using nlohmann::json;

// ---------------------------------------------------------------- json

void to_json(json& j, const Task& t) {
    j = {{"phase", t.phase},     {"role", static_cast<int>(t.role)}, {"repetition", t.repetition},
         {"member", t.member},   {"session", t.session},             {"step_first", t.step_first},
         {"step_last", t.step_last}};
}

void from_json(const json& j, Task& t) {
    t.phase = j.at("phase").get<std::string>();
    t.role = static_cast<Role>(j.at("role").get<int>());
    j.at("repetition").get_to(t.repetition);
    j.at("member").get_to(t.member);
    j.at("session").get_to(t.session);
    j.at("step_first").get_to(t.step_first);
    j.at("step_last").get_to(t.step_last);
}

void to_json(json& j, const HammerConfig& c) {
    j = {{"nparams", c.nparams},       {"nlevels", c.nlevels}, {"nsteps", c.nsteps},
         {"nensembles", c.nensembles}, {"sessions", c.sessions_per_node},
         {"field_size", c.field_size}, {"verify", c.verify},   {"ops", c.ops}};
}

void from_json(const json& j, HammerConfig& c) {
    j.at("nparams").get_to(c.nparams);
    j.at("nlevels").get_to(c.nlevels);
    j.at("nsteps").get_to(c.nsteps);
    j.at("nensembles").get_to(c.nensembles);
    j.at("sessions").get_to(c.sessions_per_node);
    j.at("field_size").get_to(c.field_size);
    j.at("verify").get_to(c.verify);
    j.at("ops").get_to(c.ops);
}

void to_json(json& j, const SessionResult& r) {
    const auto& io = r.io;
    j = {{"phase", r.phase},
         {"start_ns", r.start_ns},
         {"end_ns", r.end_ns},
         {"bytes", r.bytes},
         {"ops", r.ops},
         {"listed", r.listed},
         {"mismatches", r.mismatches},
         {"missing", r.missing},
         {"failures", r.failures},
         {"error", r.error},
         {"io",
          {io.file_opens, io.file_reads, io.bytes_read, io.toc_reads, io.subtoc_reads, io.index_loads, io.syncs,
           io.toc_appends}}};
}

void from_json(const json& j, SessionResult& r) {
    r.phase = j.at("phase").get<std::string>();
    j.at("start_ns").get_to(r.start_ns);
    j.at("end_ns").get_to(r.end_ns);
    j.at("bytes").get_to(r.bytes);
    j.at("ops").get_to(r.ops);
    j.at("listed").get_to(r.listed);
    j.at("mismatches").get_to(r.mismatches);
    j.at("missing").get_to(r.missing);
    j.at("failures").get_to(r.failures);
    j.at("error").get_to(r.error);
    const auto& io = j.at("io");
    auto& s = r.io;
    for (auto [i, field] : {std::pair{0, &s.file_opens}, {1, &s.file_reads}, {2, &s.bytes_read}, {3, &s.toc_reads},
                            {4, &s.subtoc_reads}, {5, &s.index_loads}, {6, &s.syncs}, {7, &s.toc_appends}})
        *field = io.at(i).get<std::uint64_t>();
}

// ---------------------------------------------------------------- threads

std::vector<SessionResult> ThreadRunner::run(const std::vector<Task>& tasks) {
    std::vector<SessionResult> results(tasks.size());
    std::latch start(static_cast<std::ptrdiff_t>(tasks.size()));
    std::vector<std::jthread> threads;
    threads.reserve(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        threads.emplace_back([&, i] {
            start.arrive_and_wait();
            results[i] = run_task(store_, cfg_, tasks[i]);
        });
    }
    threads.clear();
    return results;
}

// ---------------------------------------------------------------- processes

namespace {

class LineReader {
public:
    explicit LineReader(int fd) : fd_(fd) {}

    /// Next line without its newline; empty optional at EOF.
    std::optional<std::string> next() {
        for (;;) {
            if (auto nl = buf_.find('\n'); nl != std::string::npos) {
                auto line = buf_.substr(0, nl);
                buf_.erase(0, nl + 1);
                return line;
            }
            char chunk[4096];
            const auto n = ::read(fd_, chunk, sizeof chunk);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) return std::nullopt;
            buf_.append(chunk, static_cast<std::size_t>(n));
        }
    }

private:
    int fd_;
    std::string buf_;
};

struct Child {
    pid_t pid = -1;
    fieldstore::UniqueFd to_child;
    fieldstore::UniqueFd from_child;
};

std::pair<fieldstore::UniqueFd, fieldstore::UniqueFd> make_pipe() {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) throw fieldstore::IoError("pipe", errno);
    return {fieldstore::UniqueFd(fds[0]), fieldstore::UniqueFd(fds[1])};
}

Child spawn(const std::filesystem::path& exe, const std::string& request) {
    auto [child_in, to_child] = make_pipe();
    auto [from_child, child_out] = make_pipe();
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, child_in.get(), STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, child_out.get(), STDOUT_FILENO);
    const std::string path = exe.string();
    std::vector<char*> argv{const_cast<char*>(path.c_str()), const_cast<char*>("--worker"),
                            const_cast<char*>(request.c_str()), nullptr};
    Child child;
    const int rc = ::posix_spawn(&child.pid, path.c_str(), &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) throw fieldstore::IoError("spawn " + path, rc);
    child.to_child = std::move(to_child);
    child.from_child = std::move(from_child);
    return child;
}

SessionResult failed(const Task& task, std::string why) {
    SessionResult r;
    r.phase = task.phase;
    r.start_ns = r.end_ns = monotonic_ns();
    r.error = std::move(why);
    return r;
}

}  // namespace

std::vector<SessionResult> ProcessRunner::run(const std::vector<Task>& tasks) {
    ::signal(SIGPIPE, SIG_IGN);
    std::vector<Child> children;
    std::vector<LineReader> readers;
    std::vector<SessionResult> results(tasks.size());
    std::vector<bool> alive(tasks.size(), false);
    children.reserve(tasks.size());
    readers.reserve(tasks.size());

    for (const auto& task : tasks) {
        json request = {{"config", cfg_}, {"task", task}, {"store", store_config_.string()}};
        if (engine_socket_) request["engine_socket"] = engine_socket_->string();
        children.push_back(spawn(exe_, request.dump()));
        readers.emplace_back(children.back().from_child.get());
    }
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto line = readers[i].next();
        alive[i] = line && *line == "ready";
        if (!alive[i]) results[i] = failed(tasks[i], "worker did not start: " + line.value_or("<eof>"));
    }
    const std::byte go{'g'};
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (!alive[i]) continue;
        try {
            fieldstore::posix::write_all(children[i].to_child.get(), std::span(&go, 1));
        } catch (const std::exception& e) {
            alive[i] = false;
            results[i] = failed(tasks[i], e.what());
        }
    }
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (alive[i]) {
            const auto line = readers[i].next();
            if (!line) {
                results[i] = failed(tasks[i], "worker exited without a result");
            } else {
                try {
                    results[i] = json::parse(*line).get<SessionResult>();
                } catch (const std::exception& e) {
                    results[i] = failed(tasks[i], std::string("bad worker result: ") + e.what());
                }
            }
        }
        children[i].to_child.reset();
        int status = 0;
        while (::waitpid(children[i].pid, &status, 0) < 0 && errno == EINTR) {
        }
        if (results[i].error.empty() && !(WIFEXITED(status) && WEXITSTATUS(status) == 0))
            results[i].error = "worker exited with status " + std::to_string(status);
    }
    return results;
}

int worker_main(const std::string& request_json) {
    try {
        const auto request = json::parse(request_json);
        const auto cfg = request.at("config").get<HammerConfig>();
        const auto task = request.at("task").get<Task>();
        auto store_cfg = fieldstore::StoreConfig::load(request.at("store").get<std::string>());
        if (request.contains("engine_socket")) store_cfg.engine_socket = request["engine_socket"].get<std::string>();
        const auto store = fieldstore::FieldStore::open(store_cfg);

        std::cout << "ready" << std::endl;
        char go = 0;
        if (::read(STDIN_FILENO, &go, 1) != 1) return 3;
        const json result = run_task(store, cfg, task);
        std::cout << result.dump() << std::endl;
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "hammer worker: " << e.what() << '\n';
        std::cout << "error: " << e.what() << std::endl;
        return 2;
    }
}

}  // namespace hammer
