#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fieldstore/backend.h"
#include "fieldstore/engine/engine.h"
#include "fieldstore/field_store.h"
#include "fieldstore/schema.h"

namespace hammer {

using fieldstore::Identifier;

enum class Pattern { kNoContention, kWrContention, kRepeated };
enum class Mode { kWrite, kRead, kList };

Pattern parse_pattern(std::string_view text);
Mode parse_mode(std::string_view text);
std::string_view to_string(Pattern pattern) noexcept;
std::string_view to_string(Mode mode) noexcept;

struct HammerConfig {
    int nparams = 4;
    int nlevels = 4;
    int nsteps = 5;
    int nensembles = 2;
    /// Writer (and reader) sessions per ensemble member.
    int sessions_per_node = 1;
    std::size_t field_size = 1u << 20;
    Pattern pattern = Pattern::kNoContention;
    /// Phases run in order under the NO_CONTENTION pattern. Ignored by the others.
    std::vector<Mode> modes{Mode::kWrite, Mode::kRead};
    bool verify = false;
    int repetitions = 3;
    /// Operations per session in the contended part of the REPEATED pattern.
    int ops = 100;

    /// Throws fieldstore::InvalidArgument.
    void validate() const;
    int sessions() const noexcept { return nensembles * sessions_per_node; }
    std::uint64_t fields_per_session() const noexcept {
        return static_cast<std::uint64_t>(nsteps) * nparams * nlevels;
    }
};

/// Identifier template of repetition `rep` (0-based): every keyword except
/// number, levelist, step and param. Each repetition gets its own expver.
Identifier identifier_template(int rep);

/// Fills in the varying keywords. All indices are 1-based.
Identifier gen_identifier(const Identifier& tmpl, int member, int step, int param, int level);

/// Global level of level `l` written by session `session` (0-based) of a node.
inline int level_of(const HammerConfig& cfg, int session, int l) { return session * cfg.nlevels + l; }

std::uint64_t fnv1a64(std::string_view data) noexcept;

/// Payloads of at least this many bytes start with the version as a
/// little-endian u64.
inline constexpr std::size_t kVersionHeader = 8;

/// `k=v,k=v` with keywords sorted, so equal identifiers give equal keys
/// whatever their entry order.
std::string payload_key(const Identifier& id);

/// Pseudo-random bytes seeded by fnv1a64(payload_key + "#" + version).
std::vector<std::byte> make_payload(const Identifier& id, std::uint64_t version, std::size_t size);

/// Empty when `data` is exactly the payload of `id` at `expected_version`, or
/// at the version found in its header when `expected_version` is empty.
/// Otherwise a description of the mismatch.
std::optional<std::string> check_payload(const Identifier& id, std::span<const std::byte> data, std::size_t size,
                                         std::optional<std::uint64_t> expected_version);

// ---------------------------------------------------------------- tasks

enum class Role { kWrite, kRead, kList, kRewrite, kReread };

/// Work of one session. A writer session (member, session) covers steps
/// [step_first, step_last] of its own levels; its reader counterpart reads the
/// same grid.
struct Task {
    std::string phase;
    Role role = Role::kWrite;
    int repetition = 0;
    int member = 1;
    int session = 0;
    int step_first = 1;
    int step_last = 1;
};

struct SessionResult {
    std::string phase;
    std::int64_t start_ns = 0;
    std::int64_t end_ns = 0;
    std::uint64_t bytes = 0;
    std::uint64_t ops = 0;
    std::uint64_t listed = 0;
    std::uint64_t mismatches = 0;
    std::uint64_t missing = 0;
    /// First few failures, each naming the identifier.
    std::vector<std::string> failures;
    /// Backend error that aborted the session.
    std::string error;
    fieldstore::IoCounters::Snapshot io;

    bool ok() const noexcept { return error.empty() && mismatches == 0 && missing == 0; }
};

inline constexpr std::size_t kMaxReportedFailures = 10;

std::int64_t monotonic_ns() noexcept;

SessionResult run_task(const fieldstore::FieldStore& store, const HammerConfig& cfg, const Task& task);

/// Runs a set of tasks concurrently, starting them together.
class Runner {
public:
    virtual ~Runner() = default;
    virtual std::vector<SessionResult> run(const std::vector<Task>& tasks) = 0;
};

/// One thread per task, all sharing `store`.
class ThreadRunner final : public Runner {
public:
    ThreadRunner(fieldstore::FieldStore store, HammerConfig cfg) : store_(std::move(store)), cfg_(std::move(cfg)) {}
    std::vector<SessionResult> run(const std::vector<Task>& tasks) override;

private:
    fieldstore::FieldStore store_;
    HammerConfig cfg_;
};

/// One worker process per task: `exe --worker <json>`.
class ProcessRunner final : public Runner {
public:
    ProcessRunner(std::filesystem::path exe, std::filesystem::path store_config,
                  std::optional<std::filesystem::path> engine_socket, HammerConfig cfg)
        : exe_(std::move(exe)),
          store_config_(std::move(store_config)),
          engine_socket_(std::move(engine_socket)),
          cfg_(std::move(cfg)) {}
    std::vector<SessionResult> run(const std::vector<Task>& tasks) override;

private:
    std::filesystem::path exe_;
    std::filesystem::path store_config_;
    std::optional<std::filesystem::path> engine_socket_;
    HammerConfig cfg_;
};

/// Entry point of a worker process. Prints "ready", waits for one byte on
/// stdin, runs the task and prints the result as one JSON line.
int worker_main(const std::string& request_json);

// ---------------------------------------------------------------- reports

struct Event {
    std::int64_t start_ns = 0;
    std::int64_t end_ns = 0;
    std::uint64_t bytes = 0;
};

/// Σbytes / (max end − min start), in bytes per second. Throws
/// fieldstore::InvalidArgument for an empty set or a zero or negative span.
double compute_bandwidth(std::span<const Event> events);

struct PhaseReport {
    int repetition = 0;
    std::string phase;
    std::vector<SessionResult> sessions;
    std::uint64_t bytes = 0;
    std::uint64_t ops = 0;
    std::uint64_t listed = 0;
    std::uint64_t mismatches = 0;
    std::uint64_t missing = 0;
    double seconds = 0;
    double bandwidth = 0;
    double start_skew_s = 0;
    /// Start skew above 10% of the phase span.
    bool skew_flagged = false;
    /// Engine operations issued while the phase's stage ran. Phases that run
    /// together share one stage.
    fieldstore::EngineOpCounters engine;
    fieldstore::IoCounters::Snapshot io;
    std::vector<std::string> failures;

    bool ok() const noexcept;
};

PhaseReport make_report(int repetition, std::string phase, std::vector<SessionResult> sessions,
                        fieldstore::EngineOpCounters engine = {});

struct Aggregate {
    std::string phase;
    int count = 0;
    double mean = 0;
    /// Sample standard deviation; 0 for a single repetition.
    double stddev = 0;
};

/// Bandwidth mean and standard deviation per phase, in first-seen phase order.
std::vector<Aggregate> aggregate(std::span<const PhaseReport> reports);

struct RunResult {
    std::vector<PhaseReport> phases;
    std::vector<Aggregate> summary;
    bool ok() const noexcept;
};

/// Runs every repetition of `cfg.pattern`. `engine`, when given, supplies the
/// counter deltas.
RunResult run_pattern(const HammerConfig& cfg, Runner& runner, fieldstore::Engine* engine = nullptr);

/// Tasks of one concurrently-running stage.
std::vector<std::vector<Task>> stages(const HammerConfig& cfg, int repetition);

void write_csv(std::ostream& out, const RunResult& result);

}  // namespace hammer
