#include "hammer/hammer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <random>

#include "fieldstore/error.h"

namespace hammer {

using fieldstore::InvalidArgument;

Pattern parse_pattern(std::string_view text) {
    if (text == "none") return Pattern::kNoContention;
    if (text == "wr") return Pattern::kWrContention;
    if (text == "repeated") return Pattern::kRepeated;
    throw InvalidArgument("unknown pattern '" + std::string(text) + "' (none, wr, repeated)");
}

Mode parse_mode(std::string_view text) {
    if (text == "write") return Mode::kWrite;
    if (text == "read") return Mode::kRead;
    if (text == "list") return Mode::kList;
    throw InvalidArgument("unknown mode '" + std::string(text) + "' (write, read, list)");
}

std::string_view to_string(Pattern pattern) noexcept {
    switch (pattern) {
        case Pattern::kNoContention: return "none";
        case Pattern::kWrContention: return "wr";
        case Pattern::kRepeated: return "repeated";
    }
    return "?";
}

std::string_view to_string(Mode mode) noexcept {
    switch (mode) {
        case Mode::kWrite: return "write";
        case Mode::kRead: return "read";
        case Mode::kList: return "list";
    }
    return "?";
}

void HammerConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw InvalidArgument(std::string(name) + " must be positive");
    };
    positive(nparams, "nparams");
    positive(nlevels, "nlevels");
    positive(nsteps, "nsteps");
    positive(nensembles, "nensembles");
    positive(sessions_per_node, "sessions");
    positive(repetitions, "reps");
    positive(ops, "ops");
    if (field_size < 1) throw InvalidArgument("field size must be at least 1 byte");
    if (pattern == Pattern::kRepeated && field_size < 2 * kVersionHeader)
        throw InvalidArgument("the repeated pattern needs fields of at least 16 bytes");
    if (pattern == Pattern::kNoContention && modes.empty()) throw InvalidArgument("no mode given");
}

Identifier identifier_template(int rep) {
    char expver[16];
    std::snprintf(expver, sizeof expver, "%04d", rep + 1);
    return Identifier{{"class", "od"},   {"stream", "enfo"}, {"expver", expver},  {"date", "20231201"},
                      {"time", "1200"},  {"type", "pf"},     {"levtype", "pl"}};
}

Identifier gen_identifier(const Identifier& tmpl, int member, int step, int param, int level) {
    Identifier id = tmpl;
    id.set("number", std::to_string(member));
    id.set("levelist", std::to_string(level));
    id.set("step", std::to_string(step));
    id.set("param", std::to_string(param));
    return id;
}

std::uint64_t fnv1a64(std::string_view data) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

void put_le64(std::byte* out, std::uint64_t v, std::size_t n = 8) {
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::byte>(v >> (8 * i));
}

std::uint64_t get_le64(const std::byte* in) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
    return v;
}

}  // namespace

std::string payload_key(const Identifier& id) {
    auto entries = id.entries();
    std::sort(entries.begin(), entries.end());
    std::string out;
    for (const auto& [k, v] : entries) out += (out.empty() ? "" : ",") + k + "=" + v;
    return out;
}

std::vector<std::byte> make_payload(const Identifier& id, std::uint64_t version, std::size_t size) {
    std::mt19937_64 rng(fnv1a64(payload_key(id) + "#" + std::to_string(version)));
    std::vector<std::byte> out(size);
    std::size_t i = 0;
    for (; i + 8 <= size; i += 8) put_le64(out.data() + i, rng());
    if (i < size) put_le64(out.data() + i, rng(), size - i);
    if (size >= kVersionHeader) put_le64(out.data(), version);
    return out;
}

std::optional<std::string> check_payload(const Identifier& id, std::span<const std::byte> data, std::size_t size,
                                         std::optional<std::uint64_t> expected_version) {
    if (data.size() != size)
        return "size " + std::to_string(data.size()) + ", expected " + std::to_string(size);
    std::uint64_t version = expected_version.value_or(0);
    if (!expected_version && size >= kVersionHeader) version = get_le64(data.data());
    const auto expected = make_payload(id, version, size);
    if (!std::equal(data.begin(), data.end(), expected.begin())) {
        const auto at = std::mismatch(data.begin(), data.end(), expected.begin()).first - data.begin();
        return "payload differs from version " + std::to_string(version) + " at byte " + std::to_string(at);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------- tasks

std::int64_t monotonic_ns() noexcept {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

namespace {

struct Grid {
    const HammerConfig& cfg;
    const Task& task;
    Identifier tmpl = identifier_template(task.repetition);

    Identifier at(int step, int param, int l) const {
        return gen_identifier(tmpl, task.member, step, param, level_of(cfg, task.session, l));
    }
    /// The k-th field of the task's first step, cycling.
    Identifier cyclic(std::uint64_t k) const {
        const auto n = static_cast<std::uint64_t>(cfg.nparams) * cfg.nlevels;
        const auto i = k % n;
        return at(task.step_first, static_cast<int>(i / cfg.nlevels) + 1, static_cast<int>(i % cfg.nlevels) + 1);
    }
    std::uint64_t cycle() const { return static_cast<std::uint64_t>(cfg.nparams) * cfg.nlevels; }
};

void note_failure(SessionResult& r, const Identifier& id, const std::string& what) {
    if (r.failures.size() < kMaxReportedFailures) r.failures.push_back(id.str() + ": " + what);
}

void read_one(fieldstore::Session& session, const HammerConfig& cfg, const Identifier& id,
              std::optional<std::uint64_t> version, SessionResult& r) {
    const auto handle = session.retrieve(id);
    ++r.ops;
    if (handle.empty()) {
        ++r.missing;
        note_failure(r, id, "missing");
        return;
    }
    const auto data = handle.read();
    r.bytes += data.size();
    if (!cfg.verify) return;
    if (auto why = check_payload(id, data, cfg.field_size, version)) {
        ++r.mismatches;
        note_failure(r, id, *why);
    }
}

void add_io(fieldstore::IoCounters::Snapshot& into, const fieldstore::IoCounters::Snapshot& s) {
    into.file_opens += s.file_opens;
    into.file_reads += s.file_reads;
    into.bytes_read += s.bytes_read;
    into.toc_reads += s.toc_reads;
    into.subtoc_reads += s.subtoc_reads;
    into.index_loads += s.index_loads;
    into.syncs += s.syncs;
    into.toc_appends += s.toc_appends;
}

void run_body(const fieldstore::FieldStore& store, const HammerConfig& cfg, const Task& task, SessionResult& r) {
    const Grid grid{cfg, task};
    switch (task.role) {
        case Role::kWrite: {
            auto session = store.session();
            r.start_ns = monotonic_ns();
            for (int step = task.step_first; step <= task.step_last; ++step) {
                for (int p = 1; p <= cfg.nparams; ++p)
                    for (int l = 1; l <= cfg.nlevels; ++l) {
                        const auto id = grid.at(step, p, l);
                        session.archive(id, make_payload(id, 0, cfg.field_size));
                        r.bytes += cfg.field_size;
                        ++r.ops;
                    }
                session.flush();
            }
            session.close();
            r.end_ns = monotonic_ns();
            r.io = session.io_counters().snapshot();
            break;
        }
        case Role::kRead: {
            auto session = store.session();
            r.start_ns = monotonic_ns();
            for (int step = task.step_first; step <= task.step_last; ++step)
                for (int p = 1; p <= cfg.nparams; ++p)
                    for (int l = 1; l <= cfg.nlevels; ++l) read_one(session, cfg, grid.at(step, p, l), 0, r);
            r.end_ns = monotonic_ns();
            r.io = session.io_counters().snapshot();
            break;
        }
        case Role::kList: {
            auto session = store.session();
            fieldstore::PartialIdentifier partial(grid.tmpl);
            partial.set("step", fieldstore::ValueSet({std::to_string(task.step_first)}));
            r.start_ns = monotonic_ns();
            const auto entries = session.list(partial);
            r.end_ns = monotonic_ns();
            r.ops = 1;
            r.listed = entries.size();
            r.io = session.io_counters().snapshot();
            const auto expected =
                static_cast<std::uint64_t>(cfg.sessions()) * cfg.nparams * cfg.nlevels;
            if (cfg.verify && r.listed != expected) {
                ++r.mismatches;
                note_failure(r, grid.tmpl,
                             "listed " + std::to_string(r.listed) + " fields, expected " + std::to_string(expected));
            }
            break;
        }
        case Role::kRewrite: {
            auto session = store.session();
            r.start_ns = monotonic_ns();
            for (std::uint64_t k = 0; k < static_cast<std::uint64_t>(cfg.ops); ++k) {
                const auto id = grid.cyclic(k);
                session.archive(id, make_payload(id, k / grid.cycle() + 1, cfg.field_size));
                session.flush();
                r.bytes += cfg.field_size;
                ++r.ops;
            }
            session.close();
            r.end_ns = monotonic_ns();
            r.io = session.io_counters().snapshot();
            break;
        }
        case Role::kReread: {
            r.start_ns = monotonic_ns();
            for (std::uint64_t k = 0; k < static_cast<std::uint64_t>(cfg.ops); ++k) {
                // A fresh session per read so each one sees the newest flushed version.
                auto session = store.session();
                read_one(session, cfg, grid.cyclic(k), std::nullopt, r);
                add_io(r.io, session.io_counters().snapshot());
            }
            r.end_ns = monotonic_ns();
            break;
        }
    }
}

}  // namespace

SessionResult run_task(const fieldstore::FieldStore& store, const HammerConfig& cfg, const Task& task) {
    SessionResult r;
    r.phase = task.phase;
    try {
        run_body(store, cfg, task, r);
    } catch (const std::exception& e) {
        r.error = e.what();
        if (r.start_ns == 0) r.start_ns = monotonic_ns();
        r.end_ns = monotonic_ns();
    }
    return r;
}

// ---------------------------------------------------------------- reports

double compute_bandwidth(std::span<const Event> events) {
    if (events.empty()) throw InvalidArgument("bandwidth of an empty event set");
    std::int64_t start = events.front().start_ns;
    std::int64_t end = events.front().end_ns;
    long double bytes = 0;
    for (const auto& e : events) {
        start = std::min(start, e.start_ns);
        end = std::max(end, e.end_ns);
        bytes += static_cast<long double>(e.bytes);
    }
    if (end <= start) throw InvalidArgument("bandwidth over a zero-length span");
    return static_cast<double>(bytes * 1e9L / static_cast<long double>(end - start));
}

bool PhaseReport::ok() const noexcept {
    return mismatches == 0 && missing == 0 &&
           std::all_of(sessions.begin(), sessions.end(), [](const auto& s) { return s.error.empty(); });
}

PhaseReport make_report(int repetition, std::string phase, std::vector<SessionResult> sessions,
                        fieldstore::EngineOpCounters engine) {
    PhaseReport rep;
    rep.repetition = repetition;
    rep.phase = std::move(phase);
    rep.engine = std::move(engine);
    std::vector<Event> events;
    for (const auto& s : sessions) {
        rep.bytes += s.bytes;
        rep.ops += s.ops;
        rep.listed += s.listed;
        rep.mismatches += s.mismatches;
        rep.missing += s.missing;
        add_io(rep.io, s.io);
        for (const auto& f : s.failures)
            if (rep.failures.size() < kMaxReportedFailures) rep.failures.push_back(f);
        if (!s.error.empty() && rep.failures.size() < kMaxReportedFailures) rep.failures.push_back(s.error);
        events.push_back({s.start_ns, s.end_ns, s.bytes});
    }
    if (!events.empty()) {
        const auto [min_start, max_start] = std::minmax_element(
            events.begin(), events.end(), [](const Event& a, const Event& b) { return a.start_ns < b.start_ns; });
        const auto max_end =
            std::max_element(events.begin(), events.end(), [](const Event& a, const Event& b) {
                return a.end_ns < b.end_ns;
            })->end_ns;
        const auto span = max_end - min_start->start_ns;
        const auto skew = max_start->start_ns - min_start->start_ns;
        rep.seconds = static_cast<double>(span) * 1e-9;
        rep.start_skew_s = static_cast<double>(skew) * 1e-9;
        rep.skew_flagged = span > 0 && skew * 10 > span;
        if (span > 0) rep.bandwidth = compute_bandwidth(events);
    }
    rep.sessions = std::move(sessions);
    return rep;
}

std::vector<Aggregate> aggregate(std::span<const PhaseReport> reports) {
    std::vector<Aggregate> out;
    std::map<std::string, std::vector<double>> samples;
    for (const auto& r : reports) {
        if (!samples.contains(r.phase)) out.push_back({r.phase});
        samples[r.phase].push_back(r.bandwidth);
    }
    for (auto& a : out) {
        const auto& xs = samples[a.phase];
        a.count = static_cast<int>(xs.size());
        double sum = 0;
        for (double x : xs) sum += x;
        a.mean = sum / a.count;
        if (a.count > 1) {
            double sq = 0;
            for (double x : xs) sq += (x - a.mean) * (x - a.mean);
            a.stddev = std::sqrt(sq / (a.count - 1));
        }
    }
    return out;
}

bool RunResult::ok() const noexcept {
    return std::all_of(phases.begin(), phases.end(), [](const auto& p) { return p.ok(); });
}

std::vector<std::vector<Task>> stages(const HammerConfig& cfg, int repetition) {
    auto per_session = [&](std::string phase, Role role, int first, int last) {
        std::vector<Task> tasks;
        for (int m = 1; m <= cfg.nensembles; ++m)
            for (int s = 0; s < cfg.sessions_per_node; ++s) tasks.push_back({phase, role, repetition, m, s, first, last});
        return tasks;
    };
    auto concat = [](std::vector<Task> a, const std::vector<Task>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };
    const int n = cfg.nsteps;
    std::vector<std::vector<Task>> out;
    switch (cfg.pattern) {
        case Pattern::kNoContention:
            for (auto mode : cfg.modes) {
                switch (mode) {
                    case Mode::kWrite: out.push_back(per_session("write", Role::kWrite, 1, n)); break;
                    case Mode::kRead: out.push_back(per_session("read", Role::kRead, 1, n)); break;
                    case Mode::kList: out.push_back({Task{"list", Role::kList, repetition, 1, 0, 1, 1}}); break;
                }
            }
            break;
        case Pattern::kWrContention:
            out.push_back(per_session("prewrite", Role::kWrite, 1, n));
            out.push_back(
                concat(per_session("write", Role::kWrite, n + 1, 2 * n), per_session("read", Role::kRead, 1, n)));
            break;
        case Pattern::kRepeated:
            out.push_back(per_session("prewrite", Role::kWrite, 1, n));
            out.push_back(concat(per_session("write", Role::kRewrite, 1, 1), per_session("read", Role::kReread, 1, 1)));
            break;
    }
    return out;
}

RunResult run_pattern(const HammerConfig& cfg, Runner& runner, fieldstore::Engine* engine) {
    cfg.validate();
    RunResult result;
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
        for (const auto& stage : stages(cfg, rep)) {
            const auto before = engine ? engine->counters_snapshot() : fieldstore::EngineOpCounters{};
            auto sessions = runner.run(stage);
            const auto delta =
                engine ? engine->counters_snapshot().since(before) : fieldstore::EngineOpCounters{};
            std::vector<std::string> order;
            std::map<std::string, std::vector<SessionResult>> by_phase;
            for (auto& s : sessions) {
                if (!by_phase.contains(s.phase)) order.push_back(s.phase);
                by_phase[s.phase].push_back(std::move(s));
            }
            for (const auto& phase : order)
                result.phases.push_back(make_report(rep, phase, std::move(by_phase[phase]), delta));
        }
    }
    result.summary = aggregate(result.phases);
    return result;
}

void write_csv(std::ostream& out, const RunResult& result) {
    out << "repetition,phase,sessions,bytes,seconds,bandwidth_bytes_per_s,start_skew_s,skew_flagged,ops,"
           "mismatches,missing,listed,kv_put,kv_get,kv_list,blob_write,blob_read,ns_create,id_alloc,"
           "file_opens,file_reads,toc_reads,subtoc_reads,index_loads,syncs,toc_appends\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return std::string(buf);
    };
    for (const auto& p : result.phases) {
        const auto& e = p.engine;
        const auto& io = p.io;
        out << p.repetition + 1 << ',' << p.phase << ',' << p.sessions.size() << ',' << p.bytes << ','
            << num(p.seconds) << ',' << num(p.bandwidth) << ',' << num(p.start_skew_s) << ','
            << (p.skew_flagged ? 1 : 0) << ',' << p.ops << ',' << p.mismatches << ',' << p.missing << ','
            << p.listed << ',' << e.kv_put << ',' << e.kv_get << ',' << e.kv_list << ',' << e.blob_write << ','
            << e.blob_read << ',' << e.ns_create << ',' << e.id_alloc << ',' << io.file_opens << ','
            << io.file_reads << ',' << io.toc_reads << ',' << io.subtoc_reads << ',' << io.index_loads << ','
            << io.syncs << ',' << io.toc_appends << '\n';
    }
    for (const auto& a : result.summary) {
        out << "mean," << a.phase << ",,,," << num(a.mean) << ",,,,,,,,,,,,,,,,,,,,\n";
        out << "stddev," << a.phase << ",,,," << num(a.stddev) << ",,,,,,,,,,,,,,,,,,,,\n";
    }
}

}  // namespace hammer
