// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <barrier>
#include <boost/multiprecision/cpp_int.hpp>
#include <cfloat>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "fieldstore/config.h"
#include "fieldstore/engine/local_engine.h"
#include "fieldstore/error.h"
#include "fieldstore/field_store.h"
#include "fieldstore/fs/fs_backend.h"
#include "fieldstore/fs/toc.h"
#include "fieldstore/obj/obj_backend.h"
#include "fieldstore/posix.h"
#include "hammer/hammer.h"
#include "test_support.h"

namespace {

using namespace fieldstore;
using fieldstore::testing::TempDir;
namespace stdfs = std::filesystem;

struct Outcome {
    bool pass = false;
    std::string detail;
};

Outcome pass(std::string detail) { return {true, std::move(detail)}; }
Outcome fail(std::string detail) { return {false, std::move(detail)}; }

std::filesystem::path g_hammer;

std::string bytes_str(const std::vector<std::byte>& b) { return {reinterpret_cast<const char*>(b.data()), b.size()}; }

std::vector<std::byte> to_bytes(std::string_view s) {
    const auto* p = reinterpret_cast<const std::byte*>(s.data());
    return {p, p + s.size()};
}

FieldStore fs_store(std::string_view schema_text, const stdfs::path& root, std::size_t buffer = 8u << 20) {
    auto schema = std::make_shared<const Schema>(Schema::parse(schema_text));
    return FieldStore(*schema, std::make_shared<fsb::FsBackend>(schema, fsb::FsOptions{root, buffer, {}}),
                      BackendKind::kFs);
}

FieldStore obj_store(std::string_view schema_text, std::shared_ptr<Engine> engine) {
    auto schema = std::make_shared<const Schema>(Schema::parse(schema_text));
    return FieldStore(*schema, std::make_shared<objb::ObjBackend>(schema, engine), BackendKind::kObj, engine);
}

ValueSet one(std::string value) { return ValueSet(std::vector<std::string>{std::move(value)}); }

void write_file(const stdfs::path& path, std::string_view text) { std::ofstream(path) << text; }

std::vector<std::byte> read_file(const stdfs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::string s((std::istreambuf_iterator<char>(in)), {});
    return to_bytes(s);
}

/// Runs hammer with `args`; output goes to `log`. Returns the exit status.
int run_hammer(const std::string& args, const stdfs::path& log) {
    const auto cmd = "'" + g_hammer.string() + "' " + args + " >'" + log.string() + "' 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : 128;
}

std::string tail_of(const stdfs::path& log) {
    std::ifstream in(log);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    std::string out;
    for (std::size_t i = lines.size() > 3 ? lines.size() - 3 : 0; i < lines.size(); ++i) out += " | " + lines[i];
    return out;
}

using CsvRow = std::map<std::string, std::string>;

std::vector<CsvRow> read_csv(const stdfs::path& path) {
    std::ifstream in(path);
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    };
    std::string line;
    std::getline(in, line);
    const auto header = split(line);
    std::vector<CsvRow> rows;
    while (std::getline(in, line)) {
        const auto cells = split(line);
        CsvRow row;
        for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------- 1

Outcome contention_consistency() {
    TempDir dir;
    write_file(dir / "schema.default", fieldstore::testing::kDefaultSchema);
    write_file(dir / "schema.contention", fieldstore::testing::kContentionSchema);
    write_file(dir / "fs.conf", "backend = fs\nschema = schema.default\nroot = fsroot\n");
    write_file(dir / "obj.conf", "backend = obj\nschema = schema.contention\nroot = objroot\nengine = durable\n");

    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    std::uint64_t reads = 0;
    for (const std::string backend : {"fs", "obj"}) {
        const auto csv = dir / (backend + ".csv");
        const auto log = dir / (backend + ".log");
        const int rc = run_hammer("--pattern wr --nensembles 2 --sessions 2 --nsteps 5 --nparams 4 --nlevels 4 "
                                  "--field-size 65536 --verify --reps 10 --config '" +
                                      (dir / (backend + ".conf")).string() + "' --out '" + csv.string() + "'",
                                  log);
        if (rc != 0) return fail(backend + ": hammer exited " + std::to_string(rc) + tail_of(log));
        std::uint64_t mismatches = 0, missing = 0, phases = 0;
        for (const auto& row : read_csv(csv)) {
            if (row.at("repetition") == "mean" || row.at("repetition") == "stddev") continue;
            ++phases;
            mismatches += std::stoull(row.at("mismatches"));
            missing += std::stoull(row.at("missing"));
            if (row.at("phase") == "read") reads += std::stoull(row.at("ops"));
            if (row.at("sessions") != "4") return fail(backend + ": phase with " + row.at("sessions") + " sessions");
        }
        if (phases != 30) return fail(backend + ": expected 30 phase rows, got " + std::to_string(phases));
        if (mismatches || missing)
            return fail(backend + ": " + std::to_string(mismatches) + " mismatches, " + std::to_string(missing) +
                        " missing");
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[160];
    std::snprintf(buf, sizeof buf, "%llu verified reads over fs+obj, 0 mismatches, %.1f s",
                  static_cast<unsigned long long>(reads), secs);
    if (reads != 2ull * 10 * 4 * 80) return fail(std::string("unexpected read count: ") + buf);
    if (secs >= 60) return fail(std::string("too slow: ") + buf);
    return pass(buf);
}

// ---------------------------------------------------------------- 2, 3

constexpr std::string_view kTraceSchema =
    "dataset: class,expver\n"
    "collocation: type\n"
    "element: step,param\n";

const std::vector<std::string> kExpvers{"0001", "0002"};
const std::vector<std::string> kTypes{"an", "fc"};
const std::vector<std::string> kSteps{"1", "2", "3"};
const std::vector<std::string> kParams{"t", "u"};

Identifier trace_id(const std::string& expver, const std::string& type, const std::string& step,
                    const std::string& param) {
    return Identifier{{"class", "od"}, {"expver", expver}, {"type", type}, {"step", step}, {"param", param}};
}

std::vector<Identifier> all_trace_ids() {
    std::vector<Identifier> out;
    for (const auto& e : kExpvers)
        for (const auto& t : kTypes)
            for (const auto& s : kSteps)
                for (const auto& p : kParams) out.push_back(trace_id(e, t, s, p));
    return out;
}

struct TraceOp {
    enum Kind { kArchive, kFlush, kRetrieve, kList, kClose } kind;
    std::vector<Identifier> ids;  // archive: one; retrieve: query
    std::vector<std::byte> data;
    Merge merge = Merge::kYes;
    PartialIdentifier partial;
};

std::vector<TraceOp> make_trace(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto pick = [&](const auto& v) { return v[rng() % v.size()]; };
    auto random_id = [&] { return trace_id(pick(kExpvers), pick(kTypes), pick(kSteps), pick(kParams)); };
    auto value_set = [&](const std::vector<std::string>& domain) -> std::optional<ValueSet> {
        switch (rng() % 4) {
            case 0: return std::nullopt;
            case 1: return ValueSet::any();
            case 2: return one(pick(domain));
            default: return ValueSet(domain);
        }
    };
    std::vector<TraceOp> ops(1 + rng() % 50);
    for (auto& op : ops) {
        const auto r = rng() % 100;
        if (r < 40) {
            op.kind = TraceOp::kArchive;
            op.ids = {random_id()};
            std::vector<std::byte> data(1 + rng() % 64);
            for (auto& b : data) b = static_cast<std::byte>(rng());
            op.data = std::move(data);
        } else if (r < 55) {
            op.kind = TraceOp::kFlush;
        } else if (r < 75) {
            op.kind = TraceOp::kRetrieve;
            for (auto n = 1 + rng() % 3; n > 0; --n) op.ids.push_back(random_id());
            op.merge = rng() % 2 ? Merge::kYes : Merge::kNo;
        } else if (r < 90) {
            op.kind = TraceOp::kList;
            op.partial.set("class", one("od"));
            op.partial.set("expver", one(pick(kExpvers)));
            if (auto v = value_set(kTypes)) op.partial.set("type", *v);
            if (auto v = value_set(kSteps)) op.partial.set("step", *v);
            if (auto v = value_set(kParams)) op.partial.set("param", *v);
        } else {
            op.kind = TraceOp::kClose;
        }
    }
    return ops;
}

/// Naive model: canonical id -> bytes, with archives held back until flush
/// when `visible_at_flush`.
class Oracle {
public:
    explicit Oracle(bool visible_at_flush) : at_flush_(visible_at_flush) {}

    void archive(const Identifier& id, const std::vector<std::byte>& data) {
        (at_flush_ ? pending_ : visible_)[id.str()] = {id, data};
        if (at_flush_) order_.push_back(id.str());
    }
    void flush() {
        for (const auto& k : order_) visible_[k] = pending_[k];
        order_.clear();
        pending_.clear();
    }
    std::string retrieve(const std::vector<Identifier>& ids) const {
        std::string out;
        for (const auto& id : ids)
            if (auto it = visible_.find(id.str()); it != visible_.end()) out += bytes_str(it->second.second);
        return out;
    }
    std::string list(const PartialIdentifier& partial) const {
        std::string out;
        for (const auto& [key, entry] : visible_)
            if (partial.matches(entry.first)) out += key + "\n";
        return out;
    }

private:
    bool at_flush_;
    std::map<std::string, std::pair<Identifier, std::vector<std::byte>>> visible_;
    std::map<std::string, std::pair<Identifier, std::vector<std::byte>>> pending_;
    std::vector<std::string> order_;
};

std::string observe_list(FieldStore& store, const PartialIdentifier& partial) {
    auto reader = store.session();
    std::vector<std::string> keys;
    for (const auto& e : reader.list(partial)) keys.push_back(e.identifier.str());
    std::sort(keys.begin(), keys.end());
    std::string out;
    for (const auto& k : keys) out += k + "\n";
    return out;
}

std::string observe_retrieve(FieldStore& store, const std::vector<Identifier>& ids, Merge merge) {
    auto reader = store.session();
    return bytes_str(reader.retrieve(ids, merge).read());
}

struct TraceRun {
    std::vector<std::string> observed;
    std::vector<std::string> expected;
};

/// Replays `ops` with one writer session; every read uses a fresh reader session.
TraceRun replay(FieldStore& store, bool visible_at_flush, const std::vector<TraceOp>& ops) {
    TraceRun run;
    Oracle oracle(visible_at_flush);
    auto writer = store.session();
    auto record = [&](std::string got, std::string want) {
        run.observed.push_back(std::move(got));
        run.expected.push_back(std::move(want));
    };
    for (const auto& op : ops) {
        switch (op.kind) {
            case TraceOp::kArchive:
                writer.archive(op.ids.front(), op.data);
                oracle.archive(op.ids.front(), op.data);
                break;
            case TraceOp::kFlush:
                writer.flush();
                oracle.flush();
                break;
            case TraceOp::kClose:
                writer.close();
                oracle.flush();
                break;
            case TraceOp::kRetrieve:
                record(observe_retrieve(store, op.ids, op.merge), oracle.retrieve(op.ids));
                break;
            case TraceOp::kList:
                record(observe_list(store, op.partial), oracle.list(op.partial));
                break;
        }
    }
    writer.close();
    oracle.flush();
    // Settled state: everything, one field at a time, then per-dataset listings.
    for (const auto& id : all_trace_ids()) record(observe_retrieve(store, {id}, Merge::kYes), oracle.retrieve({id}));
    for (const auto& e : kExpvers) {
        PartialIdentifier all;
        all.set("class", one("od"));
        all.set("expver", one(e));
        record(observe_list(store, all), oracle.list(all));
    }
    return run;
}

struct TraceResults {
    int traces = 0;
    std::uint64_t reads = 0;
    std::uint64_t comparable = 0;
    std::string equivalence_failure;
    std::string oracle_failure;
};

const TraceResults& trace_results() {
    static const TraceResults results = [] {
        TraceResults r;
        for (int t = 0; t < 200; ++t) {
            const auto ops = make_trace(0x5eed0000 + t);
            TempDir dir;
            auto fs_s = fs_store(kTraceSchema, dir / "fs");
            auto obj_s = obj_store(kTraceSchema, LocalEngine::in_memory());
            const auto f = replay(fs_s, true, ops);
            const auto o = replay(obj_s, false, ops);
            ++r.traces;
            r.reads += f.observed.size();
            for (std::size_t i = 0; i < f.observed.size(); ++i) {
                if (r.oracle_failure.empty() && f.observed[i] != f.expected[i])
                    r.oracle_failure = "trace " + std::to_string(t) + " read " + std::to_string(i) + " (fs)";
                if (r.oracle_failure.empty() && o.observed[i] != o.expected[i])
                    r.oracle_failure = "trace " + std::to_string(t) + " read " + std::to_string(i) + " (obj)";
                if (f.expected[i] != o.expected[i]) continue;  // visibility rules differ here
                ++r.comparable;
                if (r.equivalence_failure.empty() && f.observed[i] != o.observed[i])
                    r.equivalence_failure = "trace " + std::to_string(t) + " read " + std::to_string(i);
            }
        }
        return r;
    }();
    return results;
}

Outcome backend_equivalence() {
    const auto& r = trace_results();
    if (!r.equivalence_failure.empty()) return fail("fs and obj differ at " + r.equivalence_failure);
    return pass(std::to_string(r.traces) + " traces, " + std::to_string(r.comparable) +
                " reads compared across backends (of " + std::to_string(r.reads) + ")");
}

Outcome oracle_equivalence() {
    const auto& r = trace_results();
    if (!r.oracle_failure.empty()) return fail("oracle disagrees at " + r.oracle_failure);
    return pass(std::to_string(r.traces) + " traces, " + std::to_string(2 * r.reads) +
                " reads equal the in-memory oracle on both backends");
}

// ---------------------------------------------------------------- 4

Outcome toc_atomicity() {
    TempDir dir;
    auto store = fs_store(kTraceSchema, dir / "root");
    constexpr int kSessions = 16;
    for (int rep = 0; rep < 100; ++rep) {
        char expver[8];
        std::snprintf(expver, sizeof expver, "%04d", rep + 1);
        std::vector<Session> sessions;
        for (int i = 0; i < kSessions; ++i) {
            sessions.push_back(store.session());
            sessions.back().archive(trace_id(expver, "fc", std::to_string(i), "t"), to_bytes("x"));
        }
        std::barrier sync(kSessions);
        std::vector<std::string> errors(kSessions);
        {
            std::vector<std::jthread> threads;
            for (int i = 0; i < kSessions; ++i)
                threads.emplace_back([&, i] {
                    sync.arrive_and_wait();
                    try {
                        sessions[i].flush();
                    } catch (const std::exception& e) {
                        errors[i] = e.what();
                    }
                });
        }
        for (const auto& e : errors)
            if (!e.empty()) return fail("rep " + std::to_string(rep) + ": " + e);
        const auto toc = read_file(dir / "root" / ("class=od,expver=" + std::string(expver)) / "toc");
        const auto parsed = fsb::parse_toc(toc);
        int ptrs = 0, inits = 0;
        std::set<std::string> files;
        for (const auto& r : parsed.records) {
            if (r.kind == fsb::TocKind::kSubtocPtr) {
                ++ptrs;
                files.insert(r.name);
            }
            if (r.kind == fsb::TocKind::kInit) ++inits;
        }
        if (parsed.incomplete_tail != 0 || ptrs != kSessions || inits != 1 ||
            files.size() != static_cast<std::size_t>(kSessions) || parsed.records.size() != kSessions + 1u)
            return fail("rep " + std::to_string(rep) + ": " + std::to_string(ptrs) + " pointers, " +
                        std::to_string(files.size()) + " distinct, tail " + std::to_string(parsed.incomplete_tail));
    }
    return pass("100 repetitions, TOC always held INIT + 16 intact distinct SUBTOC_PTR records");
}

// ---------------------------------------------------------------- 5

std::string hex(const std::vector<std::byte>& data) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    for (auto b : data) {
        out += kDigits[static_cast<unsigned>(b) >> 4];
        out += kDigits[static_cast<unsigned>(b) & 15];
    }
    return out;
}

std::string snapshot(FieldStore& store) {
    std::string out;
    for (const auto& e : kExpvers) {
        PartialIdentifier all;
        all.set("class", one("od"));
        all.set("expver", one(e));
        auto reader = store.session();
        auto entries = reader.list(all);
        for (const auto& entry : entries)
            out += entry.identifier.str() + " " + hex(reader.retrieve(entry.identifier).read()) + "\n";
    }
    return out;
}

Outcome masking_neutrality() {
    std::uint64_t fields = 0;
    for (int t = 0; t < 100; ++t) {
        std::mt19937_64 rng(0xa5a50000 + t);
        TempDir dir;
        auto store = fs_store(kTraceSchema, dir / "root");
        std::vector<Session> writers;
        for (auto n = 1 + rng() % 3; n > 0; --n) writers.push_back(store.session());
        const auto ops = make_trace(rng());
        writers[0].archive(trace_id("0001", "an", "1", "t"), to_bytes("seed"));
        for (const auto& op : ops) {
            auto& w = writers[rng() % writers.size()];
            if (op.kind == TraceOp::kArchive) w.archive(op.ids.front(), op.data);
            if (op.kind == TraceOp::kFlush) w.flush();
        }
        for (auto& w : writers) w.flush();
        const auto before = snapshot(store);
        for (auto& w : writers) w.close();
        const auto after = snapshot(store);
        if (before != after) return fail("trace " + std::to_string(t) + ": listing changed across close");
        fields += std::count(before.begin(), before.end(), '\n');

        auto reader = store.session();
        PartialIdentifier ds;
        ds.set("class", one("od"));
        ds.set("expver", one("0001"));
        reader.list(ds);
        const auto io = reader.io_counters().snapshot();
        if (io.toc_reads != 1 || io.subtoc_reads != 0)
            return fail("trace " + std::to_string(t) + ": post-close preload read " + std::to_string(io.toc_reads) +
                        " TOCs and " + std::to_string(io.subtoc_reads) + " sub-TOCs");
    }
    return pass("100 traces (" + std::to_string(fields) +
                " fields) list identically before and after close; post-close preload = 1 TOC read, 0 sub-TOC reads");
}

// ---------------------------------------------------------------- 6

Outcome handle_merge_bound() {
    TempDir dir;
    auto store = fs_store(fieldstore::testing::kDefaultSchema, dir / "root");
    std::vector<Identifier> ids;
    std::string expected;
    {
        auto w = store.session();
        const auto tmpl = hammer::identifier_template(0);
        for (int i = 1; i <= 50; ++i) {
            ids.push_back(hammer::gen_identifier(tmpl, 1, i, 1, 1));
            const auto data = hammer::make_payload(ids.back(), 0, 1u << 20);
            expected += bytes_str(data);
            w.archive(ids.back(), data);
        }
        w.close();
    }
    auto measure = [&](Merge merge) {
        auto r = store.session();
        const auto handle = r.retrieve(ids, merge);
        r.io_counters().reset();
        const auto data = handle.read();
        return std::make_tuple(r.io_counters().snapshot(), handle.segments().size(), bytes_str(data) == expected);
    };
    const auto [merged, merged_segments, merged_ok] = measure(Merge::kYes);
    const auto [plain, plain_segments, plain_ok] = measure(Merge::kNo);
    const auto detail = "merged: " + std::to_string(merged.file_opens) + " open, " +
                        std::to_string(merged.file_reads) + " read, " + std::to_string(merged_segments) +
                        " segment; unmerged: " + std::to_string(plain.file_reads) + " reads";
    if (!merged_ok || !plain_ok) return fail("bytes differ; " + detail);
    if (merged.file_opens != 1 || merged.file_reads != 1 || merged_segments != 1 || plain.file_reads != 50)
        return fail(detail);
    return pass(detail);
}

// ---------------------------------------------------------------- 7

Outcome object_visibility() {
    TempDir dir;
    auto engine = LocalEngine::open(dir / "engine");
    auto store = obj_store(fieldstore::testing::kDefaultSchema, engine);
    auto writer = store.session();
    const auto tmpl = hammer::identifier_template(0);
    int failures = 0;
    std::string first;
    for (int i = 0; i < 1000; ++i) {
        const auto id = hammer::gen_identifier(tmpl, 1 + i % 5, 1 + i / 50, 1 + i % 10, 1);
        const auto data = hammer::make_payload(id, static_cast<std::uint64_t>(i), 64 + i % 200);
        writer.archive(id, data);
        std::jthread reader([&] {
            auto r = store.session();
            const auto got = r.retrieve(id).read();
            if (got != data) {
                ++failures;
                if (first.empty()) first = id.str();
            }
        });
    }
    const auto before = engine->counters_snapshot();
    writer.flush();
    writer.close();
    const auto ops = engine->counters_snapshot().since(before).total();
    if (failures) return fail(std::to_string(failures) + " of 1000 reads failed, first " + first);
    if (ops != 0) return fail("flush+close issued " + std::to_string(ops) + " engine ops");
    return pass("1000 of 1000 pre-flush reads bit-exact from a second session; flush+close issued 0 engine ops");
}

// ---------------------------------------------------------------- 8

/// Forwards to another engine, counting puts per key-value object.
class PutCountingEngine final : public Engine {
public:
    explicit PutCountingEngine(std::shared_ptr<Engine> inner) : inner_(std::move(inner)) {}

    bool ns_create_if_absent(const std::string& ns) override { return inner_->ns_create_if_absent(ns); }
    bool ns_exists(const std::string& ns) override { return inner_->ns_exists(ns); }
    void kv_put(const KvRef& kv, std::string_view key, std::string_view value, std::uint64_t writer) override {
        inner_->kv_put(kv, key, value, writer);
        std::lock_guard lock(mu_);
        ++puts_[kv];
    }
    std::optional<std::string> kv_get(const KvRef& kv, std::string_view key) override {
        return inner_->kv_get(kv, key);
    }
    std::vector<std::string> kv_list(const KvRef& kv) override { return inner_->kv_list(kv); }
    void blob_write(const std::string& ns, const ObjectId& id, std::span<const std::byte> data) override {
        inner_->blob_write(ns, id, data);
    }
    using Engine::blob_read;
    void blob_read(const std::string& ns, const ObjectId& id, std::uint64_t offset, std::span<std::byte> out) override {
        inner_->blob_read(ns, id, offset, out);
    }
    IdRange allocate_ids(const std::string& ns, std::uint64_t n) override { return inner_->allocate_ids(ns, n); }
    EngineOpCounters counters_snapshot() const override { return inner_->counters_snapshot(); }
    void reset_counters() override { inner_->reset_counters(); }

    std::uint64_t puts(const KvRef& kv) const {
        std::lock_guard lock(mu_);
        auto it = puts_.find(kv);
        return it == puts_.end() ? 0 : it->second;
    }

private:
    std::shared_ptr<Engine> inner_;
    mutable std::mutex mu_;
    std::map<KvRef, std::uint64_t> puts_;
};

// Ensemble member in the collocation key, so one session's fields share one
// index and its axes cover step, levelist and param.
constexpr std::string_view kMemberSchema =
    "dataset: class,stream,expver,date,time\n"
    "collocation: type,levtype,number\n"
    "element: step,levelist,param\n";

Outcome axis_dedup() {
    auto engine = std::make_shared<PutCountingEngine>(LocalEngine::in_memory());
    auto store = obj_store(kMemberSchema, engine);
    hammer::HammerConfig cfg;
    cfg.nensembles = 1;
    cfg.nsteps = 100;
    cfg.nparams = 10;
    cfg.nlevels = 10;
    cfg.field_size = 16;
    const auto r = hammer::run_task(store, cfg, {"write", hammer::Role::kWrite, 0, 1, 0, 1, cfg.nsteps});
    if (!r.ok()) return fail("write failed: " + r.error);
    const auto ds = "class=od,stream=enfo,expver=0001,date=20231201,time=1200";
    const auto colloc = "type=pf,levtype=pl,number=1";
    const auto step_keys = engine->kv_list(objb::axis_kv(ds, colloc, "step")).size();
    std::uint64_t axis_puts = 0;
    for (const auto& dim : store.schema().element_dims()) axis_puts += engine->puts(objb::axis_kv(ds, colloc, dim));
    const auto detail = std::to_string(r.ops) + " archives; step axis holds " + std::to_string(step_keys) +
                        " keys; " + std::to_string(axis_puts) + " axis puts (bound 120)";
    if (r.ops != 10000 || step_keys != 100 || axis_puts > 120) return fail(detail);
    return pass(detail);
}

// ---------------------------------------------------------------- 9

Outcome bandwidth_formula() {
    using boost::multiprecision::cpp_rational;
    constexpr std::int64_t kSec = 1'000'000'000;
    const std::vector<hammer::Event> overlapping{{0, 10 * kSec, 100u << 20}, {5 * kSec, 15 * kSec, 100u << 20}};
    const double bw = hammer::compute_bandwidth(overlapping);
    const double exact = static_cast<double>(cpp_rational(200ll << 20, 15));
    if (bw != exact) return fail("overlapping example gave " + std::to_string(bw));

    // Random event sets against exact rational arithmetic.
    std::mt19937_64 rng(9);
    double worst = 0;
    for (int t = 0; t < 10000; ++t) {
        std::vector<hammer::Event> events(1 + rng() % 64);
        cpp_rational bytes = 0;
        std::int64_t lo = INT64_MAX, hi = INT64_MIN;
        for (auto& e : events) {
            e.start_ns = static_cast<std::int64_t>(rng() % (1ull << 40));
            e.end_ns = e.start_ns + 1 + static_cast<std::int64_t>(rng() % (1ull << 36));
            e.bytes = rng() % (1ull << 44);
            bytes += e.bytes;
            lo = std::min(lo, e.start_ns);
            hi = std::max(hi, e.end_ns);
        }
        const double want = static_cast<double>(bytes * kSec / cpp_rational(hi - lo));
        const double got = hammer::compute_bandwidth(events);
        if (want != 0) worst = std::max(worst, std::abs(got - want) / want);
    }
    if (worst > 2 * DBL_EPSILON) return fail("relative error " + std::to_string(worst) + " on random event sets");

    // Three repetitions through the CLI: report carries mean and stddev.
    TempDir dir;
    write_file(dir / "schema", fieldstore::testing::kDefaultSchema);
    write_file(dir / "fs.conf", "backend = fs\nschema = schema\nroot = root\n");
    const auto csv = dir / "report.csv";
    const int rc = run_hammer("--mode write --reps 3 --nsteps 2 --field-size 4096 --config '" +
                                  (dir / "fs.conf").string() + "' --out '" + csv.string() + "'",
                              dir / "log");
    if (rc != 0) return fail("hammer exited " + std::to_string(rc) + tail_of(dir / "log"));
    std::vector<double> samples;
    std::optional<double> mean, stddev;
    for (const auto& row : read_csv(csv)) {
        const double v = std::stod(row.at("bandwidth_bytes_per_s"));
        if (row.at("repetition") == "mean") mean = v;
        else if (row.at("repetition") == "stddev") stddev = v;
        else samples.push_back(v);
    }
    if (samples.size() != 3 || !mean || !stddev) return fail("report lacks 3 rows with mean and stddev");
    const double m = (samples[0] + samples[1] + samples[2]) / 3;
    double ss = 0;
    for (double x : samples) ss += (x - m) * (x - m);
    const double sd = std::sqrt(ss / 2);
    if (std::abs(*mean - m) > 1e-6 * m || std::abs(*stddev - sd) > 1e-6 * m + 1e-9)
        return fail("report mean/stddev do not match its rows");
    return pass("overlap example = 200 MiB / 15 s exactly; 10000 random sets within 2 ulp of exact; "
                "3-repetition report carries mean and stddev");
}

// ---------------------------------------------------------------- 10

Outcome crash_safety() {
    TempDir dir;
    auto engine = LocalEngine::open(dir / "engine");
    auto store = obj_store(fieldstore::testing::kDefaultSchema, engine);
    const auto tmpl = hammer::identifier_template(0);
    std::map<std::string, std::pair<Identifier, std::vector<std::byte>>> committed;
    const auto key = [&](const Identifier& id) { return store.schema().canonical(id); };
    auto writer = store.session();
    std::mt19937_64 rng(10);
    int injected = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const bool replace = !committed.empty() && rng() % 2;
        Identifier id = replace ? std::next(committed.begin(), rng() % committed.size())->second.first
                                : hammer::gen_identifier(tmpl, 1, trial + 1, 1 + trial % 3, 1);
        if (!replace) {
            // Commit one field, then fail the archive of a new one.
            writer.archive(id, hammer::make_payload(id, 0, 32));
            committed[key(id)] = {id, hammer::make_payload(id, 0, 32)};
            id = hammer::gen_identifier(tmpl, 2, trial + 1, 1 + trial % 3, 1);
        }
        // Fail either the first put after the blob write or the index put itself,
        // the only put whose key is an element key.
        const bool at_index = rng() % 2;
        bool after_blob = false;
        engine->set_fault_hook([&](const EngineOpInfo& op) {
            if (op.op == EngineOp::kBlobWrite) after_blob = true;
            if (op.op != EngineOp::kKvPut || !after_blob) return false;
            return !at_index || op.key.find('=') != std::string_view::npos;
        });
        try {
            writer.archive(id, hammer::make_payload(id, 1000 + trial, 32));
            engine->set_fault_hook({});
            return fail("trial " + std::to_string(trial) + ": no fault was injected");
        } catch (const InjectedFault&) {
            ++injected;
        }
        engine->set_fault_hook({});

        auto reader = store.session();
        const auto got = reader.retrieve(id).read();
        auto it = committed.find(key(id));
        const auto want = it == committed.end() ? std::vector<std::byte>{} : it->second.second;
        if (got != want) return fail("trial " + std::to_string(trial) + ": reader saw a failed archive of " + id.str());
    }
    // Every descriptor in the catalogue points at readable, intact bytes.
    PartialIdentifier all(tmpl);
    auto reader = store.session();
    const auto entries = reader.list(all);
    for (const auto& e : entries) {
        const auto want = committed.at(key(e.identifier)).second;
        if (reader.retrieve(e.identifier).read() != want) return fail("descriptor of " + e.identifier.str() + " is bad");
    }
    if (entries.size() != committed.size()) return fail("catalogue size differs from committed set");

    // Kill the writer at random points; acknowledged archives survive restart.
    int kills = 0;
    std::uint64_t acked_total = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto edir = dir / ("kill" + std::to_string(trial));
        int fds[2];
        if (::pipe(fds) != 0) return fail("pipe");
        const pid_t pid = ::fork();
        if (pid == 0) {
            ::close(fds[0]);
            auto s = obj_store(fieldstore::testing::kDefaultSchema, LocalEngine::open(edir));
            auto w = s.session();
            for (int i = 0;; ++i) {
                const auto fid = hammer::gen_identifier(tmpl, 1, 1 + i / 100, 1 + i % 100, 1);
                w.archive(fid, hammer::make_payload(fid, 0, 128));
                if (::write(fds[1], &i, sizeof i) != sizeof i) ::_exit(1);
            }
        }
        ::close(fds[1]);
        int acked = -1, i;
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(20 + 7 * trial);
        while (std::chrono::steady_clock::now() < deadline && ::read(fds[0], &i, sizeof i) == sizeof i) acked = i;
        ::kill(pid, SIGKILL);
        ::waitpid(pid, nullptr, 0);
        while (::read(fds[0], &i, sizeof i) == sizeof i) acked = i;
        ::close(fds[0]);
        ++kills;

        auto s = obj_store(fieldstore::testing::kDefaultSchema, LocalEngine::open(edir));
        auto r = s.session();
        for (int k = 0; k <= acked; ++k) {
            const auto fid = hammer::gen_identifier(tmpl, 1, 1 + k / 100, 1 + k % 100, 1);
            if (r.retrieve(fid).read() != hammer::make_payload(fid, 0, 128))
                return fail("kill " + std::to_string(trial) + ": lost acknowledged archive " + fid.str());
        }
        for (const auto& e : r.list(PartialIdentifier(tmpl))) {
            const auto got = r.retrieve(e.identifier).read();
            if (auto why = hammer::check_payload(e.identifier, got, 128, 0))
                return fail("kill " + std::to_string(trial) + ": bad descriptor for " + e.identifier.str() + ": " + *why);
        }
        acked_total += static_cast<std::uint64_t>(acked + 1);
    }
    return pass("500 fault trials (" + std::to_string(injected) + " injected), readers never saw a failed archive; " +
                std::to_string(kills) + " kill/restarts kept all " + std::to_string(acked_total) +
                " acknowledged archives");
}

// ---------------------------------------------------------------- 11

Outcome file_census() {
    std::string detail;
    for (int nodes : {1, 2, 3}) {
        TempDir dir;
        write_file(dir / "schema", fieldstore::testing::kDefaultSchema);
        write_file(dir / "fs.conf", "backend = fs\nschema = schema\nroot = root\n");
        const int rc = run_hammer("--mode write --reps 1 --nensembles " + std::to_string(nodes) +
                                      " --sessions 2 --nsteps 3 --field-size 1024 --config '" +
                                      (dir / "fs.conf").string() + "'",
                                  dir / "log");
        if (rc != 0) return fail("hammer exited " + std::to_string(rc) + tail_of(dir / "log"));
        const int sessions = 2 * nodes;
        std::map<std::string, int> by_ext;
        int total = 0;
        for (const auto& e : stdfs::directory_iterator(dir / "root" /
                                                       "class=od,stream=enfo,expver=0001,date=20231201,time=1200")) {
            ++total;
            const auto name = e.path().filename().string();
            ++by_ext[name == "toc" || name == "schema" ? name : e.path().extension().string()];
        }
        const bool ok = total == 4 * sessions + 2 && by_ext[".data"] == sessions && by_ext[".index"] == sessions &&
                        by_ext[".full"] == sessions && by_ext[".subtoc"] == sessions && by_ext["toc"] == 1 &&
                        by_ext["schema"] == 1;
        detail += (detail.empty() ? "" : ", ") + std::string("P=") + std::to_string(sessions) + ": " +
                  std::to_string(total) + " files";
        if (!ok) return fail(detail);
    }
    return pass(detail + " (4 per session + toc + schema)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fieldstore acceptance suite"};
    std::vector<int> only;
    app.add_option("--hammer", g_hammer, "Path to the hammer executable")->required()->check(CLI::ExistingFile);
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"contention consistency", contention_consistency},
        {"backend equivalence", backend_equivalence},
        {"oracle equivalence", oracle_equivalence},
        {"TOC atomicity", toc_atomicity},
        {"masking neutrality", masking_neutrality},
        {"handle-merge bound", handle_merge_bound},
        {"object-backend visibility", object_visibility},
        {"axis dedup", axis_dedup},
        {"bandwidth formula", bandwidth_formula},
        {"crash safety", crash_safety},
        {"file census", file_census},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = fail(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s AC%d %s: %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first, o.detail.c_str(),
                    secs);
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
