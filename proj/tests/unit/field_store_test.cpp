#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "fieldstore/checksum.h"
#include "fieldstore/codec.h"
#include "fieldstore/engine/local_engine.h"
#include "fieldstore/error.h"
#include "fieldstore/field_store.h"
#include "test_support.h"

using namespace fieldstore;
using fieldstore::testing::TempDir;
using fieldstore::testing::bytes_of;
using fieldstore::testing::field;
using fieldstore::testing::random_bytes;
using fieldstore::testing::string_of;

namespace {

const auto kAll = PartialIdentifier::parse("class=od,expver=0001");

class FieldStoreTest : public ::testing::TestWithParam<BackendKind> {
protected:
    FieldStore open() {
        {
            std::ofstream(dir / "schema") << fieldstore::testing::kTinySchema;
            std::ofstream cfg(dir / "store.cfg");
            cfg << "backend = " << to_string(GetParam()) << "\nschema = schema\nroot = data\nengine = memory\n";
        }
        return FieldStore::open(StoreConfig::load(dir / "store.cfg"));
    }

    /// Visible to a fresh session without the writer flushing.
    bool early_visibility() const { return GetParam() == BackendKind::kObj; }

    TempDir dir;
};

}  // namespace

TEST_P(FieldStoreTest, ArchiveFlushRetrieve) {
    auto store = open();
    EXPECT_EQ(store.kind(), GetParam());
    auto w = store.session();
    const auto mib = random_bytes(1 << 20, 9);
    w.archive(field("fc", "1", "t"), mib);
    w.flush();
    auto r = store.session();
    const auto h = r.retrieve(field("fc", "1", "t"));
    EXPECT_EQ(h.segments().size(), 1u);
    EXPECT_EQ(h.read(), mib);
}

TEST_P(FieldStoreTest, EmptyPayloadRejected) {
    auto store = open();
    auto w = store.session();
    EXPECT_THROW(w.archive(field("fc", "1", "t"), {}), InvalidArgument);
    EXPECT_THROW(w.archive(Identifier::parse("class=od"), bytes_of("x")), InvalidArgument);
}

TEST_P(FieldStoreTest, MissingFieldYieldsEmptyHandle) {
    auto store = open();
    auto r = store.session();
    const auto h = r.retrieve(field("fc", "1", "t"));
    EXPECT_TRUE(h.empty());
    EXPECT_TRUE(h.read().empty());
}

TEST_P(FieldStoreTest, ReplacementReturnsSecondPayload) {
    auto store = open();
    auto w = store.session();
    w.archive(field("fc", "1", "t"), bytes_of("first"));
    w.archive(field("fc", "1", "t"), bytes_of("second"));
    w.flush();
    EXPECT_EQ(string_of(store.session().retrieve(field("fc", "1", "t")).read()), "second");
}

TEST_P(FieldStoreTest, FlushBarrierAcrossWriters) {
    auto store = open();
    auto a = store.session();
    auto b = store.session();
    a.archive(field("fc", "1", "t"), bytes_of("a"));
    b.archive(field("fc", "2", "t"), bytes_of("b"));
    a.flush();
    const auto seen = store.session().list(kAll);
    EXPECT_EQ(seen.size(), early_visibility() ? 2u : 1u);
    b.flush();
    EXPECT_EQ(store.session().list(kAll).size(), 2u);
}

TEST_P(FieldStoreTest, ListCountsAndFilters) {
    auto store = open();
    auto w = store.session();
    w.flush();
    w.archive(field("fc", "1", "t"), bytes_of("a"));
    w.archive(field("fc", "2", "t"), bytes_of("b"));
    w.archive(field("an", "1", "t"), bytes_of("c"));
    w.archive(field("an", "1", "u"), bytes_of("d"));
    w.flush();
    auto r = store.session();
    const auto all = r.list(kAll);
    ASSERT_EQ(all.size(), 4u);
    EXPECT_EQ(all[0].identifier.str(), "class=od,expver=0001,type=an,step=1,param=t");
    EXPECT_EQ(r.list(PartialIdentifier::parse("class=od,expver=0001,type=fc")).size(), 2u);
    EXPECT_TRUE(r.list(PartialIdentifier::parse("class=od,expver=0001,type=zz")).empty());
    EXPECT_THROW(r.list(PartialIdentifier::parse("class=od")), InvalidArgument);
}

TEST_P(FieldStoreTest, CloseKeepsResults) {
    auto store = open();
    auto w = store.session();
    for (int i = 0; i < 6; ++i) w.archive(field(i % 2 ? "fc" : "an", std::to_string(i), "t"), random_bytes(64, i));
    w.flush();
    const auto before = store.session().list(kAll);
    w.close();
    const auto after = store.session().list(kAll);
    ASSERT_EQ(before.size(), after.size());
    auto r = store.session();
    for (std::size_t i = 0; i < before.size(); ++i) {
        EXPECT_EQ(before[i].identifier, after[i].identifier);
        EXPECT_EQ(r.retrieve(after[i].identifier).read(), random_bytes(64, std::stoi(after[i].identifier.at("step"))));
    }
    auto idle = store.session();
    idle.close();
}

TEST_P(FieldStoreTest, PartialRetrieveExpandsAxes) {
    auto store = open();
    auto w = store.session();
    for (const char* p : {"u", "v"}) w.archive(field("fc", "1", p), bytes_of(p));
    w.flush();
    auto r = store.session();
    EXPECT_EQ(string_of(r.retrieve(PartialIdentifier::parse("class=od,expver=0001,type=fc,step=1,param=*")).read()), "uv");
    EXPECT_EQ(string_of(r.retrieve(PartialIdentifier::parse("class=od,expver=0001,type=fc,step=1/2,param=v")).read()), "v");
    EXPECT_TRUE(r.retrieve(PartialIdentifier::parse("class=od,expver=0001,type=an,param=*")).empty());
}

TEST_P(FieldStoreTest, DuplicatesInQueryRepeat) {
    auto store = open();
    auto w = store.session();
    w.archive(field("fc", "1", "t"), bytes_of("ab"));
    w.flush();
    const std::vector<Identifier> q{field("fc", "1", "t"), field("fc", "9", "t"), field("fc", "1", "t")};
    EXPECT_EQ(string_of(store.session().retrieve(q).read()), "abab");
}

// Readers racing a writer that replaces one field must only ever see whole
// versions. The payload embeds its version and a checksum of the rest.
TEST_P(FieldStoreTest, AtomicVisibilityUnderReplacement) {
    auto store = open();
    const auto id = field("fc", "1", "t");
    auto payload = [](std::uint32_t version) {
        auto body = random_bytes(4096, version);
        Encoder e;
        e.u32(version);
        e.u32(crc32c(body));
        e.raw(body);
        return std::move(e).take();
    };
    {
        auto w = store.session();
        w.archive(id, payload(0));
        w.flush();
    }
    std::atomic<bool> done{false};
    std::atomic<int> bad{0}, reads{0};
    std::thread writer([&] {
        auto w = store.session();
        for (std::uint32_t v = 1; v <= 100; ++v) {
            w.archive(id, payload(v));
            w.flush();
        }
        w.close();
        done = true;
    });
    std::vector<std::thread> readers;
    for (int i = 0; i < 3; ++i)
        readers.emplace_back([&] {
            while (!done) {
                auto r = store.session();
                const auto bytes = r.retrieve(id).read();
                ++reads;
                if (bytes.size() != 4104) {
                    ++bad;
                    continue;
                }
                Decoder d(bytes);
                const auto version = d.u32();
                const auto crc = d.u32();
                if (crc != crc32c(std::span(bytes).subspan(8)) || bytes != payload(version)) ++bad;
            }
        });
    writer.join();
    for (auto& t : readers) t.join();
    EXPECT_EQ(bad.load(), 0);
    EXPECT_GT(reads.load(), 0);
}

INSTANTIATE_TEST_SUITE_P(Backends, FieldStoreTest, ::testing::Values(BackendKind::kFs, BackendKind::kObj),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(FieldStoreOpen, DurableObjEngineReopens) {
    TempDir dir;
    std::ofstream(dir / "schema") << fieldstore::testing::kTinySchema;
    std::ofstream(dir / "store.cfg") << "backend = obj\nschema = schema\nroot = engine\n";
    {
        auto store = FieldStore::open(StoreConfig::load(dir / "store.cfg"));
        auto w = store.session();
        w.archive(field("fc", "1", "t"), bytes_of("persist"));
    }
    auto store = FieldStore::open(StoreConfig::load(dir / "store.cfg"));
    EXPECT_EQ(string_of(store.session().retrieve(field("fc", "1", "t")).read()), "persist");
}
