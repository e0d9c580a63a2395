#include "convmap/error.hpp"
#include "convmap/file_io.hpp"
#include "convmap/store.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <atomic>
#include <chrono>
#include <set>
#include <thread>

using namespace convmap;
using convmap::testing::TempDir;

namespace {

StoredConversation stored(std::string id)
{
    StoredConversation s;
    s.conversation = convmap::testing::make_conversation({{"first question", "first answer"},
                                                          {"second question", "second answer"}},
                                                         std::move(id));
    return s;
}

std::size_t count_temp_files(std::filesystem::path const & dir)
{
    std::size_t n = 0;
    for (auto const & entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (entry.path().filename().string().find(".tmp.") != std::string::npos) {
            ++n;
        }
    }
    return n;
}

} // namespace

TEST_CASE("a new store lays out its directories and metadata")
{
    TempDir dir("store");
    Store store(dir.path() / "s");
    CHECK(std::filesystem::is_directory(store.root() / "conversations"));
    CHECK(std::filesystem::is_directory(store.embedding_cache_dir()));
    CHECK(std::filesystem::is_directory(store.root() / "locks"));
    CHECK(store.meta().at("format") == 1);
}

TEST_CASE("ids are sequential and survive reopening")
{
    TempDir dir("store");
    {
        Store store(dir.path());
        CHECK(store.allocate_id() == "c1");
        CHECK(store.allocate_id() == "c2");
    }
    Store again(dir.path());
    CHECK(again.allocate_id() == "c3");
}

TEST_CASE("concurrent id allocation never repeats")
{
    TempDir dir("store");
    Store store(dir.path());
    std::vector<std::string> ids(64);
    std::vector<std::thread> workers;
    for (std::size_t t = 0; t < 8; ++t) {
        workers.emplace_back([&, t] {
            Store mine(dir.path());
            for (std::size_t k = 0; k < 8; ++k) {
                ids[t * 8 + k] = mine.allocate_id();
            }
        });
    }
    for (auto & w : workers) {
        w.join();
    }
    CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == ids.size());
}

TEST_CASE("documents round trip and nothing temporary is left behind")
{
    TempDir dir("store");
    Store store(dir.path());
    auto const s = stored("c-x");
    CHECK_FALSE(store.contains("c-x"));
    store.save(s);
    CHECK(store.contains("c-x"));
    auto const back = store.load("c-x");
    CHECK(back.conversation.nodes.size() == 2);
    CHECK(back.conversation.nodes[1].question == "second question");
    CHECK_FALSE(back.analysis.has_value());
    CHECK(stored_to_json(back) == stored_to_json(s));
    CHECK(count_temp_files(dir.path()) == 0);
}

TEST_CASE("an interrupted write leaves the previous document intact")
{
    TempDir dir("store");
    Store store(dir.path());
    store.save(stored("c-x"));
    auto const before = read_file(dir.path() / "conversations" / "c-x.json");
    // a crash after writing the temp file but before the rename
    write_file_atomic(dir.path() / "conversations" / "c-x.json.tmp.1.1.1", "{ half written");
    CHECK(store.load("c-x").conversation.nodes.size() == 2);
    CHECK(read_file(dir.path() / "conversations" / "c-x.json") == before);
}

TEST_CASE("load reports unknown, unreadable and invalid documents")
{
    TempDir dir("store");
    Store store(dir.path());
    try {
        (void) store.load("c404");
        FAIL("expected not_found");
    } catch (Error const & e) {
        CHECK(e.kind() == ErrorKind::not_found);
    }

    write_file_atomic(dir.path() / "conversations" / "c-bad.json", "not json");
    CHECK_THROWS_AS((void) store.load("c-bad"), Error);

    auto doc = stored_to_json(stored("c-dup"));
    doc["conversation"]["nodes"][1]["seq_index"] = 0;
    write_file_atomic(dir.path() / "conversations" / "c-dup.json", doc.dump());
    try {
        (void) store.load("c-dup");
        FAIL("expected a schema error");
    } catch (Error const & e) {
        CHECK(e.kind() == ErrorKind::schema);
    }
}

TEST_CASE("save refuses an invalid conversation and keeps the old one")
{
    TempDir dir("store");
    Store store(dir.path());
    store.save(stored("c-x"));
    auto broken = stored("c-x");
    broken.conversation.nodes[1].seq_index = 0;
    try {
        store.save(broken);
        FAIL("expected a state error");
    } catch (Error const & e) {
        CHECK(e.kind() == ErrorKind::state);
    }
    CHECK(store.load("c-x").conversation.nodes[1].seq_index == 1);
}

TEST_CASE("lock names are restricted to safe ids")
{
    TempDir dir("store");
    Store store(dir.path());
    CHECK_THROWS_AS((void) store.lock("../escape"), Error);
    CHECK_THROWS_AS((void) store.lock(""), Error);
    CHECK_THROWS_AS((void) store.load("a/b"), Error);
    CHECK_NOTHROW((void) store.lock("c-1_ok"));
}

TEST_CASE("writers on one conversation are serialized")
{
    TempDir dir("store");
    Store store(dir.path());
    std::atomic<int> inside{0};
    std::atomic<int> worst{0};
    std::vector<std::thread> workers;
    for (int t = 0; t < 6; ++t) {
        workers.emplace_back([&] {
            Store mine(dir.path());
            for (int k = 0; k < 5; ++k) {
                auto const guard = mine.lock("c1");
                int const now = ++inside;
                worst = std::max(worst.load(), now);
                std::this_thread::sleep_for(std::chrono::milliseconds(1));
                --inside;
            }
        });
    }
    for (auto & w : workers) {
        w.join();
    }
    CHECK(worst == 1);
}

TEST_CASE("different conversations lock independently")
{
    TempDir dir("store");
    Store store(dir.path());
    auto const a = store.lock("c1");
    std::atomic<bool> got{false};
    std::thread other([&] {
        auto const b = store.lock("c2");
        got = true;
    });
    other.join();
    CHECK(got);
}

TEST_CASE("update_meta merges keys")
{
    TempDir dir("store");
    Store store(dir.path());
    store.update_meta({{"dimension", 256}});
    store.update_meta({{"providers", {{"llm", "x"}}}});
    auto const m = store.meta();
    CHECK(m.at("dimension") == 256);
    CHECK(m.at("providers").at("llm") == "x");
    CHECK(m.at("format") == 1);
}
