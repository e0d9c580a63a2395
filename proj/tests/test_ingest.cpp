#include "convmap/error.hpp"
#include "convmap/ingest.hpp"

#include <doctest.h>

#include <random>

using namespace convmap;

TEST_CASE("parse_export reads the minimal file")
{
    auto const raw = parse_export(R"({"title":"t","messages":[
        {"role":"user","content":"hi"},
        {"role":"assistant","content":"hello","ts":"2024-01-01T00:00:00Z"}]})");
    CHECK(raw.title == "t");
    REQUIRE(raw.messages.size() == 2);
    CHECK(raw.messages[0].role == Role::user);
    CHECK(raw.messages[1].role == Role::assistant);
    CHECK(raw.messages[1].ts == "2024-01-01T00:00:00Z");
}

TEST_CASE("parse_export ignores unknown keys")
{
    auto const raw = parse_export(R"({"title":"t","extra":1,"messages":[{"role":"user","content":"q","id":7}]})");
    CHECK(raw.messages.size() == 1);
}

TEST_CASE("parse_export rejects empty and malformed input with a position")
{
    CHECK_THROWS_AS((void) parse_export(""), ParseError);
    try {
        (void) parse_export("{\n  \"title\": \"x\",\n  \"messages\": [ oops ]\n}");
        FAIL("expected a parse error");
    } catch (ParseError const & e) {
        CHECK(e.line() == 3);
        CHECK(e.column() > 1);
        CHECK(e.kind() == ErrorKind::parse);
    }
}

TEST_CASE("parse_export rejects unknown roles by name")
{
    try {
        (void) parse_export(R"({"title":"t","messages":[{"role":"system","content":"x"}]})");
        FAIL("expected a schema error");
    } catch (Error const & e) {
        CHECK(e.kind() == ErrorKind::schema);
        CHECK(std::string(e.what()).find("system") != std::string::npos);
    }
    CHECK_THROWS_AS((void) parse_export(R"({"title":"t"})"), Error);
    CHECK_THROWS_AS((void) parse_export(R"([1,2])"), Error);
}

namespace {

RawExport make_raw(std::initializer_list<std::pair<Role, char const *>> messages)
{
    RawExport raw;
    for (auto const & [role, text] : messages) {
        raw.messages.push_back({role, text, std::nullopt});
    }
    return raw;
}

} // namespace

TEST_CASE("pair_messages pairs each question with its answer")
{
    auto const nodes = pair_messages(
        make_raw({{Role::user, "q1"}, {Role::assistant, "a1"}, {Role::user, "q2"}, {Role::assistant, "a2"}}));
    REQUIRE(nodes.size() == 2);
    CHECK(nodes[0].seq_index == 0);
    CHECK(nodes[1].seq_index == 1);
    CHECK(nodes[0].question == "q1");
    CHECK(nodes[1].answer == "a2");
    CHECK(nodes[0].id != nodes[1].id);
    CHECK(nodes[0].token_count == count_tokens("q1a1"));
}

TEST_CASE("consecutive user messages merge into one question")
{
    auto const nodes = pair_messages(make_raw({{Role::user, "q1"}, {Role::user, "q1b"}, {Role::assistant, "a1"}}));
    REQUIRE(nodes.size() == 1);
    CHECK(nodes[0].question == "q1\n\nq1b");
}

TEST_CASE("trailing question keeps an empty answer")
{
    auto const nodes = pair_messages(make_raw({{Role::user, "q1"}, {Role::assistant, "a1"}, {Role::user, "q2"}}));
    REQUIRE(nodes.size() == 2);
    CHECK(nodes[1].answer.empty());
}

TEST_CASE("export starting with the assistant is a structural error")
{
    try {
        (void) pair_messages(make_raw({{Role::assistant, "a"}}));
        FAIL("expected a structural error");
    } catch (Error const & e) {
        CHECK(e.kind() == ErrorKind::structural);
    }
}

TEST_CASE("pairing preserves user text and counts user runs")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        RawExport raw;
        std::string user_text;
        std::size_t runs = 0;
        Role previous = Role::assistant;
        std::size_t const length = 1 + rng() % 12;
        for (std::size_t i = 0; i < length; ++i) {
            Role const role = (i == 0 || rng() % 2 == 0) ? Role::user : Role::assistant;
            std::string const content = "m" + std::to_string(i);
            raw.messages.push_back({role, content, std::nullopt});
            if (role == Role::user) {
                user_text += content;
                runs += previous == Role::assistant ? 1 : 0;
            }
            previous = role;
        }
        auto const nodes = pair_messages(raw);
        CHECK(nodes.size() == runs);
        std::string joined;
        for (auto const & n : nodes) {
            std::string q = n.question;
            std::erase(q, '\n');
            joined += q;
        }
        CHECK(joined == user_text);
    }
}

TEST_CASE("count_tokens follows ceil(chars / 4)")
{
    CHECK(count_tokens("") == 0);
    CHECK(count_tokens("aaaa") == 1);
    CHECK(count_tokens("hello world") == 3);
    // code points, not bytes
    CHECK(count_tokens("\xc3\xa9\xc3\xa9\xc3\xa9\xc3\xa9") == 1);
}

TEST_CASE("count_tokens is monotone and nearly additive under concatenation")
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        std::string a(rng() % 40, 'x');
        std::string b(rng() % 40, 'y');
        auto const ab = count_tokens(a + b);
        CHECK(ab >= std::max(count_tokens(a), count_tokens(b)));
        auto const sum = count_tokens(a) + count_tokens(b);
        CHECK((ab > sum ? ab - sum : sum - ab) <= 1);
    }
}
