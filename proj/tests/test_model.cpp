#include "convmap/json_io.hpp"
#include "convmap/model.hpp"

#include "fixtures.hpp"

#include <doctest.h>

using namespace convmap;

namespace {

EmbeddingVector unit(Eigen::Index dim, Eigen::Index axis)
{
    EmbeddingVector v = EmbeddingVector::Zero(dim);
    v[axis] = 1.0;
    return v;
}

/// Two topics, two answered nodes, memberships consistent.
Conversation analyzed_pair()
{
    Conversation c = testing::make_conversation({{"q0", "a0"}, {"q1", "a1"}});
    c.membership_threshold = 0.5;
    c.embedding_dimension = 3;
    for (std::size_t t = 0; t < 2; ++t) {
        Topic topic;
        topic.id = "t" + std::to_string(t);
        topic.label = "topic " + std::to_string(t);
        topic.ordinal = t;
        topic.embedding = unit(3, static_cast<Eigen::Index>(t));
        c.topics.push_back(topic);
    }
    c.nodes[0].memberships = {{"t0", 0.9}, {"t1", 0.6}};
    c.nodes[0].primary_topic = "t0";
    c.nodes[1].memberships = {{"t1", 0.3}};
    c.nodes[1].primary_topic = "t1";
    c.topics[0].member_similarities = {{"n0", 0.9}};
    c.topics[1].member_similarities = {{"n0", 0.6}, {"n1", 0.3}};
    for (auto & n : c.nodes) {
        n.embedding = unit(3, 2);
    }
    return c;
}

} // namespace

TEST_CASE("empty conversation is valid")
{
    Conversation c;
    c.id = "empty";
    CHECK(validate_conversation(c).empty());
}

TEST_CASE("consistent analyzed conversation is valid")
{
    CHECK(validate_conversation(analyzed_pair()).empty());
}

TEST_CASE("duplicate seq_index is reported once")
{
    Conversation c = testing::make_conversation({{"q0", "a0"}, {"q1", "a1"}});
    c.nodes[1].seq_index = 0;
    auto const v = validate_conversation(c);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("duplicate seq_index") != std::string::npos);
    CHECK(v[0].find("n1") != std::string::npos);
}

TEST_CASE("primary topic must be the argmax membership")
{
    Conversation c = analyzed_pair();
    c.nodes[0].primary_topic = "t1";

    // independent argmax over the node's level-0 memberships
    auto const & ms = c.nodes[0].memberships;
    std::size_t best = 0;
    for (std::size_t i = 1; i < ms.size(); ++i) {
        if (ms[i].similarity > ms[best].similarity) {
            best = i;
        }
    }
    REQUIRE(ms[best].topic_id != *c.nodes[0].primary_topic);

    auto const v = validate_conversation(c);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("argmax") != std::string::npos);
    CHECK(v[0].find("n0") != std::string::npos);
}

TEST_CASE("equal similarities resolve to the smaller ordinal")
{
    Conversation c = analyzed_pair();
    c.nodes[0].memberships = {{"t0", 0.7}, {"t1", 0.7}};
    c.nodes[0].primary_topic = "t0";
    c.topics[1].member_similarities["n0"] = 0.7;
    CHECK(validate_conversation(c).empty());
    c.nodes[0].primary_topic = "t1";
    CHECK(validate_conversation(c).size() == 1);
}

TEST_CASE("non-primary membership below threshold is reported")
{
    Conversation c = analyzed_pair();
    c.nodes[0].memberships[1].similarity = 0.2;
    auto const v = validate_conversation(c);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("threshold") != std::string::npos);
}

TEST_CASE("topic level and parent rules")
{
    Conversation c = analyzed_pair();
    c.topics[1].level = 1;
    auto v = validate_conversation(c);
    CHECK(! v.empty());

    c = analyzed_pair();
    c.topics[0].level = 2;
    v = validate_conversation(c);
    CHECK(! v.empty());
}

TEST_CASE("embedding must be unit length with the store dimension")
{
    Conversation c = analyzed_pair();
    c.nodes[0].embedding = EmbeddingVector::Ones(3);
    CHECK(validate_conversation(c).size() == 1);

    c = analyzed_pair();
    c.nodes[1].embedding = unit(4, 0);
    CHECK(validate_conversation(c).size() == 1);
}

TEST_CASE("only the newest node may lack an answer")
{
    Conversation c = testing::make_conversation({{"q0", "a0"}, {"q1", ""}});
    CHECK(validate_conversation(c).empty());
    c.nodes[0].answer.clear();
    CHECK(validate_conversation(c).size() == 1);
}

TEST_CASE("validation is idempotent and survives a serialization round trip")
{
    Conversation const c = analyzed_pair();
    auto const first = validate_conversation(c);
    auto const second = validate_conversation(c);
    CHECK(first == second);

    Conversation const reloaded = conversation_from_json(json::parse(conversation_to_json(c).dump()));
    CHECK(validate_conversation(reloaded).empty());
    CHECK(conversation_to_json(reloaded) == conversation_to_json(c));

    Conversation broken = c;
    broken.nodes[0].primary_topic = "t1";
    Conversation const broken_reloaded = conversation_from_json(conversation_to_json(broken));
    CHECK(validate_conversation(broken_reloaded) == validate_conversation(broken));
}
