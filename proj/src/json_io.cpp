#include "convmap/json_io.hpp"

#include "convmap/error.hpp"

namespace convmap {

namespace {

json vector_to_json(EmbeddingVector const & v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

EmbeddingVector vector_from_json(json const & j)
{
    auto values = j.get<std::vector<double>>();
    return Eigen::Map<EmbeddingVector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json optional_string(std::optional<std::string> const & s)
{
    return s ? json(*s) : json(nullptr);
}

std::optional<std::string> optional_string_from(json const & j, char const * key)
{
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        return std::nullopt;
    }
    return it->get<std::string>();
}

json memberships_to_json(std::vector<Membership> const & memberships)
{
    json out = json::array();
    for (auto const & m : memberships) {
        out.push_back({{"topic", m.topic_id}, {"s", m.similarity}});
    }
    return out;
}

ConversationNode node_from_json(json const & j)
{
    ConversationNode n;
    n.id = j.at("id").get<std::string>();
    n.seq_index = j.at("seq_index").get<std::size_t>();
    n.question = j.at("question").get<std::string>();
    n.answer = j.at("answer").get<std::string>();
    n.summary = j.value("summary", std::string{});
    n.token_count = j.at("token_count").get<std::size_t>();
    if (auto it = j.find("embedding"); it != j.end() && ! it->is_null()) {
        n.embedding = vector_from_json(*it);
    }
    for (auto const & m : j.value("memberships", json::array())) {
        n.memberships.push_back({m.at("topic").get<std::string>(), m.at("s").get<double>()});
    }
    n.primary_topic = optional_string_from(j, "primary_topic");
    return n;
}

Topic topic_from_json(json const & j)
{
    Topic t;
    t.id = j.at("id").get<std::string>();
    t.label = j.at("label").get<std::string>();
    t.ordinal = j.at("ordinal").get<std::size_t>();
    t.level = j.at("level").get<int>();
    t.parent = optional_string_from(j, "parent");
    if (auto it = j.find("embedding"); it != j.end() && ! it->is_null()) {
        t.embedding = vector_from_json(*it);
    }
    t.member_similarities = j.value("members", std::map<std::string, double>{});
    return t;
}

} // namespace

json node_to_json(ConversationNode const & node, bool with_embedding)
{
    json j{
        {"id", node.id},
        {"seq_index", node.seq_index},
        {"question", node.question},
        {"answer", node.answer},
        {"summary", node.summary},
        {"token_count", node.token_count},
        {"memberships", memberships_to_json(node.memberships)},
        {"primary_topic", optional_string(node.primary_topic)},
    };
    if (with_embedding) {
        j["embedding"] = node.embedding ? vector_to_json(*node.embedding) : json(nullptr);
    }
    return j;
}

json topic_to_json(Topic const & topic, bool with_embedding)
{
    json j{
        {"id", topic.id},
        {"label", topic.label},
        {"ordinal", topic.ordinal},
        {"level", topic.level},
        {"parent", optional_string(topic.parent)},
        {"members", topic.member_similarities},
    };
    if (with_embedding) {
        j["embedding"] = vector_to_json(topic.embedding);
    }
    return j;
}

json conversation_to_json(Conversation const & c)
{
    json nodes = json::array();
    for (auto const & n : c.nodes) {
        nodes.push_back(node_to_json(n, true));
    }
    json topics = json::array();
    for (auto const & t : c.topics) {
        topics.push_back(topic_to_json(t, true));
    }
    return {
        {"id", c.id},
        {"title", c.title},
        {"created", c.created},
        {"updated", c.updated},
        {"analysis_version", c.analysis_version},
        {"membership_threshold", c.membership_threshold},
        {"embedding_dimension", c.embedding_dimension},
        {"embedding_provider", c.embedding_provider},
        {"nodes", std::move(nodes)},
        {"topics", std::move(topics)},
    };
}

Conversation conversation_from_json(json const & doc)
{
    try {
        Conversation c;
        c.id = doc.at("id").get<std::string>();
        c.title = doc.value("title", std::string{});
        c.created = doc.value("created", std::string{});
        c.updated = doc.value("updated", std::string{});
        c.analysis_version = doc.value("analysis_version", std::uint64_t{0});
        c.membership_threshold = doc.value("membership_threshold", 0.5);
        c.embedding_dimension = doc.value("embedding_dimension", std::size_t{0});
        c.embedding_provider = doc.value("embedding_provider", std::string{});
        for (auto const & n : doc.at("nodes")) {
            c.nodes.push_back(node_from_json(n));
        }
        for (auto const & t : doc.value("topics", json::array())) {
            c.topics.push_back(topic_from_json(t));
        }
        return c;
    } catch (json::exception const & e) {
        throw Error(ErrorKind::schema, std::string("malformed conversation document: ") + e.what());
    }
}

json conversation_summary_json(Conversation const & c)
{
    json nodes = json::array();
    for (auto const & n : c.nodes) {
        nodes.push_back(node_to_json(n, false));
    }
    return {
        {"id", c.id},
        {"title", c.title},
        {"created", c.created},
        {"updated", c.updated},
        {"analysis_version", c.analysis_version},
        {"node_count", c.nodes.size()},
        {"topic_count", c.topics.size()},
        {"nodes", std::move(nodes)},
    };
}

json topic_model_json(Conversation const & c)
{
    json topics = json::array();
    for (auto const & t : c.topics) {
        topics.push_back(topic_to_json(t, false));
    }
    json nodes = json::array();
    for (auto const & n : c.nodes) {
        nodes.push_back({
            {"id", n.id},
            {"summary", n.summary},
            {"primary_topic", optional_string(n.primary_topic)},
            {"memberships", memberships_to_json(n.memberships)},
        });
    }
    return {{"topics", std::move(topics)}, {"nodes", std::move(nodes)}};
}

json assignment_to_json(RowAssignment const & a)
{
    return {{"rows", a.rows}, {"cost", a.cost}, {"method", to_string(a.method)}};
}

RowAssignment assignment_from_json(json const & doc)
{
    RowAssignment a;
    a.rows = doc.at("rows").get<std::vector<std::size_t>>();
    a.cost = doc.at("cost").get<std::int64_t>();
    a.method = doc.at("method").get<std::string>() == "exact" ? SolveMethod::exact : SolveMethod::heuristic;
    return a;
}

json geometry_to_json(GlobalGeometry const & g)
{
    json nodes = json::array();
    for (auto const & n : g.nodes) {
        nodes.push_back({{"id", n.id}, {"x", n.x}, {"row", n.row}});
    }
    json edges = json::array();
    for (auto const & [a, b] : g.edges) {
        edges.push_back(json::array({a, b}));
    }
    json topics = json::array();
    for (auto const & t : g.topics) {
        topics.push_back({{"id", t.id}, {"row", t.row}, {"ordinal", t.ordinal}});
    }
    return {
        {"nodes", std::move(nodes)},
        {"edges", std::move(edges)},
        {"topics", std::move(topics)},
        {"forgotten_boundary", g.forgotten_boundary},
    };
}

GlobalGeometry geometry_from_json(json const & doc)
{
    GlobalGeometry g;
    for (auto const & n : doc.at("nodes")) {
        g.nodes.push_back({n.at("id").get<std::string>(), n.at("x").get<std::size_t>(), n.at("row").get<std::size_t>()});
    }
    for (auto const & e : doc.at("edges")) {
        g.edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    }
    for (auto const & t : doc.at("topics")) {
        g.topics.push_back(
            {t.at("id").get<std::string>(), t.at("row").get<std::size_t>(), t.at("ordinal").get<std::size_t>()});
    }
    g.forgotten_boundary = doc.at("forgotten_boundary").get<std::size_t>();
    return g;
}

json layout_to_json(LayoutResult const & layout, TopicGraph const & graph)
{
    auto sectors = [](std::vector<RingSector> const & ring, char const * key) {
        json out = json::array();
        for (auto const & s : ring) {
            out.push_back({{key, s.topic_id}, {"s", s.similarity}});
        }
        return out;
    };
    json nodes = json::array();
    for (std::size_t i = 0; i < graph.size(); ++i) {
        auto const col = static_cast<Eigen::Index>(i);
        nodes.push_back({
            {"id", graph.node_ids[i]},
            {"x", layout.positions(0, col)},
            {"y", layout.positions(1, col)},
            {"outer_ring", sectors(graph.outer_ring[i], "topic")},
            {"inner_ring", sectors(graph.inner_ring[i], "subtopic")},
        });
    }
    json edges = json::array();
    for (auto const & e : graph.edges) {
        edges.push_back({{"a", graph.node_ids[e.a]}, {"b", graph.node_ids[e.b]}, {"s", e.similarity}});
    }
    return {
        {"mode", to_string(layout.mode)},
        {"converged", layout.converged},
        {"iterations", layout.iterations},
        {"nodes", std::move(nodes)},
        {"edges", std::move(edges)},
    };
}

json keywords_to_json(std::vector<KeywordWeight> const & keywords)
{
    json out = json::array();
    for (auto const & k : keywords) {
        out.push_back({{"term", k.term}, {"weight", k.weight}, {"df", k.df}});
    }
    return out;
}

json hits_to_json(std::vector<SearchHit> const & hits)
{
    json out = json::array();
    for (auto const & h : hits) {
        out.push_back({
            {"node_id", h.node_id},
            {"seq_index", h.seq_index},
            {"score", h.score},
            {"highlight_level", h.highlight_level},
        });
    }
    return out;
}

} // namespace convmap
