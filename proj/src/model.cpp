#include "convmap/model.hpp"

#include "convmap/error.hpp"

#include <cmath>
#include <set>
#include <unordered_map>

namespace convmap {

namespace {

constexpr double norm_tolerance = 1e-6;

class Validator
{
public:
    explicit Validator(Conversation const & c)
    : c_(c)
    { }

    std::vector<std::string> run()
    {
        check_topics();
        check_nodes();
        return std::move(violations_);
    }

private:
    void report(std::string message) { violations_.push_back(std::move(message)); }

    void check_embedding(std::string const & owner, EmbeddingVector const & v)
    {
        if (dimension_ == 0) {
            dimension_ = static_cast<std::size_t>(v.size());
        }
        if (static_cast<std::size_t>(v.size()) != dimension_) {
            report(owner + ": embedding dimension " + std::to_string(v.size()) + " differs from store dimension "
                   + std::to_string(dimension_));
            return;
        }
        if (! v.allFinite() || std::abs(v.norm() - 1.0) > norm_tolerance) {
            report(owner + ": embedding is not unit length");
        }
    }

    void check_topics()
    {
        dimension_ = c_.embedding_dimension;
        for (std::size_t i = 0; i < c_.topics.size(); ++i) {
            Topic const & t = c_.topics[i];
            std::string const name = "topic '" + t.id + "'";
            if (! ids_.insert(t.id).second) {
                report(name + ": duplicate topic id");
            }
            topics_[t.id] = &t;
            if (t.ordinal != i) {
                report(name + ": ordinal " + std::to_string(t.ordinal) + " does not match creation index "
                       + std::to_string(i));
            }
            if (t.level != 0 && t.level != 1) {
                report(name + ": level must be 0 or 1");
            }
            if (t.parent.has_value() != (t.level == 1)) {
                report(name + ": parent must be present exactly when level is 1");
            }
            for (auto const & [node_id, s] : t.member_similarities) {
                if (! (s >= -1.0 && s <= 1.0)) {
                    report(name + ": member similarity for '" + node_id + "' outside [-1, 1]");
                }
            }
            if (t.embedding.size() > 0) {
                check_embedding(name, t.embedding);
            }
        }
        for (Topic const & t : c_.topics) {
            if (t.parent) {
                auto it = topics_.find(*t.parent);
                if (it == topics_.end() || it->second->level != 0) {
                    report("topic '" + t.id + "': parent '" + *t.parent + "' is not a level-0 topic");
                }
            }
        }
    }

    void check_nodes()
    {
        std::set<std::size_t> seen;
        for (std::size_t i = 0; i < c_.nodes.size(); ++i) {
            ConversationNode const & n = c_.nodes[i];
            std::string const name = "node '" + n.id + "'";
            if (! seen.insert(n.seq_index).second) {
                report(name + ": duplicate seq_index " + std::to_string(n.seq_index));
            } else if (n.seq_index != i) {
                report(name + ": seq_index " + std::to_string(n.seq_index) + " breaks the contiguous order at position "
                       + std::to_string(i));
            }
            if (n.question.empty()) {
                report(name + ": question is empty");
            }
            if (n.answer.empty() && i + 1 != c_.nodes.size()) {
                report(name + ": only the newest node may have an empty answer");
            }
            if (n.embedding) {
                check_embedding(name, *n.embedding);
            }
            check_memberships(n, name);
        }
    }

    void check_memberships(ConversationNode const & n, std::string const & name)
    {
        if (n.memberships.empty()) {
            if (n.primary_topic) {
                report(name + ": primary topic set without memberships");
            }
            return;
        }
        Topic const * best = nullptr;
        double best_s = 0.0;
        // per parent topic, the strongest subtopic is exempt from the threshold
        std::unordered_map<std::string, std::pair<Topic const *, double>> best_sub;
        std::set<std::string> level0_ids;
        for (Membership const & m : n.memberships) {
            auto it = topics_.find(m.topic_id);
            if (it == topics_.end()) {
                report(name + ": membership refers to unknown topic '" + m.topic_id + "'");
                continue;
            }
            if (! (m.similarity >= -1.0 && m.similarity <= 1.0)) {
                report(name + ": similarity to '" + m.topic_id + "' outside [-1, 1]");
            }
            Topic const * t = it->second;
            if (t->level == 0) {
                level0_ids.insert(t->id);
                if (best == nullptr || m.similarity > best_s
                    || (m.similarity == best_s && t->ordinal < best->ordinal))
                {
                    best = t;
                    best_s = m.similarity;
                }
            } else if (t->parent) {
                auto & slot = best_sub[*t->parent];
                if (slot.first == nullptr || m.similarity > slot.second
                    || (m.similarity == slot.second && t->ordinal < slot.first->ordinal))
                {
                    slot = {t, m.similarity};
                }
            }
        }
        if (best == nullptr) {
            report(name + ": memberships contain no level-0 topic");
        } else if (n.primary_topic != best->id) {
            report(name + ": primary topic '" + n.primary_topic.value_or("<none>") + "' is not the argmax membership '"
                   + best->id + "'");
        }
        for (Membership const & m : n.memberships) {
            auto it = topics_.find(m.topic_id);
            if (it == topics_.end()) {
                continue;
            }
            Topic const * t = it->second;
            bool exempt = (t == best);
            if (t->level == 1 && t->parent) {
                exempt = best_sub[*t->parent].first == t;
                if (! level0_ids.contains(*t->parent)) {
                    report(name + ": subtopic '" + t->id + "' without membership in its parent");
                }
            }
            if (! exempt && m.similarity < c_.membership_threshold) {
                report(name + ": similarity to '" + t->id + "' is below the membership threshold");
            }
        }
    }

    Conversation const & c_;
    std::vector<std::string> violations_;
    std::set<std::string> ids_;
    std::unordered_map<std::string, Topic const *> topics_;
    std::size_t dimension_ = 0;
};

} // namespace

std::vector<std::string> validate_conversation(Conversation const & conversation)
{
    try {
        return Validator(conversation).run();
    } catch (std::exception const & e) {
        return {std::string("validation aborted: ") + e.what()};
    }
}

Topic const * find_topic(Conversation const & conversation, std::string_view topic_id) noexcept
{
    for (Topic const & t : conversation.topics) {
        if (t.id == topic_id) {
            return &t;
        }
    }
    return nullptr;
}

ConversationNode const * find_node(Conversation const & conversation, std::string_view node_id) noexcept
{
    for (ConversationNode const & n : conversation.nodes) {
        if (n.id == node_id) {
            return &n;
        }
    }
    return nullptr;
}

bool is_analyzed(Conversation const & conversation) noexcept
{
    if (conversation.topics.empty() || conversation.nodes.empty()) {
        return false;
    }
    for (ConversationNode const & n : conversation.nodes) {
        if (! n.primary_topic) {
            return false;
        }
    }
    return true;
}

std::vector<Topic const *> top_level_topics(Conversation const & conversation)
{
    std::vector<Topic const *> out;
    for (Topic const & t : conversation.topics) {
        if (t.level == 0) {
            out.push_back(&t);
        }
    }
    return out;
}

std::vector<std::size_t> primary_topic_indices(Conversation const & conversation)
{
    auto const top = top_level_topics(conversation);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < top.size(); ++i) {
        index.emplace(top[i]->id, i);
    }
    std::vector<std::size_t> out;
    out.reserve(conversation.nodes.size());
    for (ConversationNode const & n : conversation.nodes) {
        auto it = n.primary_topic ? index.find(*n.primary_topic) : index.end();
        if (it == index.end()) {
            throw Error(ErrorKind::state, "node '" + n.id + "' has no primary topic; analyze the conversation first");
        }
        out.push_back(it->second);
    }
    return out;
}

std::string embedding_text(ConversationNode const & node)
{
    return node.question + "\n\n" + node.answer;
}

} // namespace convmap
