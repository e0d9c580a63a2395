#pragma once

#include "convmap/global_layout.hpp"
#include "convmap/model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace convmap {

/// Row assignment and geometry computed by the last analysis.
struct AnalysisCache
{
    RowAssignment assignment;
    GlobalGeometry geometry;
    std::size_t budget = 0;
};

struct StoredConversation
{
    Conversation conversation;
    std::optional<AnalysisCache> analysis;
};

/// Directory layout:
///   meta.json                  store metadata and the id counter
///   conversations/<id>.json    one document per conversation
///   cache/embeddings/          embedding cache
///   locks/                     per-conversation lock files
/// Documents are replaced atomically, so readers never need the lock.
class Store
{
public:
    explicit Store(std::filesystem::path root);

    [[nodiscard]] std::filesystem::path const & root() const noexcept { return root_; }
    [[nodiscard]] std::filesystem::path embedding_cache_dir() const { return root_ / "cache" / "embeddings"; }

    /// Next "c<N>" id; safe across processes sharing the store.
    [[nodiscard]] std::string allocate_id();

    [[nodiscard]] bool contains(std::string const & id) const;
    /// Throws Error(not_found) for unknown ids and Error(schema) for a
    /// document that fails validation.
    [[nodiscard]] StoredConversation load(std::string const & id) const;
    void save(StoredConversation const & stored);

    [[nodiscard]] nlohmann::json meta() const;
    /// Merges `patch` into meta.json under the store lock.
    void update_meta(nlohmann::json const & patch);

    /// Exclusive writer lock on one conversation: an in-process mutex plus
    /// flock on locks/<id>.lock, so threads and processes both serialize.
    class Lock
    {
    public:
        Lock(Lock &&) noexcept;
        Lock & operator = (Lock &&) = delete;
        Lock(Lock const &) = delete;
        Lock & operator = (Lock const &) = delete;
        ~Lock();

    private:
        friend class Store;
        Lock(std::shared_ptr<std::mutex> mutex, std::filesystem::path const & file);

        std::shared_ptr<std::mutex> mutex_;
        int fd_ = -1;
    };

    [[nodiscard]] Lock lock(std::string const & id) const;

private:
    [[nodiscard]] std::filesystem::path document_path(std::string const & id) const;

    std::filesystem::path root_;
};

[[nodiscard]] nlohmann::json stored_to_json(StoredConversation const & stored);
[[nodiscard]] StoredConversation stored_from_json(nlohmann::json const & doc);

} // namespace convmap
