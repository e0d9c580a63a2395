#pragma once

#include "convmap/ingest.hpp"
#include "convmap/model.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace convmap::testing {

inline Conversation make_conversation(std::vector<std::pair<std::string, std::string>> const & rounds,
                                      std::string id = "c-test")
{
    RawExport raw;
    raw.title = "fixture";
    for (auto const & [q, a] : rounds) {
        raw.messages.push_back({Role::user, q, std::nullopt});
        if (! a.empty()) {
            raw.messages.push_back({Role::assistant, a, std::nullopt});
        }
    }
    Conversation c;
    c.id = std::move(id);
    c.title = raw.title;
    c.nodes = pair_messages(raw);
    return c;
}

inline std::filesystem::path sample_export_path()
{
    return std::filesystem::path(CONVMAP_SOURCE_DIR) / "data" / "sample_export.json";
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir
{
public:
    explicit TempDir(std::string const & tag)
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path()
                / ("convmap-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }

    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }

    TempDir(TempDir const &) = delete;
    TempDir & operator = (TempDir const &) = delete;

    [[nodiscard]] std::filesystem::path const & path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace convmap::testing
