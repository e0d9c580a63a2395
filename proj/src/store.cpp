#include "convmap/store.hpp"

#include "convmap/error.hpp"
#include "convmap/file_io.hpp"
#include "convmap/json_io.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <map>

namespace convmap {

namespace {

constexpr int document_format = 1;

std::shared_ptr<std::mutex> mutex_for(std::filesystem::path const & file)
{
    static std::mutex registry_guard;
    static std::map<std::string, std::shared_ptr<std::mutex>> registry;
    std::lock_guard lock(registry_guard);
    auto & slot = registry[file.string()];
    if (! slot) {
        slot = std::make_shared<std::mutex>();
    }
    return slot;
}

bool valid_id(std::string const & id)
{
    if (id.empty() || id.size() > 64) {
        return false;
    }
    return std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
    });
}

} // namespace

Store::Lock::Lock(std::shared_ptr<std::mutex> mutex, std::filesystem::path const & file)
: mutex_(std::move(mutex))
{
    mutex_->lock();
    fd_ = ::open(file.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) {
        int const err = errno;
        mutex_->unlock();
        throw Error(ErrorKind::io, "cannot open lock file " + file.string() + ": " + std::strerror(err));
    }
    while (::flock(fd_, LOCK_EX) != 0) {
        if (errno != EINTR) {
            int const err = errno;
            ::close(fd_);
            mutex_->unlock();
            throw Error(ErrorKind::io, "cannot lock " + file.string() + ": " + std::strerror(err));
        }
    }
}

Store::Lock::Lock(Lock && other) noexcept
: mutex_(std::move(other.mutex_))
, fd_(std::exchange(other.fd_, -1))
{ }

Store::Lock::~Lock()
{
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    if (mutex_) {
        mutex_->unlock();
    }
}

Store::Store(std::filesystem::path root)
: root_(std::move(root))
{
    std::error_code ec;
    for (auto const & dir : {root_ / "conversations", embedding_cache_dir(), root_ / "locks"}) {
        std::filesystem::create_directories(dir, ec);
        if (ec) {
            throw Error(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
        }
    }
    root_ = std::filesystem::canonical(root_);
    if (! std::filesystem::exists(root_ / "meta.json")) {
        auto const guard = lock("store");
        if (! std::filesystem::exists(root_ / "meta.json")) {
            write_file_atomic(root_ / "meta.json", nlohmann::json{{"format", document_format}, {"next_conversation", 1}}.dump(2));
        }
    }
}

std::filesystem::path Store::document_path(std::string const & id) const
{
    if (! valid_id(id)) {
        throw Error(ErrorKind::argument, "invalid conversation id '" + id + "'");
    }
    return root_ / "conversations" / (id + ".json");
}

Store::Lock Store::lock(std::string const & id) const
{
    if (! valid_id(id)) {
        throw Error(ErrorKind::argument, "invalid conversation id '" + id + "'");
    }
    auto const file = root_ / "locks" / (id + ".lock");
    return Lock(mutex_for(file), file);
}

nlohmann::json Store::meta() const
{
    try {
        return nlohmann::json::parse(read_file(root_ / "meta.json"));
    } catch (nlohmann::json::exception const & e) {
        throw Error(ErrorKind::io, "store metadata is unreadable: " + std::string(e.what()));
    }
}

void Store::update_meta(nlohmann::json const & patch)
{
    auto const guard = lock("store");
    auto m = meta();
    m.merge_patch(patch);
    write_file_atomic(root_ / "meta.json", m.dump(2));
}

std::string Store::allocate_id()
{
    auto const guard = lock("store");
    auto m = meta();
    auto next = m.value("next_conversation", std::uint64_t{1});
    std::string id;
    do {
        id = "c" + std::to_string(next++);
    } while (std::filesystem::exists(document_path(id)));
    m["next_conversation"] = next;
    write_file_atomic(root_ / "meta.json", m.dump(2));
    return id;
}

bool Store::contains(std::string const & id) const
{
    return valid_id(id) && std::filesystem::exists(document_path(id));
}

StoredConversation Store::load(std::string const & id) const
{
    if (! contains(id)) {
        throw Error(ErrorKind::not_found, "conversation '" + id + "' not found");
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(document_path(id)));
    } catch (nlohmann::json::parse_error const & e) {
        throw Error(ErrorKind::io, "stored conversation '" + id + "' is unreadable: " + e.what());
    }
    auto stored = stored_from_json(doc);
    auto const violations = validate_conversation(stored.conversation);
    if (! violations.empty()) {
        throw Error(ErrorKind::schema, "stored conversation '" + id + "' is invalid: " + violations.front());
    }
    return stored;
}

void Store::save(StoredConversation const & stored)
{
    auto const violations = validate_conversation(stored.conversation);
    if (! violations.empty()) {
        throw Error(ErrorKind::state, "refusing to store an invalid conversation: " + violations.front());
    }
    write_file_atomic(document_path(stored.conversation.id), stored_to_json(stored).dump(1));
}

nlohmann::json stored_to_json(StoredConversation const & stored)
{
    nlohmann::json doc{{"format", document_format}, {"conversation", conversation_to_json(stored.conversation)}};
    if (stored.analysis) {
        doc["analysis"] = {{"assignment", assignment_to_json(stored.analysis->assignment)},
                           {"geometry", geometry_to_json(stored.analysis->geometry)},
                           {"budget", stored.analysis->budget}};
    } else {
        doc["analysis"] = nullptr;
    }
    return doc;
}

StoredConversation stored_from_json(nlohmann::json const & doc)
{
    try {
        if (doc.at("format").get<int>() != document_format) {
            throw Error(ErrorKind::schema, "unsupported conversation document format");
        }
        StoredConversation stored;
        stored.conversation = conversation_from_json(doc.at("conversation"));
        auto const & analysis = doc.at("analysis");
        if (! analysis.is_null()) {
            stored.analysis = AnalysisCache{assignment_from_json(analysis.at("assignment")),
                                            geometry_from_json(analysis.at("geometry")),
                                            analysis.at("budget").get<std::size_t>()};
        }
        return stored;
    } catch (nlohmann::json::exception const & e) {
        throw Error(ErrorKind::schema, "malformed conversation document: " + std::string(e.what()));
    }
}

} // namespace convmap
