#include "convmap/file_io.hpp"

#include "convmap/error.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <unistd.h>

namespace convmap {

std::string read_file(std::filesystem::path const & path)
{
    std::ifstream in(path, std::ios::binary);
    if (! in) {
        throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return std::move(buffer).str();
}

void write_file_atomic(std::filesystem::path const & path, std::string_view content)
{
    static std::atomic<unsigned> counter{0};
    std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "."
           + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) % 100000) + "."
           + std::to_string(counter++);

    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) {
        throw Error(ErrorKind::io, "cannot create '" + tmp.string() + "'");
    }
    std::size_t written = 0;
    while (written < content.size()) {
        auto n = ::write(fd, content.data() + written, content.size() - written);
        if (n < 0) {
            ::close(fd);
            std::filesystem::remove(tmp);
            throw Error(ErrorKind::io, "write failed for '" + tmp.string() + "'");
        }
        written += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error(ErrorKind::io, "cannot replace '" + path.string() + "': " + ec.message());
    }
}

} // namespace convmap
