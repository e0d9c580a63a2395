#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace convmap {

[[nodiscard]] std::string read_file(std::filesystem::path const & path);

/// Writes to a sibling temp file, flushes it, then renames over `path`, so a
/// crash leaves either the old or the new content.
void write_file_atomic(std::filesystem::path const & path, std::string_view content);

} // namespace convmap
