#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace convmap::text {

/// Lowercased runs of alphanumeric characters. Bytes >= 0x80 count as
/// word characters so multi-byte UTF-8 sequences stay inside one token.
[[nodiscard]] std::vector<std::string> split_words(std::string_view text);

[[nodiscard]] std::size_t utf8_length(std::string_view text) noexcept;

/// Longest prefix holding at most `max_chars` code points.
[[nodiscard]] std::string_view utf8_prefix(std::string_view text, std::size_t max_chars) noexcept;

/// FNV-1a over the bytes with the basis perturbed by `seed`, followed by a
/// splitmix64 finalizer. Stable across platforms.
[[nodiscard]] std::uint64_t hash64(std::string_view bytes, std::uint64_t seed) noexcept;

[[nodiscard]] std::uint64_t mix64(std::uint64_t value) noexcept;

[[nodiscard]] std::string trim(std::string_view text);

} // namespace convmap::text
