#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace convmap {

enum class ErrorKind {
    argument,
    parse,
    schema,
    structural,
    not_found,
    state,
    budget,
    capacity,
    provider,
    io,
};

[[nodiscard]] std::string_view to_string(ErrorKind kind) noexcept;

/// HTTP status class the service reports for an error of this kind.
[[nodiscard]] int http_status(ErrorKind kind) noexcept;

class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, std::string const & message)
    : std::runtime_error(message)
    , kind_(kind)
    { }

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Malformed input text; line and column are 1-based.
class ParseError : public Error
{
public:
    ParseError(std::string const & message, std::size_t line, std::size_t column);

    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class BudgetError : public Error
{
public:
    BudgetError(std::size_t total_tokens, std::size_t budget);

    [[nodiscard]] std::size_t overshoot() const noexcept { return overshoot_; }

private:
    std::size_t overshoot_;
};

class ProviderError : public Error
{
public:
    ProviderError(std::string const & message, bool retryable)
    : Error(ErrorKind::provider, message)
    , retryable_(retryable)
    { }

    [[nodiscard]] bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

} // namespace convmap
