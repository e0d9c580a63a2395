#include "convmap/error.hpp"

namespace convmap {

std::string_view to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::argument: return "argument_error";
    case ErrorKind::parse: return "parse_error";
    case ErrorKind::schema: return "schema_error";
    case ErrorKind::structural: return "structural_error";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::state: return "state_error";
    case ErrorKind::budget: return "budget_error";
    case ErrorKind::capacity: return "capacity_error";
    case ErrorKind::provider: return "provider_error";
    case ErrorKind::io: return "io_error";
    }
    return "error";
}

int http_status(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::argument:
    case ErrorKind::parse:
    case ErrorKind::schema:
    case ErrorKind::structural:
    case ErrorKind::budget:
    case ErrorKind::capacity:
        return 400;
    case ErrorKind::not_found: return 404;
    case ErrorKind::state: return 409;
    case ErrorKind::provider: return 502;
    case ErrorKind::io: return 500;
    }
    return 500;
}

ParseError::ParseError(std::string const & message, std::size_t line, std::size_t column)
: Error(ErrorKind::parse,
        message + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")")
, line_(line)
, column_(column)
{ }

BudgetError::BudgetError(std::size_t total_tokens, std::size_t budget)
: Error(ErrorKind::budget,
        "context needs " + std::to_string(total_tokens) + " tokens but the budget is "
            + std::to_string(budget) + " (over by " + std::to_string(total_tokens - budget) + ")")
, overshoot_(total_tokens - budget)
{ }

} // namespace convmap
