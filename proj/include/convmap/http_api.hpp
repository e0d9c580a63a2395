#pragma once

#include "convmap/engine.hpp"

#include <nlohmann/json.hpp>

#include <exception>
#include <utility>

namespace httplib {
class Server;
}

namespace convmap {

/// Status code and {error, detail[, overshoot | line, column]} body for an
/// exception thrown by the engine.
[[nodiscard]] std::pair<int, nlohmann::json> error_response(std::exception_ptr error);

/// Mounts every /api route on `server`. The engine must outlive it.
void register_routes(httplib::Server & server, Engine & engine);

} // namespace convmap
