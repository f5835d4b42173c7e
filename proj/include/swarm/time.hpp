#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <string_view>

namespace swarm {

using Timestamp = std::chrono::time_point<std::chrono::system_clock, std::chrono::milliseconds>;
using Clock = std::function<Timestamp()>;

Timestamp now_utc();

/// A clock that starts at `start` and advances `step` on every call.
Clock stepping_clock(Timestamp start, std::chrono::milliseconds step);

/// ISO-8601 UTC, millisecond precision: 2025-04-14T10:12:00.000Z
std::string format_timestamp(Timestamp t);

/// Accepts `YYYY-MM-DDTHH:MM:SS[.fff]Z`; throws std::invalid_argument otherwise.
Timestamp parse_timestamp(std::string_view text);

} // namespace swarm
