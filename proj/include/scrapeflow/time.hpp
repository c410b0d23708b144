#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace scrapeflow {

using UtcTime = std::chrono::sys_time<std::chrono::milliseconds>;

// Injected wall clock. Nothing in the library reads the system clock
// directly except system_clock_now().
using Clock = std::function<UtcTime()>;

UtcTime system_clock_now();

// A clock frozen at `t`.
Clock fixed_clock(UtcTime t);

// YYYYMMDDTHHMMSSZ
std::string format_compact(UtcTime t);

// YYYY-MM-DDTHH:MM:SS.mmmZ
std::string format_iso8601(UtcTime t);

// Accepts YYYY-MM-DDTHH:MM:SS[.fff]Z.
std::optional<UtcTime> parse_iso8601(std::string_view s);

}  // namespace scrapeflow
