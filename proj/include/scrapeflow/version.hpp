#pragma once

#include <string_view>

namespace scrapeflow {

inline constexpr std::string_view kVersion = "0.1.0";
// Product token matched against robots.txt User-agent lines.
inline constexpr std::string_view kRobotsToken = "scrapeflow";

}  // namespace scrapeflow
