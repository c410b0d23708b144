#pragma once

#include <optional>
#include <string_view>

namespace scrapeflow::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

// Messages below the threshold are dropped. Defaults to Warn, or to
// SCRAPEFLOW_LOG (debug|info|warn|error|off) when set.
void set_level(Level level);
std::optional<Level> parse_level(std::string_view name);
Level level();

void write(Level level, std::string_view message);

inline void debug(std::string_view m) { write(Level::Debug, m); }
inline void info(std::string_view m) { write(Level::Info, m); }
inline void warn(std::string_view m) { write(Level::Warn, m); }
inline void error(std::string_view m) { write(Level::Error, m); }

}  // namespace scrapeflow::log
