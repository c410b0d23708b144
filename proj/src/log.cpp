#include "scrapeflow/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace scrapeflow::log {

namespace {

Level initial_level() {
  const char* env = std::getenv("SCRAPEFLOW_LOG");
  if (!env) return Level::Warn;
  return parse_level(env).value_or(Level::Warn);
}

std::atomic<Level>& threshold() {
  static std::atomic<Level> lvl{initial_level()};
  return lvl;
}

constexpr const char* kNames[] = {"debug", "info", "warn", "error"};

}  // namespace

std::optional<Level> parse_level(std::string_view v) {
  if (v == "debug") return Level::Debug;
  if (v == "info") return Level::Info;
  if (v == "warn") return Level::Warn;
  if (v == "error") return Level::Error;
  if (v == "off") return Level::Off;
  return std::nullopt;
}

void set_level(Level level) { threshold().store(level); }
Level level() { return threshold().load(); }

void write(Level lvl, std::string_view message) {
  if (lvl < threshold().load() || lvl == Level::Off) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << "[scrapeflow " << kNames[static_cast<int>(lvl)] << "] " << message << '\n';
}

}  // namespace scrapeflow::log
