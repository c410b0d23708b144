#include "scrapeflow/robots.hpp"

#include "scrapeflow/text.hpp"

namespace scrapeflow {

namespace {

struct Line {
  std::string key;
  std::string value;
};

std::vector<Line> tokenize(std::string_view body) {
  std::vector<Line> lines;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    auto end = body.find_first_of("\r\n", pos);
    if (end == std::string_view::npos) end = body.size();
    auto line = body.substr(pos, end - pos);
    pos = end + 1;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    auto key = text::to_lower_ascii(text::trim(line.substr(0, colon)));
    if (key.empty()) continue;
    lines.push_back({std::move(key), text::trim(line.substr(colon + 1))});
  }
  return lines;
}

// The agent's product token up to the first '/' or space, e.g.
// "Scrapeflow/1.0" -> "scrapeflow".
std::string product_token(std::string_view agent) {
  auto end = agent.find_first_of("/ ");
  return text::to_lower_ascii(agent.substr(0, end));
}

}  // namespace

bool robots_pattern_matches(std::string_view pattern, std::string_view path) {
  bool anchored = !pattern.empty() && pattern.back() == '$';
  if (anchored) pattern.remove_suffix(1);

  // Iterative glob match with backtracking on the last '*'.
  std::size_t p = 0, s = 0;
  std::size_t star = std::string_view::npos, star_s = 0;
  while (s < path.size()) {
    if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      star_s = s;
    } else if (p < pattern.size() && pattern[p] == path[s]) {
      ++p;
      ++s;
    } else if (p == pattern.size() && !anchored) {
      return true;  // prefix match
    } else if (star != std::string_view::npos) {
      p = star + 1;
      s = ++star_s;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

RobotsRules RobotsRules::parse(std::string_view body, std::string_view user_agent) {
  const auto me = product_token(user_agent);
  std::vector<Rule> mine, wildcard;
  std::vector<std::string> agents;
  bool in_rules = false;  // rules seen since the last user-agent run

  for (auto& line : tokenize(body)) {
    if (line.key == "user-agent") {
      if (in_rules) {
        agents.clear();
        in_rules = false;
      }
      agents.push_back(product_token(line.value));
      continue;
    }
    if (line.key != "allow" && line.key != "disallow") continue;
    in_rules = true;
    if (line.value.empty()) continue;  // "Disallow:" permits everything
    Rule rule{line.key == "allow", line.value};
    for (const auto& a : agents) {
      if (a == me) {
        mine.push_back(rule);
      } else if (a == "*") {
        wildcard.push_back(rule);
      }
    }
  }

  RobotsRules out;
  bool named = false;
  // A group naming us exists even if it has no rules.
  for (auto& line : tokenize(body)) {
    if (line.key == "user-agent" && product_token(line.value) == me) named = true;
  }
  out.rules_ = named ? std::move(mine) : std::move(wildcard);
  return out;
}

bool RobotsRules::allowed(std::string_view path) const {
  if (path.empty()) path = "/";
  if (path == "/robots.txt") return true;
  const Rule* best = nullptr;
  for (const auto& r : rules_) {
    if (!robots_pattern_matches(r.pattern, path)) continue;
    if (!best || r.pattern.size() > best->pattern.size() ||
        (r.pattern.size() == best->pattern.size() && r.allow && !best->allow)) {
      best = &r;
    }
  }
  return !best || best->allow;
}

}  // namespace scrapeflow
