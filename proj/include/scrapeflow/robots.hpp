#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace scrapeflow {

// Robots exclusion rules for one user agent: the group naming the agent
// (merged if it appears several times), else the "*" group, else nothing.
// Longest matching pattern wins; on a tie Allow wins. Patterns support '*'
// and a trailing '$'.
class RobotsRules {
 public:
  static RobotsRules parse(std::string_view body, std::string_view user_agent);

  // `path` is the URL path plus optional query, starting with '/'.
  bool allowed(std::string_view path) const;

  std::size_t rule_count() const noexcept { return rules_.size(); }

 private:
  struct Rule {
    bool allow;
    std::string pattern;
  };
  std::vector<Rule> rules_;
};

// Matches a robots pattern against a path ('*' any run, '$' end anchor).
bool robots_pattern_matches(std::string_view pattern, std::string_view path);

}  // namespace scrapeflow
