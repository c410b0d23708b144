#include <gtest/gtest.h>

#include "scrapeflow/fetcher.hpp"
#include "scrapeflow/robots.hpp"

namespace scrapeflow {
namespace {

TEST(Robots, PatternMatching) {
  EXPECT_TRUE(robots_pattern_matches("/private", "/private/x"));
  EXPECT_TRUE(robots_pattern_matches("/*.pdf$", "/docs/a.pdf"));
  EXPECT_FALSE(robots_pattern_matches("/*.pdf$", "/docs/a.pdf?x=1"));
  EXPECT_TRUE(robots_pattern_matches("/a*b*c", "/axxbyyc"));
  EXPECT_FALSE(robots_pattern_matches("/a*b*c", "/axxcyyb"));
  EXPECT_TRUE(robots_pattern_matches("", "/anything"));
}

TEST(Robots, GroupSelectionAndPrecedence) {
  const char* body =
      "User-agent: *\n"
      "Disallow: /\n"
      "\n"
      "User-agent: ScrapeFlow\n"
      "Disallow: /private/\n"
      "Allow: /private/public\n"
      "# comment\n"
      "User-agent: other\n"
      "Disallow: /\n"
      "User-agent: scrapeflow\n"
      "Disallow: /tmp\n";
  auto rules = RobotsRules::parse(body, "scrapeflow");
  EXPECT_EQ(rules.rule_count(), 3u);
  EXPECT_TRUE(rules.allowed("/"));
  EXPECT_FALSE(rules.allowed("/private/x"));
  EXPECT_TRUE(rules.allowed("/private/public/page"));
  EXPECT_FALSE(rules.allowed("/tmp/file"));

  auto fallback = RobotsRules::parse(body, "somebot");
  EXPECT_FALSE(fallback.allowed("/index.html"));
  EXPECT_TRUE(fallback.allowed("/robots.txt"));
}

TEST(Robots, AllowWinsTiesAndEmptyDisallowAllowsAll) {
  auto tie = RobotsRules::parse("User-agent: *\nDisallow: /page\nAllow: /page\n", "scrapeflow");
  EXPECT_TRUE(tie.allowed("/page"));
  auto empty = RobotsRules::parse("User-agent: *\nDisallow:\n", "scrapeflow");
  EXPECT_TRUE(empty.allowed("/anything"));
  auto none = RobotsRules::parse("", "scrapeflow");
  EXPECT_TRUE(none.allowed("/anything"));
}

TEST(Consent, UserFlagThenRobots) {
  FetchRequest req;
  req.url = "http://example.test/private/a";
  req.consent = false;
  auto d = check_consent(req, std::string("User-agent: *\nDisallow: /private/\n"));
  EXPECT_FALSE(d.allowed);
  EXPECT_EQ(d.reason, DenyReason::User);

  req.consent = true;
  d = check_consent(req, std::string("User-agent: *\nDisallow: /private/\n"));
  EXPECT_FALSE(d.allowed);
  EXPECT_EQ(d.reason, DenyReason::Robots);

  EXPECT_TRUE(check_consent(req, std::nullopt).allowed);
  EXPECT_TRUE(check_consent(req, std::string("\xFF\xFE garbage")).allowed);
  req.respect_robots = false;
  EXPECT_TRUE(check_consent(req, std::string("User-agent: *\nDisallow: /\n")).allowed);
}

}  // namespace
}  // namespace scrapeflow
