#include <gtest/gtest.h>

#include <algorithm>
#include <deque>
#include <random>
#include <regex>

#include "random_tree.hpp"
#include "scrapeflow/dom_graph.hpp"
#include "scrapeflow/errors.hpp"

namespace scrapeflow {
namespace {

// html > body > (div.card > p "Hello", p "  ", span "x")
DomGraph small_graph() {
  DomBuilder b;
  auto html = b.add_root("html");
  auto body = b.add_element(html, "body");
  auto div = b.add_element(body, "div", {{"class", "card  main"}});
  auto p1 = b.add_element(div, "p");
  b.append_text(p1, "  Hello\n world ");
  auto p2 = b.add_element(body, "p");
  b.append_text(p2, "  ");
  auto span = b.add_element(body, "span");
  b.append_text(span, "x");
  return std::move(b).build();
}

TEST(DomGraph, BuildDerivesClassesAndOwnText) {
  auto g = small_graph();
  EXPECT_EQ(g.size(), 6u);
  EXPECT_EQ(g.edge_count(), 5u);
  EXPECT_EQ(g.node(2).classes, (std::vector<std::string>{"card", "main"}));
  EXPECT_EQ(g.node(3).text, "Hello world");
  EXPECT_EQ(g.node(4).text, "");
  EXPECT_EQ(g.deep_text(2), "Hello world");
  EXPECT_EQ(g.deep_text(0), "Hello world x");
}

TEST(DomGraph, OwnTextJoinsRunsAroundChildren) {
  DomBuilder b;
  auto p = b.add_root("p");
  b.append_text(p, "a");
  auto em = b.add_element(p, "em");
  b.append_text(em, "b");
  b.append_text(p, "c");
  auto g = std::move(b).build();
  EXPECT_EQ(g.node(0).text, "a c");
  EXPECT_EQ(g.deep_text(0), "abc");
}

TEST(DomGraph, RejectsInvalidTrees) {
  DomNode a;
  a.id = 0;
  a.tag = "html";
  DomNode b;
  b.id = 1;
  b.tag = "p";
  b.parent = 0;
  // Child not listed in parent's children.
  EXPECT_THROW(DomGraph({a, b}, 0), InvalidGraph);
  a.children = {1};
  EXPECT_NO_THROW(DomGraph({a, b}, 0));
  // Cycle: the root has a parent.
  auto c = a;
  c.parent = 1;
  auto d = b;
  d.children = {0};
  EXPECT_THROW(DomGraph({c, d}, 0), InvalidGraph);
  EXPECT_THROW(DomGraph({}, 0), InvalidGraph);
  // Id mismatch.
  auto e = b;
  e.id = 7;
  EXPECT_THROW(DomGraph({a, e}, 0), InvalidGraph);
}

TEST(DomGraph, BuilderRejectsSecondRootAndBadParent) {
  DomBuilder b;
  b.add_root("html");
  EXPECT_THROW(b.add_root("html"), InvalidGraph);
  EXPECT_ANY_THROW(b.add_element(5, "p"));
}

TEST(TagSet, CaseInsensitiveAndNonEmpty) {
  TagSet tags{"P", "div"};
  EXPECT_TRUE(tags.contains("p"));
  EXPECT_TRUE(tags.contains("DIV"));
  EXPECT_FALSE(tags.contains("span"));
  EXPECT_THROW(TagSet(std::vector<std::string>{}), InvalidArgument);
  EXPECT_THROW(TagSet::parse_list(" , "), InvalidArgument);
  EXPECT_EQ(TagSet::parse_list("p, Li ,div").tags(), (std::set<std::string>{"div", "li", "p"}));
}

TEST(FilterRule, PassThroughSubstringRegex) {
  EXPECT_EQ(FilterRule::pass_through().apply("abc"), std::vector<std::string>{"abc"});
  EXPECT_TRUE(FilterRule::pass_through().apply("").empty());
  EXPECT_EQ(FilterRule::substring("b").apply("abc"), std::vector<std::string>{"abc"});
  EXPECT_TRUE(FilterRule::substring("z").apply("abc").empty());
  EXPECT_THROW(FilterRule::substring(""), InvalidRule);
  EXPECT_EQ(FilterRule::regex("[0-9]+").apply("a 12 b 345"),
            (std::vector<std::string>{"12", "345"}));
  // Empty matches are dropped rather than looping or emitting "".
  EXPECT_EQ(FilterRule::regex("x*").apply("axxb"), std::vector<std::string>{"xx"});
  EXPECT_THROW(FilterRule::regex("(unclosed"), InvalidRule);
}

TEST(Traverse, DepthFirstIsPreorderBreadthFirstIsLevelOrder) {
  auto g = small_graph();
  TagSet all{"html", "body", "div", "p", "span"};
  auto dfs = traverse(g, TraversalOrder::DepthFirst, all);
  auto bfs = traverse(g, TraversalOrder::BreadthFirst, all);
  EXPECT_EQ(dfs.matches, (std::vector<NodeId>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(bfs.matches, (std::vector<NodeId>{0, 1, 2, 4, 5, 3}));
  EXPECT_EQ(dfs.stats, bfs.stats);
  EXPECT_EQ(dfs.stats.n_visited, 6u);
}

TEST(ScrapeGraph, CountsOnlyNonEmptyFilterOutput) {
  auto g = small_graph();
  auto r = scrape_graph(g, TagSet{"p"}, FilterRule::pass_through());
  EXPECT_EQ(r.stats.n_visited, 6u);
  EXPECT_EQ(r.stats.m_relevant, 1u);
  ASSERT_EQ(r.extracted.size(), 1u);
  EXPECT_EQ(r.extracted[0].id, 3u);
  EXPECT_EQ(r.extracted[0].values, std::vector<std::string>{"Hello world"});
  EXPECT_DOUBLE_EQ(efficiency(r.stats), 1.0 / 6.0);
}

TEST(ScrapeGraph, NoMatchesGivesZeroEfficiency) {
  auto r = scrape_graph(small_graph(), TagSet{"table"}, FilterRule::pass_through());
  EXPECT_EQ(r.stats.m_relevant, 0u);
  EXPECT_EQ(efficiency(r.stats), 0.0);
}

TEST(Efficiency, RejectsUndefinedStats) {
  EXPECT_THROW(efficiency({0, 0}), InvalidStats);
  EXPECT_THROW(efficiency({3, 4}), InvalidStats);
  EXPECT_EQ(efficiency({4, 4}), 1.0);
}

// Recount from the node array, without traversal and with an independent
// normalization of the raw runs.
struct Recount {
  std::size_t n = 0;
  std::size_t m = 0;
};

std::string oracle_own_text(const DomNode& v) {
  static const std::regex ws("[ \t\n\f\r]+");
  std::string joined;
  for (std::size_t i = 0; i < v.runs.size(); ++i) joined += (i ? " " : "") + v.runs[i].text;
  auto collapsed = std::regex_replace(joined, ws, " ");
  auto b = collapsed.find_first_not_of(' ');
  if (b == std::string::npos) return "";
  return collapsed.substr(b, collapsed.find_last_not_of(' ') - b + 1);
}

Recount brute_force(const DomGraph& g, const std::set<std::string>& tags,
                    const std::optional<std::regex>& rx) {
  Recount r;
  for (const auto& v : g.nodes()) {
    ++r.n;
    if (!tags.count(v.tag)) continue;
    auto text = oracle_own_text(v);
    if (text.empty()) continue;
    if (rx) {
      bool any = false;
      for (std::sregex_iterator it(text.begin(), text.end(), *rx), end; it != end; ++it)
        any = any || it->length(0) > 0;
      if (!any) continue;
    }
    ++r.m;
  }
  return r;
}

TEST(ScrapeGraphProperty, EfficiencyMatchesBruteForceRecount) {
  std::mt19937_64 rng(20240501);
  const std::vector<std::pair<std::set<std::string>, std::optional<std::string>>> cases = {
      {{"p"}, std::nullopt},
      {{"div", "span", "li"}, std::nullopt},
      {{"p", "a", "td"}, std::string("[a-z]+")},
      {{"h2", "ul"}, std::string("[0-9]")},
  };
  for (int trial = 0; trial < 200; ++trial) {
    auto size = std::uniform_int_distribution<std::size_t>(5, 500)(rng);
    auto g = testing::random_tree(rng, size);
    for (const auto& [tag_names, pattern] : cases) {
      TagSet tags(std::vector<std::string>(tag_names.begin(), tag_names.end()));
      auto rule = pattern ? FilterRule::regex(*pattern) : FilterRule::pass_through();
      auto expected = brute_force(g, tag_names, pattern ? std::optional<std::regex>(*pattern)
                                                        : std::nullopt);
      for (auto order : {TraversalOrder::DepthFirst, TraversalOrder::BreadthFirst}) {
        auto r = scrape_graph(g, tags, rule, order);
        ASSERT_EQ(r.stats.n_visited, expected.n) << "trial " << trial;
        ASSERT_EQ(r.stats.m_relevant, expected.m) << "trial " << trial;
        ASSERT_NEAR(efficiency(r.stats),
                    static_cast<double>(expected.m) / static_cast<double>(expected.n), 1e-12);
      }
    }
  }
}

TEST(TraverseProperty, OrdersVisitEveryNodeOnce) {
  std::mt19937_64 rng(7);
  TagSet all{"html", "div", "p", "span", "li", "a", "h2", "ul", "td"};
  for (int trial = 0; trial < 50; ++trial) {
    auto g = testing::random_tree(rng, std::uniform_int_distribution<std::size_t>(1, 300)(rng));
    auto dfs = traverse(g, TraversalOrder::DepthFirst, all).matches;
    auto bfs = traverse(g, TraversalOrder::BreadthFirst, all).matches;
    ASSERT_EQ(dfs.size(), g.size());
    ASSERT_EQ(dfs, g.preorder());
    // BFS depth never decreases.
    auto depth = [&](NodeId id) {
      std::size_t d = 0;
      for (auto p = g.node(id).parent; p; p = g.node(*p).parent) ++d;
      return d;
    };
    for (std::size_t i = 1; i < bfs.size(); ++i) ASSERT_LE(depth(bfs[i - 1]), depth(bfs[i]));
    std::sort(dfs.begin(), dfs.end());
    std::sort(bfs.begin(), bfs.end());
    ASSERT_EQ(dfs, bfs);
  }
}

}  // namespace
}  // namespace scrapeflow
