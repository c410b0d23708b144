#pragma once

// The page as a rooted tree G = (V, E): elements are nodes, parent -> child
// links are edges. Traversal, tag selection, rule-based filtering and the
// composed scrape live here; everything is a pure function of an immutable
// DomGraph.

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scrapeflow {

using NodeId = std::size_t;

// Raw (unnormalized) character data positioned among an element's children:
// the run sits before children[before_child].
struct TextRun {
  std::size_t before_child = 0;
  std::string text;

  bool operator==(const TextRun&) const = default;
};

struct DomNode {
  NodeId id = 0;
  std::string tag;
  std::vector<std::string> classes;
  std::map<std::string, std::string> attributes;
  // Normalized text owned directly by this element (descendants excluded).
  std::string text;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;
  std::vector<TextRun> runs;
};

class DomGraph {
 public:
  // Validates the tree invariants; throws InvalidGraph.
  DomGraph(std::vector<DomNode> nodes, NodeId root);

  NodeId root() const noexcept { return root_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return nodes_.size() - 1; }
  const DomNode& node(NodeId id) const { return nodes_.at(id); }
  std::span<const DomNode> nodes() const noexcept { return nodes_; }

  // Subtree text in document order, whitespace-normalized.
  std::string deep_text(NodeId id) const;

  // Node ids in document (pre-)order.
  std::vector<NodeId> preorder() const;

 private:
  void append_deep_text(NodeId id, std::string& out) const;

  std::vector<DomNode> nodes_;
  NodeId root_;
};

// Incremental construction used by the HTML parser and by test generators.
class DomBuilder {
 public:
  // Creates the root element. Must be called exactly once, first.
  NodeId add_root(std::string tag, std::map<std::string, std::string> attrs = {});
  NodeId add_element(NodeId parent, std::string tag,
                     std::map<std::string, std::string> attrs = {});
  void append_text(NodeId id, std::string_view raw);
  void merge_attributes(NodeId id, const std::map<std::string, std::string>& attrs);

  std::size_t size() const noexcept { return nodes_.size(); }
  const DomNode& node(NodeId id) const { return nodes_.at(id); }

  // Derives classes and own text, then validates.
  DomGraph build() &&;

 private:
  std::vector<DomNode> nodes_;
};

// Element names of interest. Stored lowercase; lookups are case-insensitive.
class TagSet {
 public:
  // Throws InvalidArgument when empty or when a name is blank.
  explicit TagSet(const std::vector<std::string>& tags);
  TagSet(std::initializer_list<std::string_view> tags);

  bool contains(std::string_view tag) const;
  const std::set<std::string>& tags() const noexcept { return tags_; }

  // Parses "p,div, li".
  static TagSet parse_list(std::string_view csv);

 private:
  std::set<std::string> tags_;
};

class FilterRule {
 public:
  enum class Kind { PassThrough, Substring, Regex };

  static FilterRule pass_through();
  // Throws InvalidRule on an empty pattern.
  static FilterRule substring(std::string pattern);
  // ECMAScript syntax. Throws InvalidRule if the pattern does not compile.
  static FilterRule regex(std::string pattern);

  Kind kind() const noexcept { return kind_; }
  const std::string& pattern() const noexcept { return pattern_; }

  // Applies the rule to a single text value. Empty input yields nothing;
  // empty regex matches are dropped.
  std::vector<std::string> apply(std::string_view text) const;

 private:
  FilterRule(Kind kind, std::string pattern);

  Kind kind_;
  std::string pattern_;
  std::shared_ptr<const std::regex> compiled_;
};

struct TraversalStats {
  std::size_t n_visited = 0;
  std::size_t m_relevant = 0;

  bool operator==(const TraversalStats&) const = default;
};

enum class TraversalOrder { DepthFirst, BreadthFirst };

struct TraversalResult {
  std::vector<NodeId> matches;
  TraversalStats stats;
};

TraversalResult traverse(const DomGraph& graph, TraversalOrder order,
                         const TagSet& tags);

std::vector<std::string> apply_filter(const DomNode& node, const FilterRule& rule);

// m / n. Throws InvalidStats when n == 0 or m > n.
double efficiency(const TraversalStats& stats);

struct NodeExtraction {
  NodeId id;
  std::vector<std::string> values;

  bool operator==(const NodeExtraction&) const = default;
};

struct ScrapeResult {
  std::vector<NodeExtraction> extracted;
  TraversalStats stats;
};

// traverse followed by apply_filter on each match. Only nodes with non-empty
// filter output appear in `extracted` and count toward m.
ScrapeResult scrape_graph(const DomGraph& graph, const TagSet& tags,
                          const FilterRule& rule,
                          TraversalOrder order = TraversalOrder::DepthFirst);

}  // namespace scrapeflow
