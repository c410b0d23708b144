#include "scrapeflow/dom_graph.hpp"

#include <algorithm>
#include <deque>

#include "scrapeflow/errors.hpp"
#include "scrapeflow/text.hpp"

namespace scrapeflow {

// ---------------------------------------------------------------------------
// DomGraph

DomGraph::DomGraph(std::vector<DomNode> nodes, NodeId root)
    : nodes_(std::move(nodes)), root_(root) {
  const auto n = nodes_.size();
  if (n == 0) throw InvalidGraph("graph has no nodes");
  if (root_ >= n) throw InvalidGraph("root id out of range");

  std::size_t parentless = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = nodes_[i];
    if (v.id != i) throw InvalidGraph("node ids must be dense and ordered");
    if (v.tag.empty()) throw InvalidGraph("element with empty tag");
    if (!v.parent) {
      ++parentless;
      if (i != root_) throw InvalidGraph("parentless node that is not root");
    } else {
      if (*v.parent >= n) throw InvalidGraph("parent id out of range");
      const auto& siblings = nodes_[*v.parent].children;
      if (std::count(siblings.begin(), siblings.end(), i) != 1)
        throw InvalidGraph("parent does not list child exactly once");
    }
    for (NodeId c : v.children) {
      if (c >= n || nodes_[c].parent != i)
        throw InvalidGraph("child does not point back to parent");
    }
  }
  if (parentless != 1) throw InvalidGraph("graph must have exactly one root");

  // Reachability also rules out cycles: with n-1 parent links and every
  // node reached once from the root, the relation is a tree.
  std::vector<bool> seen(n, false);
  std::vector<NodeId> stack{root_};
  std::size_t reached = 0;
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    if (seen[id]) throw InvalidGraph("cycle detected");
    seen[id] = true;
    ++reached;
    for (NodeId c : nodes_[id].children) stack.push_back(c);
  }
  if (reached != n) throw InvalidGraph("nodes unreachable from root");
}

void DomGraph::append_deep_text(NodeId id, std::string& out) const {
  const auto& v = nodes_[id];
  auto run = v.runs.begin();
  for (std::size_t i = 0; i <= v.children.size(); ++i) {
    while (run != v.runs.end() && run->before_child == i) {
      out += run->text;
      ++run;
    }
    if (i < v.children.size()) append_deep_text(v.children[i], out);
  }
}

std::string DomGraph::deep_text(NodeId id) const {
  std::string raw;
  append_deep_text(id, raw);
  return text::normalize_whitespace(raw);
}

std::vector<NodeId> DomGraph::preorder() const {
  std::vector<NodeId> order;
  order.reserve(nodes_.size());
  std::vector<NodeId> stack{root_};
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    order.push_back(id);
    const auto& ch = nodes_[id].children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return order;
}

// ---------------------------------------------------------------------------
// DomBuilder

NodeId DomBuilder::add_root(std::string tag,
                            std::map<std::string, std::string> attrs) {
  if (!nodes_.empty()) throw InvalidGraph("root already added");
  DomNode v;
  v.id = 0;
  v.tag = std::move(tag);
  v.attributes = std::move(attrs);
  nodes_.push_back(std::move(v));
  return 0;
}

NodeId DomBuilder::add_element(NodeId parent, std::string tag,
                               std::map<std::string, std::string> attrs) {
  if (parent >= nodes_.size()) throw InvalidGraph("parent id out of range");
  DomNode v;
  v.id = nodes_.size();
  v.tag = std::move(tag);
  v.attributes = std::move(attrs);
  v.parent = parent;
  nodes_[parent].children.push_back(v.id);
  nodes_.push_back(std::move(v));
  return nodes_.back().id;
}

void DomBuilder::append_text(NodeId id, std::string_view raw) {
  if (raw.empty()) return;
  auto& v = nodes_.at(id);
  const auto pos = v.children.size();
  if (!v.runs.empty() && v.runs.back().before_child == pos) {
    v.runs.back().text.append(raw);
  } else {
    v.runs.push_back({pos, std::string(raw)});
  }
}

void DomBuilder::merge_attributes(NodeId id,
                                  const std::map<std::string, std::string>& attrs) {
  auto& v = nodes_.at(id);
  for (const auto& [k, val] : attrs) v.attributes.emplace(k, val);
}

DomGraph DomBuilder::build() && {
  for (auto& v : nodes_) {
    if (auto it = v.attributes.find("class"); it != v.attributes.end()) {
      v.classes = text::split_whitespace(it->second);
    }
    std::string own;
    for (const auto& run : v.runs) {
      if (!own.empty()) own.push_back(' ');
      own += run.text;
    }
    v.text = text::normalize_whitespace(own);
  }
  return DomGraph(std::move(nodes_), 0);
}

// ---------------------------------------------------------------------------
// TagSet

TagSet::TagSet(const std::vector<std::string>& tags) {
  for (const auto& t : tags) {
    auto name = text::to_lower_ascii(text::trim(t));
    if (name.empty()) throw InvalidArgument("tag set contains a blank name");
    tags_.insert(std::move(name));
  }
  if (tags_.empty()) throw InvalidArgument("tag set must not be empty");
}

TagSet::TagSet(std::initializer_list<std::string_view> tags)
    : TagSet(std::vector<std::string>(tags.begin(), tags.end())) {}

bool TagSet::contains(std::string_view tag) const {
  return tags_.count(text::to_lower_ascii(tag)) > 0;
}

TagSet TagSet::parse_list(std::string_view csv) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= csv.size()) {
    auto comma = csv.find(',', start);
    if (comma == std::string_view::npos) comma = csv.size();
    parts.emplace_back(csv.substr(start, comma - start));
    start = comma + 1;
  }
  return TagSet(parts);
}

// ---------------------------------------------------------------------------
// FilterRule

FilterRule::FilterRule(Kind kind, std::string pattern)
    : kind_(kind), pattern_(std::move(pattern)) {}

FilterRule FilterRule::pass_through() { return FilterRule(Kind::PassThrough, {}); }

FilterRule FilterRule::substring(std::string pattern) {
  if (pattern.empty()) throw InvalidRule("substring pattern must not be empty");
  return FilterRule(Kind::Substring, std::move(pattern));
}

FilterRule FilterRule::regex(std::string pattern) {
  FilterRule rule(Kind::Regex, std::move(pattern));
  try {
    rule.compiled_ = std::make_shared<const std::regex>(rule.pattern_,
                                                        std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw InvalidRule("regex does not compile: " + rule.pattern_ + " (" +
                      e.what() + ")");
  }
  return rule;
}

std::vector<std::string> FilterRule::apply(std::string_view text) const {
  std::vector<std::string> out;
  if (text.empty()) return out;
  switch (kind_) {
    case Kind::PassThrough:
      out.emplace_back(text);
      break;
    case Kind::Substring:
      if (text.find(pattern_) != std::string_view::npos) out.emplace_back(text);
      break;
    case Kind::Regex: {
      using It = std::regex_iterator<std::string_view::const_iterator>;
      for (It it(text.begin(), text.end(), *compiled_), end; it != end; ++it) {
        if (it->length(0) > 0) out.push_back(it->str(0));
      }
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Traversal

namespace {

std::vector<NodeId> visit_order(const DomGraph& g, TraversalOrder order) {
  if (order == TraversalOrder::DepthFirst) return g.preorder();
  std::vector<NodeId> out;
  out.reserve(g.size());
  std::deque<NodeId> queue{g.root()};
  while (!queue.empty()) {
    NodeId id = queue.front();
    queue.pop_front();
    out.push_back(id);
    for (NodeId c : g.node(id).children) queue.push_back(c);
  }
  return out;
}

}  // namespace

TraversalResult traverse(const DomGraph& graph, TraversalOrder order,
                         const TagSet& tags) {
  TraversalResult result;
  for (NodeId id : visit_order(graph, order)) {
    ++result.stats.n_visited;
    const auto& v = graph.node(id);
    if (!tags.contains(v.tag)) continue;
    result.matches.push_back(id);
    if (!v.text.empty()) ++result.stats.m_relevant;
  }
  return result;
}

std::vector<std::string> apply_filter(const DomNode& node, const FilterRule& rule) {
  return rule.apply(node.text);
}

double efficiency(const TraversalStats& stats) {
  if (stats.n_visited == 0) throw InvalidStats("efficiency undefined for n = 0");
  if (stats.m_relevant > stats.n_visited)
    throw InvalidStats("relevant count exceeds visited count");
  return static_cast<double>(stats.m_relevant) /
         static_cast<double>(stats.n_visited);
}

ScrapeResult scrape_graph(const DomGraph& graph, const TagSet& tags,
                          const FilterRule& rule, TraversalOrder order) {
  auto walk = traverse(graph, order, tags);
  ScrapeResult result;
  result.stats.n_visited = walk.stats.n_visited;
  for (NodeId id : walk.matches) {
    auto values = apply_filter(graph.node(id), rule);
    if (values.empty()) continue;
    result.extracted.push_back({id, std::move(values)});
  }
  result.stats.m_relevant = result.extracted.size();
  return result;
}

}  // namespace scrapeflow
