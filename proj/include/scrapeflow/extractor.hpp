#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "scrapeflow/dom_graph.hpp"

namespace scrapeflow {

// class name -> tag name ("subclass") -> contents, all in first-seen /
// document order.
class ClassContents {
 public:
  struct TagGroup {
    std::string tag;
    std::vector<std::string> contents;

    bool operator==(const TagGroup&) const = default;
  };

  struct ClassGroup {
    std::string class_name;
    std::vector<TagGroup> subclasses;

    bool operator==(const ClassGroup&) const = default;
  };

  struct Triple {
    std::string class_name;
    std::string tag;
    std::string content;

    bool operator==(const Triple&) const = default;
  };

  // Throws InvalidArgument for empty keys or empty content.
  void add(std::string_view class_name, std::string_view tag, std::string content);

  const std::vector<ClassGroup>& classes() const noexcept { return classes_; }
  const ClassGroup* find(std::string_view class_name) const;

  bool empty() const noexcept { return classes_.empty(); }
  std::size_t triple_count() const noexcept { return triples_; }
  std::vector<Triple> triples() const;

  // Keeps the (class, tag, content) triples for which pred returns true.
  template <class Pred>
  ClassContents filter(Pred&& pred) const {
    ClassContents out;
    for (const auto& cls : classes_)
      for (const auto& grp : cls.subclasses)
        for (const auto& c : grp.contents)
          if (pred(cls.class_name, grp.tag, c)) out.add(cls.class_name, grp.tag, c);
    return out;
  }

  friend bool operator==(const ClassContents& a, const ClassContents& b) {
    return a.classes_ == b.classes_;
  }

 private:
  std::vector<ClassGroup> classes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t triples_ = 0;
};

// {"<class>": {"subclasses": {"<tag>": ["content", ...]}}}, order preserved.
nlohmann::ordered_json to_json(const ClassContents& contents);
ClassContents class_contents_from_json(const nlohmann::ordered_json& j);

struct ExtractOptions {
  // Restrict to class-bearing elements whose tag is in the set.
  std::optional<TagSet> tags;
  // Applied to each element's deep text; every output becomes one content.
  FilterRule rule = FilterRule::pass_through();
};

struct Extraction {
  ClassContents contents;
  // n = nodes traversed, m = class-bearing nodes that produced content.
  TraversalStats stats;
};

// Document-order walk over class-bearing elements; class name is the class
// tokens joined by one space, content the element's deep text. Empty
// results are skipped, duplicates kept.
Extraction extract(const DomGraph& graph, const ExtractOptions& options = {});

ClassContents get_data(const DomGraph& graph);

// Triples whose content contains `needle`, ASCII case-insensitively.
// Throws InvalidArgument on an empty needle.
ClassContents search_by_string(const ClassContents& contents, std::string_view needle);

// Only the exact class_name entry, or nothing.
// Throws InvalidArgument on an empty class name.
ClassContents refine_by_class(const ClassContents& contents, std::string_view class_name);

struct RefinementQuery {
  enum class Mode { StringSearch, ClassSelect };
  Mode mode;
  std::string needle;

  // "string_search" | "class_select"; throws InvalidArgument otherwise.
  static RefinementQuery parse(std::string_view mode, std::string needle);
};

ClassContents refine(const ClassContents& contents, const RefinementQuery& query);

}  // namespace scrapeflow
