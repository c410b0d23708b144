#include "scrapeflow/extractor.hpp"

#include <algorithm>

#include "scrapeflow/errors.hpp"
#include "scrapeflow/text.hpp"

namespace scrapeflow {

void ClassContents::add(std::string_view class_name, std::string_view tag,
                        std::string content) {
  if (class_name.empty()) throw InvalidArgument("empty class name");
  if (tag.empty()) throw InvalidArgument("empty tag name");
  if (content.empty()) throw InvalidArgument("empty content");

  auto [it, inserted] = index_.try_emplace(std::string(class_name), classes_.size());
  if (inserted) classes_.push_back({std::string(class_name), {}});
  auto& groups = classes_[it->second].subclasses;
  auto grp = std::find_if(groups.begin(), groups.end(),
                          [&](const TagGroup& g) { return g.tag == tag; });
  if (grp == groups.end()) {
    groups.push_back({std::string(tag), {}});
    grp = std::prev(groups.end());
  }
  grp->contents.push_back(std::move(content));
  ++triples_;
}

const ClassContents::ClassGroup* ClassContents::find(std::string_view class_name) const {
  auto it = index_.find(std::string(class_name));
  return it == index_.end() ? nullptr : &classes_[it->second];
}

std::vector<ClassContents::Triple> ClassContents::triples() const {
  std::vector<Triple> out;
  out.reserve(triples_);
  for (const auto& cls : classes_)
    for (const auto& grp : cls.subclasses)
      for (const auto& c : grp.contents) out.push_back({cls.class_name, grp.tag, c});
  return out;
}

nlohmann::ordered_json to_json(const ClassContents& contents) {
  auto out = nlohmann::ordered_json::object();
  for (const auto& cls : contents.classes()) {
    auto subclasses = nlohmann::ordered_json::object();
    for (const auto& grp : cls.subclasses) subclasses[grp.tag] = grp.contents;
    out[cls.class_name] = {{"subclasses", std::move(subclasses)}};
  }
  return out;
}

ClassContents class_contents_from_json(const nlohmann::ordered_json& j) {
  ClassContents out;
  if (!j.is_object()) throw InvalidArgument("class contents must be an object");
  for (const auto& [class_name, data] : j.items()) {
    if (!data.is_object() || !data.contains("subclasses") ||
        !data["subclasses"].is_object()) {
      throw InvalidArgument("class entry lacks a subclasses object");
    }
    for (const auto& [tag, list] : data["subclasses"].items()) {
      for (const auto& c : list) out.add(class_name, tag, c.get<std::string>());
    }
  }
  return out;
}

Extraction extract(const DomGraph& graph, const ExtractOptions& options) {
  Extraction result;
  for (NodeId id : graph.preorder()) {
    ++result.stats.n_visited;
    const auto& v = graph.node(id);
    if (v.classes.empty()) continue;
    if (options.tags && !options.tags->contains(v.tag)) continue;
    auto values = options.rule.apply(graph.deep_text(id));
    if (values.empty()) continue;
    auto class_name = text::join(v.classes, " ");
    for (auto& value : values) result.contents.add(class_name, v.tag, std::move(value));
    ++result.stats.m_relevant;
  }
  return result;
}

ClassContents get_data(const DomGraph& graph) { return extract(graph).contents; }

ClassContents search_by_string(const ClassContents& contents, std::string_view needle) {
  if (needle.empty()) throw InvalidArgument("search needle must not be empty");
  return contents.filter([needle](const std::string&, const std::string&,
                                  const std::string& content) {
    return text::icontains(content, needle);
  });
}

ClassContents refine_by_class(const ClassContents& contents, std::string_view class_name) {
  if (class_name.empty()) throw InvalidArgument("class name must not be empty");
  return contents.filter([class_name](const std::string& cls, const std::string&,
                                      const std::string&) { return cls == class_name; });
}

RefinementQuery RefinementQuery::parse(std::string_view mode, std::string needle) {
  if (needle.empty()) throw InvalidArgument("refinement needle must not be empty");
  if (mode == "string_search") return {Mode::StringSearch, std::move(needle)};
  if (mode == "class_select") return {Mode::ClassSelect, std::move(needle)};
  throw InvalidArgument("unknown refinement mode: " + std::string(mode));
}

ClassContents refine(const ClassContents& contents, const RefinementQuery& query) {
  return query.mode == RefinementQuery::Mode::StringSearch
             ? search_by_string(contents, query.needle)
             : refine_by_class(contents, query.needle);
}

}  // namespace scrapeflow
