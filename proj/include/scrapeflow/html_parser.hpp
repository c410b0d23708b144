#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "scrapeflow/dom_graph.hpp"

namespace scrapeflow {

// Parses a fetched body into a DomGraph with error-recovering HTML
// semantics. The root is always an `html` element (synthesized when the
// document has no <html> tag). Comments, doctypes and processing
// instructions are dropped; script and style elements are kept as nodes but
// own no text.
//
// Throws EmptyDocument for an empty body or a body without any element tag,
// and EncodingError when the bytes do not decode under the declared charset.
DomGraph parse_html(std::string_view body,
                    std::optional<std::string_view> encoding_hint = std::nullopt);

// Byte-order mark, then the hint, then a <meta charset> prescan of the first
// 1024 bytes. Declared charsets are decoded strictly. Undeclared bodies are
// taken as UTF-8 when valid and windows-1252 otherwise.
std::string decode_to_utf8(std::string_view body,
                           std::optional<std::string_view> encoding_hint);

// The charset named by a <meta charset=...> or
// <meta http-equiv content="...; charset=..."> within `head`, lowercased.
std::optional<std::string> sniff_meta_charset(std::string_view head);

// Charset parameter of a Content-Type header value, lowercased.
std::optional<std::string> charset_from_content_type(std::string_view content_type);

// Decodes character references in `raw` (text content rules).
std::string decode_entities(std::string_view raw);

// Indented tree dump used for golden files. One element per line with its
// attributes; non-empty text runs appear as quoted, normalized lines at their
// position among the children.
std::string dump_tree(const DomGraph& graph);

}  // namespace scrapeflow
