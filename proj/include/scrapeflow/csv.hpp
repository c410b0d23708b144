#pragma once

#include <string>
#include <string_view>
#include <vector>

// RFC 4180 primitives shared by the structured export and the report and
// fixture files. Output always uses LF line endings.
namespace scrapeflow::csv {

using Row = std::vector<std::string>;

// Quotes the field iff it contains a comma, a double quote, CR or LF;
// embedded quotes are doubled.
std::string escape_field(std::string_view field);

std::string render_row(const Row& row);

std::string render(const Row& header, const std::vector<Row>& rows);

// Parses RFC 4180 text (CRLF or LF line endings; a trailing newline is
// optional). Throws InvalidArgument on an unterminated quoted field.
std::vector<Row> parse(std::string_view data);

}  // namespace scrapeflow::csv
