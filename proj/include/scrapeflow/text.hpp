#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace scrapeflow::text {

// HTML whitespace: space, tab, LF, FF, CR.
constexpr bool is_html_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\f' || c == '\r';
}

// Collapses runs of HTML whitespace to one space and trims both ends.
std::string normalize_whitespace(std::string_view in);

// Splits on runs of HTML whitespace, dropping empty tokens.
std::vector<std::string> split_whitespace(std::string_view in);

std::string to_lower_ascii(std::string_view in);

// ASCII case-insensitive substring test. An empty needle always matches.
bool icontains(std::string_view haystack, std::string_view needle);

bool iequals(std::string_view a, std::string_view b) noexcept;

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string trim(std::string_view in);

bool is_valid_utf8(std::string_view bytes) noexcept;

// Lowercase hex of the given bytes.
std::string to_hex(std::string_view bytes);

}  // namespace scrapeflow::text
