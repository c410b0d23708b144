#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "scrapeflow/extractor.hpp"
#include "scrapeflow/time.hpp"

namespace scrapeflow {

inline constexpr std::array<std::string_view, 3> kCsvHeader = {"Class", "Tag",
                                                              "Content"};

struct CsvRow {
  std::string class_name;
  std::string tag;
  std::string content;

  bool operator==(const CsvRow&) const = default;
};

struct CsvDocument {
  std::vector<CsvRow> rows;
  std::string filename;
};

// Maps every character outside [A-Za-z0-9_.-] to '_'. An empty result
// becomes "user".
std::string sanitize_username(std::string_view username);

// "<sanitized username>_<YYYYMMDDTHHMMSSZ>.csv"
std::string generate_filename(std::string_view username, UtcTime timestamp);

// Rows in class -> tag -> content order. Throws InvalidArgument on an empty
// username.
CsvDocument to_csv(const ClassContents& contents, std::string_view username,
                   UtcTime timestamp);

// UTF-8, LF line endings, RFC 4180 quoting, header first.
std::string render_bytes(const CsvDocument& doc);

// Writes render_bytes(doc) to dir/doc.filename and returns the path.
std::filesystem::path write_csv_file(const CsvDocument& doc,
                                     const std::filesystem::path& dir);

}  // namespace scrapeflow
