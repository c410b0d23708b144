#include "scrapeflow/structurer.hpp"

#include <fstream>

#include "scrapeflow/csv.hpp"
#include "scrapeflow/errors.hpp"

namespace scrapeflow {

std::string sanitize_username(std::string_view username) {
  std::string out;
  out.reserve(username.size());
  for (char c : username) {
    bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
              (c >= '0' && c <= '9') || c == '_' || c == '.' || c == '-';
    out.push_back(ok ? c : '_');
  }
  return out.empty() ? "user" : out;
}

std::string generate_filename(std::string_view username, UtcTime timestamp) {
  return sanitize_username(username) + "_" + format_compact(timestamp) + ".csv";
}

CsvDocument to_csv(const ClassContents& contents, std::string_view username,
                   UtcTime timestamp) {
  if (username.empty()) throw InvalidArgument("username must not be empty");
  CsvDocument doc;
  doc.filename = generate_filename(username, timestamp);
  doc.rows.reserve(contents.triple_count());
  for (const auto& cls : contents.classes())
    for (const auto& grp : cls.subclasses)
      for (const auto& content : grp.contents)
        doc.rows.push_back({cls.class_name, grp.tag, content});
  return doc;
}

std::string render_bytes(const CsvDocument& doc) {
  std::string out = csv::render_row({std::string(kCsvHeader[0]),
                                     std::string(kCsvHeader[1]),
                                     std::string(kCsvHeader[2])});
  for (const auto& r : doc.rows) out += csv::render_row({r.class_name, r.tag, r.content});
  return out;
}

std::filesystem::path write_csv_file(const CsvDocument& doc,
                                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto path = dir / doc.filename;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  auto bytes = render_bytes(doc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed to write " + path.string());
  return path;
}

}  // namespace scrapeflow
