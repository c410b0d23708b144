#pragma once

#include <stdexcept>
#include <string>

namespace scrapeflow {

// Base of every error raised by the library. code() is a stable,
// machine-readable reason used by the service and CLI.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define SCRAPEFLOW_DEFINE_ERROR(Name, code_str)                  \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& message)                    \
        : Error(code_str, message) {}                            \
  };

SCRAPEFLOW_DEFINE_ERROR(InvalidArgument, "invalid_argument")
SCRAPEFLOW_DEFINE_ERROR(InvalidGraph, "invalid_graph")
SCRAPEFLOW_DEFINE_ERROR(InvalidRule, "invalid_rule")
SCRAPEFLOW_DEFINE_ERROR(InvalidStats, "invalid_stats")
SCRAPEFLOW_DEFINE_ERROR(EncodingError, "encoding_error")
SCRAPEFLOW_DEFINE_ERROR(EmptyDocument, "empty_document")
SCRAPEFLOW_DEFINE_ERROR(NonHtmlContent, "non_html")
SCRAPEFLOW_DEFINE_ERROR(DegenerateDesign, "degenerate_design")
SCRAPEFLOW_DEFINE_ERROR(EmptyCategory, "empty_category")
SCRAPEFLOW_DEFINE_ERROR(MalformedFixture, "malformed_fixture")
SCRAPEFLOW_DEFINE_ERROR(ValidationError, "validation_error")
SCRAPEFLOW_DEFINE_ERROR(StoreUnavailable, "store_unavailable")
SCRAPEFLOW_DEFINE_ERROR(UnknownUser, "unknown_user")

#undef SCRAPEFLOW_DEFINE_ERROR

}  // namespace scrapeflow
