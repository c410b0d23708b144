#pragma once

// Cost models T = c1*n + c2*m (runtime) and M = c3*n + c4*m (memory), their
// least-squares fit, scrapability statistics and the tool-comparison report.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "scrapeflow/dom_graph.hpp"
#include "scrapeflow/extractor.hpp"

namespace scrapeflow {

// ---------------------------------------------------------------------------
// Cost model

struct CostConstants {
  double c1 = 0;  // ms per traversed node
  double c2 = 0;  // ms per relevant node
  double c3 = 0;  // MB per traversed node
  double c4 = 0;  // MB per relevant node

  // Throws InvalidArgument if any constant is negative or not finite.
  void validate() const;
};

// Throws InvalidStats if m > n.
double predict_runtime(const CostConstants& c, std::size_t n, std::size_t m);
double predict_memory(const CostConstants& c, std::size_t n, std::size_t m);

struct RunSample {
  std::size_t n = 0;
  std::size_t m = 0;
  double runtime_ms = 0;
  double memory_mb = 0;
};

struct FitResult {
  CostConstants constants;
  double rmse_runtime_ms = 0;
  double rmse_memory_mb = 0;
  std::size_t samples = 0;
};

// Non-negative least squares of runtime and memory on (n, m), no intercept.
// Throws DegenerateDesign if the design matrix is rank-deficient,
// InvalidStats for a sample with m > n and InvalidArgument for negative
// readings.
FitResult fit_constants(std::span<const RunSample> samples);

nlohmann::ordered_json to_json(const FitResult& fit);

// Columns n,m,runtime_ms,memory_mb with a header row.
std::vector<RunSample> parse_samples_csv(std::string_view data);

// Fixed per-node overhead of the memory proxy.
inline constexpr std::size_t kNodeOverheadBytes = 64;

// (extracted_text_bytes + 64 * n) / 2^20
double memory_proxy_mb(std::size_t n, std::size_t extracted_text_bytes);

// Runs extract() under a steady clock and reports n, m, wall time and the
// memory proxy.
RunSample measure_extraction(const DomGraph& graph, const ExtractOptions& options = {});

// ---------------------------------------------------------------------------
// Scrapability

// A percentage held as an integer number of hundredths.
struct Percent {
  std::int64_t hundredths = 0;

  double value() const noexcept { return static_cast<double>(hundredths) / 100.0; }
  // "96.00"
  std::string str() const;

  auto operator<=>(const Percent&) const = default;
};

// 100 * scrapable / total, rounded half-up to 2 decimals.
// Throws EmptyCategory when the total is zero.
Percent scrapability_rate(std::size_t scrapable, std::size_t not_scrapable);

struct CategoryStat {
  std::string category;
  std::size_t scrapable = 0;
  std::size_t not_scrapable = 0;
  Percent rate;

  // Computes the rate. Throws EmptyCategory / InvalidArgument.
  static CategoryStat make(std::string category, std::size_t scrapable,
                           std::size_t not_scrapable);
};

struct SurveyReport {
  std::vector<CategoryStat> categories;
  Percent mean;

  std::string to_csv() const;
  nlohmann::ordered_json to_json() const;
};

// Unweighted mean of the category rates. Throws InvalidArgument when empty.
SurveyReport aggregate_report(std::span<const CategoryStat> stats);

// Columns category,scrapable,not_scrapable with a header row.
std::vector<CategoryStat> parse_category_csv(std::string_view data);

enum class NotScrapableReason { HttpError, ConsentDenied, NonHtml, EmptyExtraction };

std::string_view to_string(NotScrapableReason reason);

struct FetchOutcome {
  enum class Kind { Completed, ConsentDenied, NetworkError };
  Kind kind = Kind::Completed;
  int status = 0;
  bool is_html = false;
};

struct Classification {
  bool scrapable = false;
  std::optional<NotScrapableReason> reason;
};

// Scrapable iff the fetch returned 2xx HTML and extraction produced at least
// one triple. `triples` is empty when extraction did not run.
Classification classify_scrapable(const FetchOutcome& fetch,
                                  std::optional<std::size_t> triples);

// ---------------------------------------------------------------------------
// Tool comparison

struct ToolRow {
  std::string tool;
  double runtime_model_ms = 0;
  double memory_model_mb = 0;
  double runtime_plain_ms = 0;
  double memory_plain_mb = 0;
};

// Columns tool,runtime_model_ms,memory_model_mb,runtime_plain_ms,
// memory_plain_mb. Throws MalformedFixture, also when there are no rows.
std::vector<ToolRow> parse_comparison_fixture(std::string_view data);

struct ComparisonReport {
  // Ascending by model runtime; rank i is rows[i - 1].
  std::vector<ToolRow> rows;

  const ToolRow& fastest() const { return rows.front(); }
  const ToolRow& slowest() const { return rows.back(); }

  std::string to_csv() const;
  // Chart-ready series for runtime and memory, with and without the model.
  nlohmann::ordered_json series() const;
};

// Throws MalformedFixture on an empty table or invalid numbers.
ComparisonReport render_comparison(std::vector<ToolRow> rows);

}  // namespace scrapeflow
