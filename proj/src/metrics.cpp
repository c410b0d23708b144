#include "scrapeflow/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "scrapeflow/csv.hpp"
#include "scrapeflow/errors.hpp"
#include "scrapeflow/text.hpp"

namespace scrapeflow {

namespace {

void check_counts(std::size_t n, std::size_t m) {
  if (m > n) throw InvalidStats("relevant count m exceeds traversed count n");
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

double parse_double(const std::string& s, const char* what) {
  std::size_t used = 0;
  double v;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InvalidArgument(std::string("not a number in column ") + what + ": '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v))
    throw InvalidArgument(std::string("not a number in column ") + what + ": '" + s + "'");
  return v;
}

std::size_t parse_count(const std::string& s, const char* what) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw InvalidArgument(std::string("not a count in column ") + what + ": '" + s + "'");
  return static_cast<std::size_t>(std::stoull(s));
}

// Round-half-up of num / den for non-negative integers.
std::int64_t div_round_half_up(std::int64_t num, std::int64_t den) {
  return (2 * num + den) / (2 * den);
}

struct Coefficients {
  double a = 0;
  double b = 0;
};

double sse(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Coefficients c) {
  Eigen::Vector2d beta(c.a, c.b);
  return (x * beta - y).squaredNorm();
}

// Two-variable NNLS by active-set enumeration.
Coefficients nnls2(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr,
                   const Eigen::Vector2d& scale) {
  Eigen::Vector2d scaled = qr.solve(y);
  Coefficients full{scaled(0) / scale(0), scaled(1) / scale(1)};
  if (full.a >= 0 && full.b >= 0) return full;

  auto single = [&](int col) {
    double num = x.col(col).dot(y);
    double den = x.col(col).squaredNorm();
    return std::max(0.0, num / den);
  };
  Coefficients only_a{single(0), 0};
  Coefficients only_b{0, single(1)};
  return sse(x, y, only_a) <= sse(x, y, only_b) ? only_a : only_b;
}

double rmse(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Coefficients c) {
  return std::sqrt(sse(x, y, c) / static_cast<double>(y.size()));
}

}  // namespace

// ---------------------------------------------------------------------------
// Cost model

void CostConstants::validate() const {
  for (double v : {c1, c2, c3, c4}) {
    if (!std::isfinite(v) || v < 0) throw InvalidArgument("cost constants must be >= 0");
  }
}

double predict_runtime(const CostConstants& c, std::size_t n, std::size_t m) {
  check_counts(n, m);
  return c.c1 * static_cast<double>(n) + c.c2 * static_cast<double>(m);
}

double predict_memory(const CostConstants& c, std::size_t n, std::size_t m) {
  check_counts(n, m);
  return c.c3 * static_cast<double>(n) + c.c4 * static_cast<double>(m);
}

FitResult fit_constants(std::span<const RunSample> samples) {
  const auto k = static_cast<Eigen::Index>(samples.size());
  if (k < 2) throw DegenerateDesign("at least two samples are required");

  Eigen::MatrixXd x(k, 2);
  Eigen::VectorXd runtime(k), memory(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    check_counts(s.n, s.m);
    if (!(s.runtime_ms >= 0) || !(s.memory_mb >= 0))
      throw InvalidArgument("runtime and memory readings must be >= 0");
    x(i, 0) = static_cast<double>(s.n);
    x(i, 1) = static_cast<double>(s.m);
    runtime(i) = s.runtime_ms;
    memory(i) = s.memory_mb;
  }

  // Column scaling keeps the rank decision independent of units.
  Eigen::Vector2d scale(x.col(0).norm(), x.col(1).norm());
  if (scale(0) == 0 || scale(1) == 0)
    throw DegenerateDesign("design matrix has an all-zero column");
  Eigen::MatrixXd scaled = x;
  scaled.col(0) /= scale(0);
  scaled.col(1) /= scale(1);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  if (qr.rank() < 2) throw DegenerateDesign("(n, m) design matrix is rank-deficient");

  auto t = nnls2(x, runtime, qr, scale);
  auto mem = nnls2(x, memory, qr, scale);

  FitResult out;
  out.constants = {t.a, t.b, mem.a, mem.b};
  out.rmse_runtime_ms = rmse(x, runtime, t);
  out.rmse_memory_mb = rmse(x, memory, mem);
  out.samples = samples.size();
  return out;
}

nlohmann::ordered_json to_json(const FitResult& fit) {
  return {{"c1", fit.constants.c1},
          {"c2", fit.constants.c2},
          {"c3", fit.constants.c3},
          {"c4", fit.constants.c4},
          {"rmse_runtime_ms", fit.rmse_runtime_ms},
          {"rmse_memory_mb", fit.rmse_memory_mb},
          {"samples", fit.samples}};
}

std::vector<RunSample> parse_samples_csv(std::string_view data) {
  auto rows = csv::parse(data);
  const csv::Row header = {"n", "m", "runtime_ms", "memory_mb"};
  if (rows.empty() || rows.front() != header)
    throw InvalidArgument("samples file must start with header n,m,runtime_ms,memory_mb");
  std::vector<RunSample> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() == 1 && r[0].empty()) continue;
    if (r.size() != 4) throw InvalidArgument("samples row must have 4 fields");
    out.push_back({parse_count(r[0], "n"), parse_count(r[1], "m"),
                   parse_double(r[2], "runtime_ms"), parse_double(r[3], "memory_mb")});
  }
  return out;
}

double memory_proxy_mb(std::size_t n, std::size_t extracted_text_bytes) {
  return static_cast<double>(extracted_text_bytes + kNodeOverheadBytes * n) /
         static_cast<double>(1 << 20);
}

RunSample measure_extraction(const DomGraph& graph, const ExtractOptions& options) {
  auto start = std::chrono::steady_clock::now();
  auto result = extract(graph, options);
  auto stop = std::chrono::steady_clock::now();

  std::size_t bytes = 0;
  for (const auto& cls : result.contents.classes())
    for (const auto& grp : cls.subclasses)
      for (const auto& c : grp.contents) bytes += c.size();

  RunSample s;
  s.n = result.stats.n_visited;
  s.m = result.stats.m_relevant;
  s.runtime_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  s.memory_mb = memory_proxy_mb(s.n, bytes);
  return s;
}

// ---------------------------------------------------------------------------
// Scrapability

std::string Percent::str() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%02lld",
                static_cast<long long>(hundredths / 100),
                static_cast<long long>(hundredths % 100));
  return buf;
}

Percent scrapability_rate(std::size_t scrapable, std::size_t not_scrapable) {
  const auto total = static_cast<std::int64_t>(scrapable + not_scrapable);
  if (total == 0) throw EmptyCategory("category has no sites");
  return {div_round_half_up(10000 * static_cast<std::int64_t>(scrapable), total)};
}

CategoryStat CategoryStat::make(std::string category, std::size_t scrapable,
                                std::size_t not_scrapable) {
  if (text::trim(category).empty()) throw InvalidArgument("category label must not be empty");
  CategoryStat s;
  s.rate = scrapability_rate(scrapable, not_scrapable);
  s.category = std::move(category);
  s.scrapable = scrapable;
  s.not_scrapable = not_scrapable;
  return s;
}

SurveyReport aggregate_report(std::span<const CategoryStat> stats) {
  if (stats.empty()) throw InvalidArgument("survey report needs at least one category");
  SurveyReport report;
  std::int64_t sum = 0;
  for (const auto& s : stats) {
    auto checked = CategoryStat::make(s.category, s.scrapable, s.not_scrapable);
    if (checked.rate != s.rate) throw InvalidArgument("category rate does not match counts");
    sum += s.rate.hundredths;
    report.categories.push_back(std::move(checked));
  }
  report.mean = {div_round_half_up(sum, static_cast<std::int64_t>(stats.size()))};
  return report;
}

std::string SurveyReport::to_csv() const {
  std::vector<csv::Row> rows;
  for (const auto& c : categories) {
    rows.push_back({c.category, std::to_string(c.scrapable),
                    std::to_string(c.not_scrapable), c.rate.str()});
  }
  rows.push_back({"Average", "", "", mean.str()});
  return csv::render({"Category", "Scrapable", "Not Scrapable", "Scrapability Rate"}, rows);
}

nlohmann::ordered_json SurveyReport::to_json() const {
  auto cats = nlohmann::ordered_json::array();
  for (const auto& c : categories) {
    cats.push_back({{"category", c.category},
                    {"scrapable", c.scrapable},
                    {"not_scrapable", c.not_scrapable},
                    {"rate", c.rate.str()}});
  }
  return {{"categories", std::move(cats)}, {"mean_rate", mean.str()}};
}

std::vector<CategoryStat> parse_category_csv(std::string_view data) {
  auto rows = csv::parse(data);
  const csv::Row header = {"category", "scrapable", "not_scrapable"};
  if (rows.empty() || rows.front() != header)
    throw InvalidArgument("category file must start with header category,scrapable,not_scrapable");
  std::vector<CategoryStat> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() == 1 && r[0].empty()) continue;
    if (r.size() != 3) throw InvalidArgument("category row must have 3 fields");
    out.push_back(CategoryStat::make(r[0], parse_count(r[1], "scrapable"),
                                     parse_count(r[2], "not_scrapable")));
  }
  return out;
}

std::string_view to_string(NotScrapableReason reason) {
  switch (reason) {
    case NotScrapableReason::HttpError: return "http_error";
    case NotScrapableReason::ConsentDenied: return "consent_denied";
    case NotScrapableReason::NonHtml: return "non_html";
    case NotScrapableReason::EmptyExtraction: return "empty_extraction";
  }
  return "unknown";
}

Classification classify_scrapable(const FetchOutcome& fetch,
                                  std::optional<std::size_t> triples) {
  using Kind = FetchOutcome::Kind;
  if (fetch.kind == Kind::ConsentDenied) return {false, NotScrapableReason::ConsentDenied};
  if (fetch.kind == Kind::NetworkError || fetch.status < 200 || fetch.status > 299)
    return {false, NotScrapableReason::HttpError};
  if (!fetch.is_html) return {false, NotScrapableReason::NonHtml};
  if (!triples || *triples == 0) return {false, NotScrapableReason::EmptyExtraction};
  return {true, std::nullopt};
}

// ---------------------------------------------------------------------------
// Tool comparison

std::vector<ToolRow> parse_comparison_fixture(std::string_view data) {
  std::vector<csv::Row> rows;
  try {
    rows = csv::parse(data);
  } catch (const InvalidArgument& e) {
    throw MalformedFixture(e.what());
  }
  const csv::Row header = {"tool", "runtime_model_ms", "memory_model_mb",
                           "runtime_plain_ms", "memory_plain_mb"};
  if (rows.empty() || rows.front() != header)
    throw MalformedFixture("fixture must start with header " + text::join(header, ","));
  std::vector<ToolRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() == 1 && r[0].empty()) continue;
    if (r.size() != 5) throw MalformedFixture("fixture row " + std::to_string(i) + " needs 5 fields");
    if (text::trim(r[0]).empty()) throw MalformedFixture("fixture row without tool name");
    try {
      out.push_back({r[0], parse_double(r[1], "runtime_model_ms"),
                     parse_double(r[2], "memory_model_mb"),
                     parse_double(r[3], "runtime_plain_ms"),
                     parse_double(r[4], "memory_plain_mb")});
    } catch (const InvalidArgument& e) {
      throw MalformedFixture(e.what());
    }
  }
  if (out.empty()) throw MalformedFixture("comparison fixture has no rows");
  return out;
}

ComparisonReport render_comparison(std::vector<ToolRow> rows) {
  if (rows.empty()) throw MalformedFixture("comparison fixture has no rows");
  for (const auto& r : rows) {
    for (double v : {r.runtime_model_ms, r.memory_model_mb, r.runtime_plain_ms,
                     r.memory_plain_mb}) {
      if (!std::isfinite(v) || v < 0) throw MalformedFixture("negative or non-finite value for " + r.tool);
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ToolRow& a, const ToolRow& b) {
    if (a.runtime_model_ms != b.runtime_model_ms) return a.runtime_model_ms < b.runtime_model_ms;
    return a.tool < b.tool;
  });
  return {std::move(rows)};
}

std::string ComparisonReport::to_csv() const {
  std::vector<csv::Row> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out.push_back({std::to_string(i + 1), r.tool, fixed2(r.runtime_model_ms),
                   fixed2(r.memory_model_mb), fixed2(r.runtime_plain_ms),
                   fixed2(r.memory_plain_mb)});
  }
  return csv::render({"rank", "tool", "runtime_model_ms", "memory_model_mb",
                      "runtime_plain_ms", "memory_plain_mb"},
                     out);
}

nlohmann::ordered_json ComparisonReport::series() const {
  auto labels = nlohmann::ordered_json::array();
  auto rt_model = nlohmann::ordered_json::array(), rt_plain = rt_model;
  auto mem_model = rt_model, mem_plain = rt_model;
  for (const auto& r : rows) {
    labels.push_back(r.tool);
    rt_model.push_back(r.runtime_model_ms);
    rt_plain.push_back(r.runtime_plain_ms);
    mem_model.push_back(r.memory_model_mb);
    mem_plain.push_back(r.memory_plain_mb);
  }
  return {{"labels", labels},
          {"runtime_ms", {{"with_model", rt_model}, {"without_model", rt_plain}}},
          {"memory_mb", {{"with_model", mem_model}, {"without_model", mem_plain}}},
          {"fastest", rows.front().tool},
          {"slowest", rows.back().tool}};
}

}  // namespace scrapeflow
