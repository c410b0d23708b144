#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "paths.hpp"
#include "scrapeflow/errors.hpp"
#include "scrapeflow/html_parser.hpp"
#include "scrapeflow/metrics.hpp"

namespace scrapeflow {
namespace {

const CostConstants kTruth{0.5, 2.0, 0.01, 0.03};

std::vector<std::pair<std::size_t, std::size_t>> design() {
  return {{100, 10}, {250, 40}, {400, 25}, {800, 200}, {1200, 90},
          {1500, 600}, {2000, 150}, {3000, 1200}, {4500, 300}, {6000, 2500}};
}

std::vector<RunSample> generate(const CostConstants& c, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> eps(0.0, noise);
  std::vector<RunSample> out;
  for (auto [n, m] : design()) {
    double nn = static_cast<double>(n), mm = static_cast<double>(m);
    out.push_back({n, m, (c.c1 * nn + c.c2 * mm) * (1 + eps(rng)),
                   (c.c3 * nn + c.c4 * mm) * (1 + eps(rng))});
  }
  return out;
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

// Unconstrained least squares through the 2x2 normal equations.
std::pair<double, double> normal_equations(const std::vector<RunSample>& s, bool runtime) {
  double snn = 0, snm = 0, smm = 0, sny = 0, smy = 0;
  for (const auto& r : s) {
    double n = static_cast<double>(r.n), m = static_cast<double>(r.m);
    double y = runtime ? r.runtime_ms : r.memory_mb;
    snn += n * n;
    snm += n * m;
    smm += m * m;
    sny += n * y;
    smy += m * y;
  }
  double det = snn * smm - snm * snm;
  return {(sny * smm - smy * snm) / det, (snn * smy - snm * sny) / det};
}

TEST(Fit, RecoversNoiselessConstantsExactly) {
  auto fit = fit_constants(generate(kTruth, 0.0, 1));
  EXPECT_LE(rel(fit.constants.c1, kTruth.c1), 1e-9);
  EXPECT_LE(rel(fit.constants.c2, kTruth.c2), 1e-9);
  EXPECT_LE(rel(fit.constants.c3, kTruth.c3), 1e-9);
  EXPECT_LE(rel(fit.constants.c4, kTruth.c4), 1e-9);
  EXPECT_LT(fit.rmse_runtime_ms, 1e-9);
  EXPECT_EQ(fit.samples, 10u);
}

TEST(Fit, OnePercentNoiseStaysWithinFivePercent) {
  for (std::uint64_t seed : {1u, 2u, 3u, 42u}) {
    auto samples = generate(kTruth, 0.01, seed);
    auto fit = fit_constants(samples);
    EXPECT_LE(rel(fit.constants.c1, kTruth.c1), 0.05) << seed;
    EXPECT_LE(rel(fit.constants.c2, kTruth.c2), 0.05) << seed;
    EXPECT_LE(rel(fit.constants.c3, kTruth.c3), 0.05) << seed;
    EXPECT_LE(rel(fit.constants.c4, kTruth.c4), 0.05) << seed;
    // Interior optimum: agrees with the closed form.
    auto [a, b] = normal_equations(samples, true);
    EXPECT_NEAR(fit.constants.c1, a, 1e-9 * std::abs(a));
    EXPECT_NEAR(fit.constants.c2, b, 1e-9 * std::abs(b));
  }
}

TEST(Fit, ClampsToNonNegativeConstants) {
  // Runtime decreasing in m would need c2 < 0.
  std::vector<RunSample> s = {{100, 10, 40}, {100, 90, 10}, {200, 20, 80}, {300, 200, 30}};
  auto fit = fit_constants(s);
  EXPECT_GE(fit.constants.c1, 0.0);
  EXPECT_EQ(fit.constants.c2, 0.0);
  // Best c1 with c2 = 0: sum(n*y) / sum(n^2).
  double c1 = (100 * 40 + 100 * 10 + 200 * 80 + 300 * 30) / double(100 * 100 + 100 * 100 + 200 * 200 + 300 * 300);
  EXPECT_NEAR(fit.constants.c1, c1, 1e-12);
}

TEST(Fit, RejectsDegenerateDesigns) {
  // m proportional to n.
  std::vector<RunSample> collinear = {{100, 10, 1, 1}, {200, 20, 2, 2}, {400, 40, 4, 4}};
  EXPECT_THROW(fit_constants(collinear), DegenerateDesign);
  std::vector<RunSample> zero_m = {{100, 0, 1, 1}, {200, 0, 2, 2}};
  EXPECT_THROW(fit_constants(zero_m), DegenerateDesign);
  EXPECT_THROW(fit_constants(std::vector<RunSample>{{100, 10, 1, 1}}), DegenerateDesign);
  std::vector<RunSample> bad = {{10, 20, 1, 1}, {20, 10, 1, 1}};
  EXPECT_THROW(fit_constants(bad), InvalidStats);
  std::vector<RunSample> negative = {{10, 2, -1, 1}, {20, 10, 1, 1}};
  EXPECT_THROW(fit_constants(negative), InvalidArgument);
}

TEST(Fit, SamplesCsv) {
  auto s = parse_samples_csv("n,m,runtime_ms,memory_mb\n100,10,70,1.3\n200,50,200.5,3.5\n");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[1].m, 50u);
  EXPECT_DOUBLE_EQ(s[1].runtime_ms, 200.5);
  EXPECT_ANY_THROW(parse_samples_csv("a,b\n1,2\n"));
  EXPECT_ANY_THROW(parse_samples_csv("n,m,runtime_ms,memory_mb\n1,x,2,3\n"));
}

TEST(Predict, ModelsAreLinear) {
  EXPECT_DOUBLE_EQ(predict_runtime(kTruth, 1000, 100), 0.5 * 1000 + 2.0 * 100);
  EXPECT_DOUBLE_EQ(predict_memory(kTruth, 1000, 100), 0.01 * 1000 + 0.03 * 100);
  EXPECT_THROW(predict_runtime(kTruth, 10, 11), InvalidStats);
  CostConstants neg{-1, 0, 0, 0};
  EXPECT_THROW(neg.validate(), InvalidArgument);
}

TEST(Measure, ReportsCountsAndMemoryProxy) {
  auto g = parse_html("<div class=a>hello</div><p class=b>world!</p>");
  auto s = measure_extraction(g);
  EXPECT_EQ(s.n, g.size());
  EXPECT_EQ(s.m, 2u);
  EXPECT_GT(s.runtime_ms, 0.0);
  EXPECT_DOUBLE_EQ(s.memory_mb, (11.0 + 64.0 * static_cast<double>(g.size())) / (1 << 20));
  EXPECT_DOUBLE_EQ(memory_proxy_mb(0, 1 << 20), 1.0);
}

TEST(Scrapability, RatesRoundHalfUp) {
  EXPECT_EQ(scrapability_rate(24, 1).str(), "96.00");
  EXPECT_EQ(scrapability_rate(10, 15).str(), "40.00");
  EXPECT_EQ(scrapability_rate(19, 4).str(), "82.61");
  EXPECT_EQ(scrapability_rate(21, 2).str(), "91.30");
  EXPECT_EQ(scrapability_rate(1, 7).str(), "12.50");
  // 1/3 = 33.333.. -> 33.33 ; 2/3 = 66.666.. -> 66.67 ; 1/8 = 12.5 exactly
  EXPECT_EQ(scrapability_rate(1, 2).str(), "33.33");
  EXPECT_EQ(scrapability_rate(2, 1).str(), "66.67");
  // 1/16 = 6.25 ; 1/160 = 0.625 -> 0.63 (half-up)
  EXPECT_EQ(scrapability_rate(1, 159).str(), "0.63");
  EXPECT_EQ(scrapability_rate(0, 5).str(), "0.00");
  EXPECT_THROW(scrapability_rate(0, 0), EmptyCategory);
}

TEST(ScrapabilityProperty, RateMatchesRationalRounding) {
  for (std::size_t s = 0; s <= 60; ++s) {
    for (std::size_t f = 0; f <= 60; ++f) {
      if (s + f == 0) continue;
      // floor(10000*s/t + 1/2) with integers only
      auto t = static_cast<std::int64_t>(s + f);
      auto want = (20000 * static_cast<std::int64_t>(s) + t) / (2 * t);
      ASSERT_EQ(scrapability_rate(s, f).hundredths, want) << s << "/" << f;
    }
  }
}

TEST(Scrapability, ReportFromBundledTable) {
  auto stats = parse_category_csv(testing::read_file(testing::data_dir() / "table2.csv"));
  ASSERT_EQ(stats.size(), 19u);
  auto report = aggregate_report(stats);
  EXPECT_NEAR(report.mean.value(), 79.40, 0.5);
  EXPECT_EQ(report.mean.str(), "79.36");
  auto csv = report.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "Category,Scrapable,Not Scrapable,Scrapability Rate");
  EXPECT_NE(csv.find("\nPortfolio,24,1,96.00\n"), std::string::npos);
  EXPECT_NE(csv.find("\nStatic Informative,25,0,100.00\n"), std::string::npos);
  EXPECT_NE(csv.find("\nAverage,,,79.36\n"), std::string::npos);
  EXPECT_THROW(aggregate_report(std::vector<CategoryStat>{}), InvalidArgument);
}

TEST(Scrapability, Classification) {
  using K = FetchOutcome::Kind;
  EXPECT_TRUE(classify_scrapable({K::Completed, 200, true}, 3).scrapable);
  EXPECT_EQ(classify_scrapable({K::Completed, 200, true}, 0).reason,
            NotScrapableReason::EmptyExtraction);
  EXPECT_EQ(classify_scrapable({K::Completed, 200, false}, std::nullopt).reason,
            NotScrapableReason::NonHtml);
  EXPECT_EQ(classify_scrapable({K::Completed, 404, true}, std::nullopt).reason,
            NotScrapableReason::HttpError);
  EXPECT_EQ(classify_scrapable({K::NetworkError, 0, false}, std::nullopt).reason,
            NotScrapableReason::HttpError);
  EXPECT_EQ(classify_scrapable({K::ConsentDenied, 0, false}, std::nullopt).reason,
            NotScrapableReason::ConsentDenied);
}

TEST(Comparison, BundledFixtureRanking) {
  auto report =
      render_comparison(parse_comparison_fixture(testing::read_file(testing::data_dir() / "table3.csv")));
  EXPECT_EQ(report.fastest().tool, "lxml");
  EXPECT_DOUBLE_EQ(report.fastest().runtime_model_ms, 917.67);
  EXPECT_EQ(report.slowest().tool, "Selenium");
  EXPECT_DOUBLE_EQ(report.slowest().runtime_model_ms, 15397.33);
  EXPECT_DOUBLE_EQ(report.slowest().memory_model_mb, 200);
  auto csv = report.to_csv();
  EXPECT_NE(csv.find("\n5,Automated Web Scraper,6128.66,150.00,6126.66,148.00\n"),
            std::string::npos);
  EXPECT_EQ(report.series()["labels"][0], "lxml");
  // Byte-stable across runs and input orders.
  auto rows = parse_comparison_fixture(testing::read_file(testing::data_dir() / "table3.csv"));
  std::reverse(rows.begin(), rows.end());
  EXPECT_EQ(render_comparison(rows).to_csv(), csv);
}

TEST(Comparison, MalformedFixtures) {
  EXPECT_THROW(parse_comparison_fixture("tool,runtime_model_ms\nx,1\n"), MalformedFixture);
  EXPECT_THROW(parse_comparison_fixture(
                   "tool,runtime_model_ms,memory_model_mb,runtime_plain_ms,memory_plain_mb\n"
                   "x,fast,1,1,1\n"),
               MalformedFixture);
  EXPECT_THROW(parse_comparison_fixture(
                   "tool,runtime_model_ms,memory_model_mb,runtime_plain_ms,memory_plain_mb\n"),
               MalformedFixture);
  EXPECT_THROW(render_comparison({}), MalformedFixture);
}

}  // namespace
}  // namespace scrapeflow
