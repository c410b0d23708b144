// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Exit status is non-zero if any criterion fails or exceeds its time limit.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "fixture_server.hpp"
#include "paths.hpp"
#include "random_tree.hpp"
#include "scrapeflow/cli.hpp"
#include "scrapeflow/csv.hpp"
#include "scrapeflow/extractor.hpp"
#include "scrapeflow/html_parser.hpp"
#include "scrapeflow/metrics.hpp"
#include "scrapeflow/pipeline.hpp"
#include "scrapeflow/structurer.hpp"
#include "service_harness.hpp"
#include "survey_corpus.hpp"

namespace sf = scrapeflow;
namespace st = scrapeflow::testing;

namespace {

struct Failure {
  std::string message;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw Failure{message};
}

std::string fmt(double v, int precision = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

// ---------------------------------------------------------------------------

std::string oracle_normalize(const std::string& raw) {
  static const std::regex ws("[ \t\n\f\r]+");
  auto collapsed = std::regex_replace(raw, ws, " ");
  auto b = collapsed.find_first_not_of(' ');
  if (b == std::string::npos) return "";
  return collapsed.substr(b, collapsed.find_last_not_of(' ') - b + 1);
}

std::string efficiency_oracle() {
  std::mt19937_64 rng(0x5eed2024);
  const std::vector<std::string> tag_names = {"p", "li", "span"};
  const sf::TagSet tags(tag_names);
  for (int trial = 0; trial < 200; ++trial) {
    auto size = std::uniform_int_distribution<std::size_t>(5, 500)(rng);
    auto graph = st::random_tree(rng, size);
    auto result = sf::scrape_graph(graph, tags, sf::FilterRule::pass_through());

    // Brute force over the node array.
    std::size_t n = 0, m = 0;
    for (const auto& v : graph.nodes()) {
      ++n;
      if (std::find(tag_names.begin(), tag_names.end(), v.tag) == tag_names.end()) continue;
      std::string own;
      for (std::size_t i = 0; i < v.runs.size(); ++i) own += (i ? " " : "") + v.runs[i].text;
      if (!oracle_normalize(own).empty()) ++m;
    }
    require(n == size, "tree size mismatch");
    // Rational equality m/n == m'/n' via cross-multiplication.
    require(result.stats.m_relevant * n == m * result.stats.n_visited,
            "trial " + std::to_string(trial) + ": " + std::to_string(result.stats.m_relevant) +
                "/" + std::to_string(result.stats.n_visited) + " vs " + std::to_string(m) + "/" +
                std::to_string(n));
    double got = sf::efficiency(result.stats);
    double want = static_cast<double>(m) / static_cast<double>(n);
    require(std::abs(got - want) <= 1e-12, "double render differs in trial " + std::to_string(trial));
  }
  return "200 trees, rational agreement";
}

// ---------------------------------------------------------------------------

std::string cost_recovery() {
  const sf::CostConstants truth{0.5, 2.0, 0.01, 0.03};
  const std::vector<std::pair<std::size_t, std::size_t>> pairs = {
      {100, 10}, {250, 40}, {400, 25}, {800, 200}, {1200, 90},
      {1500, 600}, {2000, 150}, {3000, 1200}, {4500, 300}, {6000, 2500}};
  auto generate = [&](double noise, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> eps(0.0, noise);
    std::vector<sf::RunSample> out;
    for (auto [n, m] : pairs) {
      double nn = static_cast<double>(n), mm = static_cast<double>(m);
      out.push_back({n, m, (truth.c1 * nn + truth.c2 * mm) * (1 + eps(rng)),
                     (truth.c3 * nn + truth.c4 * mm) * (1 + eps(rng))});
    }
    return out;
  };
  auto worst = [&](const sf::CostConstants& c) {
    auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
    return std::max({rel(c.c1, truth.c1), rel(c.c2, truth.c2), rel(c.c3, truth.c3),
                     rel(c.c4, truth.c4)});
  };
  double exact = worst(sf::fit_constants(generate(0.0, 1)).constants);
  require(exact <= 1e-9, "noiseless relative error " + std::to_string(exact));
  double noisy = worst(sf::fit_constants(generate(0.01, 20240501)).constants);
  require(noisy <= 0.05, "1% noise relative error " + std::to_string(noisy));
  std::ostringstream msg;
  msg << "noiseless rel err " << exact << ", 1% noise rel err " << fmt(noisy * 100, 3) << "%";
  return msg.str();
}

// ---------------------------------------------------------------------------

void oracle_deep_text(const sf::DomGraph& g, sf::NodeId id, std::string& out) {
  const auto& v = g.node(id);
  std::size_t run = 0;
  for (std::size_t i = 0; i <= v.children.size(); ++i) {
    for (; run < v.runs.size() && v.runs[run].before_child == i; ++run) out += v.runs[run].text;
    if (i < v.children.size()) oracle_deep_text(g, v.children[i], out);
  }
}

std::string corpus_goldens() {
  const std::vector<std::string> pages = {
      "01_portfolio", "02_blog",     "03_news",    "04_forum",   "05_recipe",  "06_directory",
      "07_government", "08_education", "09_realestate", "10_travel", "11_reviews",
      "12_entertainment"};
  const sf::UtcTime stamp{std::chrono::milliseconds(1714564800000)};
  std::size_t total = 0;
  for (const auto& name : pages) {
    auto graph = sf::parse_html(st::read_file(st::pages_dir() / (name + ".html")));
    auto golden = st::read_file(st::golden_dir() / (name + ".csv"));
    auto doc = sf::to_csv(sf::get_data(graph), "acceptance", stamp);
    auto bytes = sf::render_bytes(doc);
    require(bytes.rfind("Class,Tag,Content\n", 0) == 0, name + ": header differs");
    require(bytes == golden, name + ": CSV differs from golden");

    std::size_t recount = 0;
    for (const auto& v : graph.nodes()) {
      auto cls = v.attributes.find("class");
      if (cls == v.attributes.end() || oracle_normalize(cls->second).empty()) continue;
      std::string raw;
      oracle_deep_text(graph, v.id, raw);
      if (!oracle_normalize(raw).empty()) ++recount;
    }
    require(doc.rows.size() == recount, name + ": " + std::to_string(doc.rows.size()) +
                                            " rows vs " + std::to_string(recount) + " recounted");
    require(sf::csv::parse(golden).size() == recount + 1, name + ": golden row count");
    total += recount;
  }
  return "12 pages byte-exact, " + std::to_string(total) + " rows";
}

// ---------------------------------------------------------------------------

std::string table2() {
  auto stats = sf::parse_category_csv(st::read_file(st::data_dir() / "table2.csv"));
  require(stats.size() == 19, "expected 19 categories, got " + std::to_string(stats.size()));
  const std::vector<std::pair<std::string, std::string>> expected = {
      {"Portfolio", "96.00"}, {"Social Media", "40.00"}, {"Video Sharing", "82.61"},
      {"Photo Sharing", "91.30"}, {"Educational", "92.00"}, {"Health and Fitness", "88.00"},
      {"Static Informative", "100.00"}, {"Tutorial", "88.00"}};
  for (const auto& [cat, rate] : expected) {
    auto it = std::find_if(stats.begin(), stats.end(),
                           [&](const sf::CategoryStat& s) { return s.category == cat; });
    require(it != stats.end(), "missing " + cat);
    require(it->rate.str() == rate, cat + ": " + it->rate.str() + " != " + rate);
  }
  double oracle_sum = 0;
  for (const auto& s : stats) {
    // Independent: exact decimal rounding via long double of s/(s+f).
    long double pct = 100.0L * s.scrapable / static_cast<long double>(s.scrapable + s.not_scrapable);
    auto hundredths = static_cast<long long>(std::floor(pct * 100.0L + 0.5L));
    require(s.rate.hundredths == hundredths, s.category + ": rate mismatch");
    oracle_sum += static_cast<double>(hundredths) / 100.0;
  }
  auto report = sf::aggregate_report(stats);
  double oracle_mean = oracle_sum / static_cast<double>(stats.size());
  require(std::abs(report.mean.value() - oracle_mean) <= 0.005, "mean differs from recomputation");
  require(std::abs(report.mean.value() - 79.40) <= 0.5,
          "mean " + report.mean.str() + " outside 79.40 +- 0.5");
  return "19 categories, mean " + report.mean.str() + " (target 79.40 +- 0.5)";
}

// ---------------------------------------------------------------------------

std::string table3() {
  auto rows = sf::parse_comparison_fixture(st::read_file(st::data_dir() / "table3.csv"));
  auto report = sf::render_comparison(rows);
  require(report.fastest().tool == "lxml" && fmt(report.fastest().runtime_model_ms) == "917.67",
          "fastest is " + report.fastest().tool);
  require(report.slowest().tool == "Selenium" &&
              fmt(report.slowest().runtime_model_ms) == "15397.33" &&
              fmt(report.slowest().memory_model_mb) == "200.00",
          "slowest is " + report.slowest().tool);
  auto aws = std::find_if(report.rows.begin(), report.rows.end(),
                          [](const sf::ToolRow& r) { return r.tool == "Automated Web Scraper"; });
  require(aws != report.rows.end(), "Automated Web Scraper row missing");
  require(fmt(aws->runtime_model_ms) == "6128.66" && fmt(aws->memory_model_mb) == "150.00",
          "Automated Web Scraper row values");
  auto csv = report.to_csv();
  auto series = report.series().dump();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(rows.begin(), rows.end(), rng);
    auto again = sf::render_comparison(rows);
    require(again.to_csv() == csv && again.series().dump() == series, "output not byte-stable");
  }
  return "lxml 917.67 ms first, Selenium 15397.33 ms / 200 MB last";
}

// ---------------------------------------------------------------------------

std::string service_flow() {
  st::ServiceHarness h(100'000);
  auto reg = h.post("/api/register", {{"username", "erin"}, {"password", "s3cure-pass"}});
  require(reg.status == 201, "register: " + std::to_string(reg.status));
  auto dup = h.post("/api/register", {{"username", "erin"}, {"password", "other-pass"}});
  require(dup.status == 409, "duplicate register: " + std::to_string(dup.status));
  auto bad = h.post("/api/login", {{"username", "erin"}, {"password", "wrong-pass"}});
  require(bad.status == 401, "bad login: " + std::to_string(bad.status));
  auto login = h.post("/api/login", {{"username", "erin"}, {"password", "s3cure-pass"}});
  require(login.status == 200, "login: " + std::to_string(login.status));
  auto token = login.json()["token"].get<std::string>();

  auto url = h.site.url("/pages/02_blog.html");
  auto scrape = h.post("/api/scrape", {{"url", url}, {"consent", true}}, token);
  require(scrape.status == 200, "scrape: " + scrape.body);
  auto job = scrape.json()["job_id"].get<std::string>();
  auto total = scrape.json()["triple_count"].get<std::size_t>();

  auto search = h.post("/api/jobs/" + job + "/refine",
                       {{"mode", "string_search"}, {"needle", "garlic"}}, token);
  require(search.status == 200, "string refine: " + search.body);
  auto n_search = search.json()["triple_count"].get<std::size_t>();
  require(n_search > 0 && n_search < total, "string refine did not narrow");
  auto select = h.post("/api/jobs/" + job + "/refine", {{"mode", "class_select"}, {"needle", "tag"}},
                       token);
  require(select.status == 200 && select.json()["triple_count"] == 3, "class refine: " + select.body);

  auto exp = h.post_raw("/api/jobs/" + job + "/export", "{}", token);
  require(exp.status == 200, "export: " + exp.body);
  require(exp.json()["row_count"].get<std::size_t>() == total, "export row count");
  auto download = h.get("/api/download/" + exp.json()["download_id"].get<std::string>(), token);
  require(download.status == 200, "download: " + std::to_string(download.status));

  const std::string stamp = sf::format_iso8601(h.now.load());
  std::vector<std::string> args = {"scrapeflow", "scrape",      url,   "--consent", "--user",
                                   "erin",       "--timestamp", stamp, "--out",     "-"};
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int rc = sf::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  require(rc == 0, "cli scrape exit " + std::to_string(rc) + ": " + err.str());
  require(out.str() == download.body, "service CSV differs from CLI CSV");

  auto history = h.get("/api/history", token).json();
  require(history["records"].size() == 1, "history has " +
                                              std::to_string(history["records"].size()) + " records");
  require(history["records"][0]["status"] == "ok", "history record not ok");

  // Store byte scan, reused by the security criterion.
  for (const auto& entry : std::filesystem::recursive_directory_iterator(h.data.path())) {
    if (!entry.is_regular_file()) continue;
    auto bytes = st::read_file(entry.path());
    require(bytes.find("s3cure-pass") == std::string::npos &&
                bytes.find("other-pass") == std::string::npos &&
                bytes.find("wrong-pass") == std::string::npos,
            "plaintext password in " + entry.path().filename().string());
  }
  return std::to_string(total) + " rows, CLI and service CSV identical";
}

// ---------------------------------------------------------------------------

std::string security() {
  // Passwords never reach disk in the clear.
  {
    st::TempDir dir;
    {
      sf::JsonLinesStore store(dir.path());
      sf::Accounts accounts(store, sf::system_clock_now);
      accounts.create_user("frank", "plain-text-secret");
      require(accounts.authenticate("frank", "plain-text-secret").has_value(), "login failed");
    }
    std::size_t files = 0;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir.path())) {
      if (!entry.is_regular_file()) continue;
      ++files;
      require(st::read_file(entry.path()).find("plain-text-secret") == std::string::npos,
              "plaintext password in " + entry.path().filename().string());
    }
    require(files > 0, "store wrote no files");
  }

  st::FixtureServer site;
  sf::Fetcher fetcher;

  // consent=false: library, CLI and service all stay silent.
  sf::FetchRequest req;
  req.url = site.url("/static.html");
  req.consent = false;
  try {
    fetcher.fetch(req);
    require(false, "fetch without consent succeeded");
  } catch (const sf::ConsentDenied&) {
  }
  {
    std::vector<std::string> args = {"scrapeflow", "scrape", site.url("/static.html"), "--out", "-"};
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    require(sf::run_cli(static_cast<int>(argv.size()), argv.data(), out, err) == sf::kExitPermission,
            "cli without --consent did not exit 3");
  }
  {
    st::ServiceHarness h;
    auto token = h.login_new_user("grace");
    auto r = h.post("/api/scrape", {{"url", h.site.url("/static.html")}, {"consent", false}}, token);
    require(r.status == 403, "service without consent: " + std::to_string(r.status));
    require(h.site.requests().empty(), "service issued requests without consent");
  }
  require(site.requests().empty(), std::to_string(site.requests().size()) +
                                       " requests without consent");

  // robots.txt disallow.
  req.url = site.url("/private/page.html");
  req.consent = true;
  req.respect_robots = true;
  try {
    fetcher.fetch(req);
    require(false, "robots-disallowed URL was fetched");
  } catch (const sf::ConsentDenied& e) {
    require(e.reason() == sf::DenyReason::Robots, "denied for the wrong reason");
  }
  for (const auto& r : site.requests())
    require(r != "GET /private/page.html", "disallowed page was requested");
  return "no plaintext, 0 requests without consent, robots honored";
}

// Stand-in for the live-web survey: synthetic corpus with known outcomes.
std::string survey_golden() {
  st::FixtureServer server;
  st::install_survey_routes(server);
  auto spec = sf::SurveySpec::from_json(nlohmann::json::parse(st::survey_spec_json(server)));
  sf::Fetcher fetcher;
  auto result = sf::run_survey(fetcher, spec, 4, std::chrono::milliseconds(3000));
  auto csv = result.report.to_csv();
  require(csv == st::read_file(st::tests_dir() / "fixtures/survey/expected_report.csv"),
          "report differs from golden:\n" + csv);
  return std::to_string(spec.sites.size()) + " sites, mean " + result.report.mean.str();
}

struct Criterion {
  std::string name;
  std::chrono::milliseconds limit;
  std::function<std::string()> run;
};

}  // namespace

int main() {
  using namespace std::chrono_literals;
  const std::vector<Criterion> criteria = {
      {"efficiency_oracle", 5000ms, efficiency_oracle},
      {"cost_model_recovery", 1000ms, cost_recovery},
      {"getdata_savetocsv_goldens", 2000ms, corpus_goldens},
      {"table2_reproduction", 1000ms, table2},
      {"table3_fixture_report", 1000ms, table3},
      {"service_end_to_end", 10000ms, service_flow},
      {"security_and_consent", 10000ms, security},
      {"survey_synthetic_corpus", 10000ms, survey_golden},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    std::string detail;
    std::string error;
    try {
      detail = c.run();
    } catch (const Failure& f) {
      error = f.message;
    } catch (const std::exception& e) {
      error = std::string("exception: ") + e.what();
    }
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    if (error.empty() && ms > c.limit)
      error = "took " + std::to_string(ms.count()) + " ms, limit " + std::to_string(c.limit.count());
    bool ok = error.empty();
    failures += ok ? 0 : 1;
    std::cout << (ok ? "PASS " : "FAIL ") << c.name << " [" << ms.count() << " ms / "
              << c.limit.count() << " ms] " << (ok ? detail : error) << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
