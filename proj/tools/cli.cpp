#include "scrapeflow/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <pthread.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "scrapeflow/extractor.hpp"
#include "scrapeflow/fetcher.hpp"
#include "scrapeflow/log.hpp"
#include "scrapeflow/metrics.hpp"
#include "scrapeflow/persistence.hpp"
#include "scrapeflow/pipeline.hpp"
#include "scrapeflow/service.hpp"
#include "scrapeflow/structurer.hpp"
#include "scrapeflow/version.hpp"

namespace scrapeflow {

namespace fs = std::filesystem;

namespace {

struct UsageError : Error {
  explicit UsageError(const std::string& m) : Error("usage", m) {}
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("io_error", "cannot write " + path.string());
}

struct ScrapeArgs {
  std::string url;
  std::string tags;
  std::string filter_regex;
  std::string out;
  std::string user = "cli";
  std::string timestamp;
  bool no_robots = false;
  bool consent = false;
  long timeout_ms = 30'000;
};

int cmd_scrape(const ScrapeArgs& a, std::ostream& out, std::ostream& err) {
  FetchRequest req;
  req.url = a.url;
  req.consent = a.consent;
  req.respect_robots = !a.no_robots;
  req.timeout = std::chrono::milliseconds(a.timeout_ms);
  ExtractOptions options;
  UtcTime stamp;
  try {
    req.validate();
    if (!a.tags.empty()) options.tags = TagSet::parse_list(a.tags);
    if (!a.filter_regex.empty()) options.rule = FilterRule::regex(a.filter_regex);
    if (a.timestamp.empty()) {
      stamp = system_clock_now();
    } else if (auto t = parse_iso8601(a.timestamp)) {
      stamp = *t;
    } else {
      throw UsageError("--timestamp must be ISO 8601 UTC, e.g. 2024-05-01T12:00:00Z");
    }
    validate_username(a.user);
  } catch (const Error& e) {
    err << "error: " << e.code() << ": " << e.what() << "\n";
    return kExitUsage;
  }

  Fetcher fetcher;
  auto page = scrape_page(fetcher, req, options);
  auto doc = to_csv(page.extraction.contents, a.user, stamp);
  auto bytes = render_bytes(doc);
  if (a.out == "-") {
    out << bytes;
    return kExitOk;
  }
  fs::path target = a.out.empty() ? fs::path(doc.filename) : fs::path(a.out);
  if (!a.out.empty() && (fs::is_directory(target) || a.out.back() == '/'))
    target /= doc.filename;
  write_file(target, bytes);
  const auto& s = page.extraction.stats;
  out << target.string() << "\n"
      << "rows=" << doc.rows.size() << " n_visited=" << s.n_visited
      << " m_relevant=" << s.m_relevant << " efficiency=" << efficiency(s) << "\n";
  return kExitOk;
}

fs::path with_extension(fs::path p, const char* ext) { return p.replace_extension(ext); }

int cmd_survey(const std::string& spec_path, const std::string& out_path, std::size_t jobs,
               long timeout_ms, std::ostream& out) {
  nlohmann::json j = nlohmann::json::parse(read_file(spec_path), nullptr, false);
  if (j.is_discarded()) throw UsageError("survey spec is not valid JSON");
  SurveySpec spec;
  try {
    spec = SurveySpec::from_json(j);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  Fetcher fetcher;
  auto result = run_survey(fetcher, spec, jobs, std::chrono::milliseconds(timeout_ms));

  auto report_json = result.report.to_json();
  nlohmann::ordered_json sites = nlohmann::ordered_json::array();
  for (const auto& s : result.sites) {
    sites.push_back({{"url", s.site.url},
                     {"category", s.site.category},
                     {"scrapable", s.classification.scrapable},
                     {"reason", s.classification.reason
                                    ? nlohmann::ordered_json(std::string(
                                          to_string(*s.classification.reason)))
                                    : nlohmann::ordered_json(nullptr)}});
  }
  report_json["sites"] = sites;

  fs::path csv_path = out_path;
  write_file(csv_path, result.report.to_csv());
  write_file(with_extension(csv_path, ".json"), report_json.dump(2) + "\n");
  out << csv_path.string() << "\n"
      << "categories=" << result.report.categories.size()
      << " mean_rate=" << result.report.mean.str() << "\n";
  return kExitOk;
}

int cmd_fit(const std::string& samples_path, const std::string& out_path, std::ostream& out) {
  auto samples = parse_samples_csv(read_file(samples_path));
  auto fit = fit_constants(samples);
  auto text = to_json(fit).dump(2) + "\n";
  if (out_path.empty() || out_path == "-") {
    out << text;
  } else {
    write_file(out_path, text);
    out << out_path << "\n";
  }
  return kExitOk;
}

int cmd_report_table3(const std::string& fixture, const std::string& out_stem,
                      std::ostream& out) {
  auto report = render_comparison(parse_comparison_fixture(read_file(fixture)));
  fs::path stem = out_stem;
  if (stem.extension() == ".csv" || stem.extension() == ".svg-data") stem.replace_extension();
  auto csv_path = fs::path(stem.string() + ".csv");
  auto series_path = fs::path(stem.string() + ".svg-data");
  write_file(csv_path, report.to_csv());
  write_file(series_path, report.series().dump(2) + "\n");
  out << csv_path.string() << "\n" << series_path.string() << "\n"
      << "fastest=" << report.fastest().tool << " slowest=" << report.slowest().tool << "\n";
  return kExitOk;
}

ServiceConfig service_config(const std::string& data_dir) {
  auto config = ServiceConfig::from_env(ServiceConfig{});
  if (!data_dir.empty()) config.data_dir = data_dir;
  return config;
}

int cmd_serve(const std::string& data_dir, const std::string& bind, std::ostream& out) {
  auto config = service_config(data_dir);
  if (!bind.empty()) {
    auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw UsageError("--bind must be host:port");
    try {
      config.host = bind.substr(0, colon);
      config.port = std::stoi(bind.substr(colon + 1));
    } catch (const std::exception&) {
      throw UsageError("--bind has an invalid port");
    }
  }

  // Worker threads inherit the blocked mask so only sigwait sees the signal.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Fetcher fetcher(FetcherOptions{default_user_agent(), true, std::chrono::milliseconds(500)});
  Service service(config, fetcher);
  int port = service.start();
  out << "listening on " << config.host << ":" << port << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  service.stop();
  pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
  return kExitOk;
}

int cmd_user_add(const std::string& data_dir, const std::string& name, std::string password,
                 std::ostream& out, std::ostream& err) {
  if (password.empty()) {
    if (const char* env = std::getenv("SCRAPEFLOW_PASSWORD")) password = env;
  }
  if (password.empty()) std::getline(std::cin, password);
  auto config = service_config(data_dir);
  JsonLinesStore store(config.data_dir);
  Accounts accounts(store, system_clock_now, AccountOptions{config.pbkdf2_iterations, config.session_ttl});
  try {
    if (accounts.create_user(name, password) == CreateUserResult::UsernameExists) {
      err << "error: username exists\n";
      return kExitConflict;
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  out << "created user " << name << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-hosted web scraping toolkit", "scrapeflow"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string data_dir;
  std::string log_level;
  app.add_option("--data-dir", data_dir, "Data directory (default $SCRAPEFLOW_DATA_DIR)");
  app.add_option("--log-level", log_level, "debug, info, warn or error");

  ScrapeArgs scrape;
  auto* sc = app.add_subcommand("scrape", "Fetch a page and write its class contents as CSV");
  sc->add_option("url", scrape.url, "Page URL")->required();
  sc->add_option("--tags", scrape.tags, "Comma-separated tag names to keep");
  sc->add_option("--filter-regex", scrape.filter_regex, "Keep regex matches of each content");
  sc->add_option("--out", scrape.out, "Output CSV file or directory, '-' for stdout");
  sc->add_option("--user", scrape.user, "Username used in the CSV filename")->capture_default_str();
  sc->add_option("--timestamp", scrape.timestamp, "UTC time for the filename (ISO 8601)");
  sc->add_option("--timeout-ms", scrape.timeout_ms, "Per-request timeout")->capture_default_str();
  sc->add_flag("--no-robots", scrape.no_robots, "Do not consult robots.txt");
  sc->add_flag("--consent", scrape.consent, "Confirm permission to scrape this site");

  std::string survey_spec, survey_out = "survey.csv";
  std::size_t survey_jobs = 4;
  long survey_timeout = 10'000;
  auto* sv = app.add_subcommand("survey", "Classify a list of sites and aggregate per category");
  sv->add_option("spec", survey_spec, "Survey spec (JSON)")->required();
  sv->add_option("--out", survey_out, "Report CSV; a .json report is written beside it")
      ->capture_default_str();
  sv->add_option("--jobs", survey_jobs, "Concurrent fetches")->check(CLI::PositiveNumber)
      ->capture_default_str();
  sv->add_option("--timeout-ms", survey_timeout, "Per-request timeout")->capture_default_str();

  std::string fit_samples, fit_out;
  auto* ft = app.add_subcommand("fit", "Fit runtime and memory cost constants");
  ft->add_option("samples", fit_samples, "CSV with columns n,m,runtime_ms,memory_mb")->required();
  ft->add_option("--out", fit_out, "Output JSON (default stdout)");

  std::string report_fixture, report_out = "table3";
  auto* rp = app.add_subcommand("report", "Render comparison reports");
  rp->require_subcommand(1);
  auto* t3 = rp->add_subcommand("table3", "Tool runtime and memory comparison");
  t3->add_option("--fixture", report_fixture, "Comparison CSV")->required();
  t3->add_option("--out", report_out, "Output stem for .csv and .svg-data")->capture_default_str();

  std::string bind;
  auto* sr = app.add_subcommand("serve", "Run the HTTP API");
  sr->add_option("--bind", bind, "host:port (default $SCRAPEFLOW_BIND or 127.0.0.1:8080)");

  std::string user_name, user_password;
  auto* us = app.add_subcommand("user", "Manage accounts");
  us->require_subcommand(1);
  auto* ua = us->add_subcommand("add", "Create an account");
  ua->add_option("name", user_name, "Username")->required();
  ua->add_option("--password", user_password,
                 "Password (default $SCRAPEFLOW_PASSWORD, else one line of stdin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (!log_level.empty()) {
      auto lvl = log::parse_level(log_level);
      if (!lvl) throw UsageError("unknown log level " + log_level);
      log::set_level(*lvl);
    }
    if (*sc) return cmd_scrape(scrape, out, err);
    if (*sv) return cmd_survey(survey_spec, survey_out, survey_jobs, survey_timeout, out);
    if (*ft) return cmd_fit(fit_samples, fit_out, out);
    if (*t3) return cmd_report_table3(report_fixture, report_out, out);
    if (*sr) return cmd_serve(data_dir, bind, out);
    if (*ua) return cmd_user_add(data_dir, user_name, user_password, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConsentDenied& e) {
    err << "error: consent_denied: " << e.what() << "\n";
    return kExitPermission;
  } catch (const InvalidUrl& e) {
    err << "error: invalid_url: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.code() << ": " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace scrapeflow
