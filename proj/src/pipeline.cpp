#include "scrapeflow/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <thread>

#include "scrapeflow/html_parser.hpp"
#include "scrapeflow/log.hpp"

namespace scrapeflow {

PageScrape scrape_body(FetchResponse response, const ExtractOptions& options) {
  if (!response.is_html())
    throw NonHtmlContent("content type is not HTML: " + response.content_type());
  auto charset = charset_from_content_type(response.content_type());
  auto graph = parse_html(response.body, charset ? std::optional<std::string_view>(*charset)
                                                 : std::nullopt);
  auto extraction = extract(graph, options);
  return {std::move(response), std::move(graph), std::move(extraction)};
}

PageScrape scrape_page(Fetcher& fetcher, const FetchRequest& request,
                       const ExtractOptions& options) {
  return scrape_body(fetcher.fetch(request), options);
}

SurveySpec SurveySpec::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("sites") || !j["sites"].is_array())
    throw InvalidArgument("survey spec must be an object with a \"sites\" array");
  SurveySpec spec;
  for (const auto& s : j["sites"]) {
    if (!s.is_object() || !s.contains("url") || !s["url"].is_string() ||
        !s.contains("category") || !s["category"].is_string())
      throw InvalidArgument("each site needs string \"url\" and \"category\"");
    SurveySite site{s["url"].get<std::string>(), s["category"].get<std::string>(),
                    s.value("consent", false)};
    if (site.category.empty()) throw InvalidArgument("site category must not be empty");
    spec.sites.push_back(std::move(site));
  }
  if (spec.sites.empty()) throw InvalidArgument("survey spec lists no sites");
  return spec;
}

namespace {

Classification survey_one(Fetcher& fetcher, const SurveySite& site,
                          std::chrono::milliseconds timeout) {
  FetchRequest req;
  req.url = site.url;
  req.consent = site.consent;
  req.respect_robots = true;
  req.timeout = timeout;
  FetchOutcome outcome;
  try {
    auto page = scrape_page(fetcher, req);
    outcome = {FetchOutcome::Kind::Completed, page.response.status, true};
    return classify_scrapable(outcome, page.extraction.contents.triple_count());
  } catch (const ConsentDenied&) {
    outcome.kind = FetchOutcome::Kind::ConsentDenied;
  } catch (const HttpStatusError& e) {
    outcome = {FetchOutcome::Kind::Completed, e.status(), false};
  } catch (const FetchError& e) {
    log::info("survey: " + site.url + ": " + e.what());
    outcome.kind = FetchOutcome::Kind::NetworkError;
  } catch (const NonHtmlContent&) {
    outcome = {FetchOutcome::Kind::Completed, 200, false};
  } catch (const EmptyDocument&) {
    return classify_scrapable({FetchOutcome::Kind::Completed, 200, true}, 0);
  } catch (const EncodingError&) {
    return classify_scrapable({FetchOutcome::Kind::Completed, 200, true}, 0);
  }
  return classify_scrapable(outcome, std::nullopt);
}

}  // namespace

SurveyResult run_survey(Fetcher& fetcher, const SurveySpec& spec, std::size_t jobs,
                        std::chrono::milliseconds timeout) {
  if (spec.sites.empty()) throw InvalidArgument("survey spec lists no sites");
  std::vector<Classification> results(spec.sites.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < spec.sites.size();)
      results[i] = survey_one(fetcher, spec.sites[i], timeout);
  };
  const auto n_threads = std::clamp<std::size_t>(jobs, 1, spec.sites.size());
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();

  SurveyResult out;
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  for (std::size_t i = 0; i < spec.sites.size(); ++i) {
    const auto& site = spec.sites[i];
    out.sites.push_back({site, results[i]});
    auto [it, inserted] = counts.try_emplace(site.category, 0, 0);
    if (inserted) order.push_back(site.category);
    (results[i].scrapable ? it->second.first : it->second.second)++;
  }
  std::vector<CategoryStat> stats;
  for (const auto& cat : order)
    stats.push_back(CategoryStat::make(cat, counts[cat].first, counts[cat].second));
  out.report = aggregate_report(stats);
  return out;
}

}  // namespace scrapeflow
