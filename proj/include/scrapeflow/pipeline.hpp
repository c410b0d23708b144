#pragma once

// fetch -> parse -> extract, shared by the CLI and the service so both
// produce identical results for identical inputs.

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scrapeflow/dom_graph.hpp"
#include "scrapeflow/extractor.hpp"
#include "scrapeflow/fetcher.hpp"
#include "scrapeflow/metrics.hpp"

namespace scrapeflow {

struct PageScrape {
  FetchResponse response;
  DomGraph graph;
  Extraction extraction;
};

// Throws FetchError subclasses, NonHtmlContent, EncodingError, EmptyDocument.
PageScrape scrape_page(Fetcher& fetcher, const FetchRequest& request,
                       const ExtractOptions& options = {});

// Parses an HTML body already in hand (charset from the Content-Type value).
PageScrape scrape_body(FetchResponse response, const ExtractOptions& options = {});

struct SurveySite {
  std::string url;
  std::string category;
  bool consent = false;
};

struct SurveySpec {
  std::vector<SurveySite> sites;

  // {"sites": [{"url": ..., "category": ..., "consent": bool}, ...]}
  // Throws InvalidArgument on a malformed or empty spec.
  static SurveySpec from_json(const nlohmann::json& j);
};

struct SiteResult {
  SurveySite site;
  Classification classification;
};

struct SurveyResult {
  std::vector<SiteResult> sites;  // spec order
  SurveyReport report;            // categories in first-seen order
};

// Fetches every site (at most `jobs` concurrently) with robots.txt honored,
// classifies it and aggregates per category.
SurveyResult run_survey(Fetcher& fetcher, const SurveySpec& spec, std::size_t jobs = 1,
                        std::chrono::milliseconds timeout = std::chrono::seconds(30));

}  // namespace scrapeflow
