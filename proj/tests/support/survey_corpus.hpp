#pragma once

#include <string>

#include "fixture_server.hpp"

namespace scrapeflow::testing {

// Twenty sites in five categories with known outcomes:
//   Portfolio 4/0, Blogs 3/1 (404), News 2/2 (text/plain, robots-disallowed),
//   Forums 1/3 (no classes, consent withheld, connection refused),
//   Government 0/4 (500, redirect loop, whitespace-only classes, 410).
void install_survey_routes(FixtureServer& server);

// tests/fixtures/survey/spec.template.json with {base} filled in.
std::string survey_spec_json(const FixtureServer& server);

}  // namespace scrapeflow::testing
