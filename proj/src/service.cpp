#include "scrapeflow/service.hpp"

#include <httplib.h>

#include <charconv>
#include <fstream>
#include <cstdlib>

#include "scrapeflow/html_parser.hpp"
#include "scrapeflow/log.hpp"
#include "scrapeflow/pipeline.hpp"
#include "scrapeflow/structurer.hpp"
#include "scrapeflow/text.hpp"

namespace scrapeflow {

using json = nlohmann::ordered_json;

namespace {

std::optional<long> parse_long(std::string_view s) {
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code,
                std::string_view message = {}, json extra = json::object()) {
  json body = {{"error", code}};
  if (!message.empty()) body["message"] = message;
  for (auto& [k, v] : extra.items()) body[k] = v;
  send_json(res, status, body);
}

// Parses a JSON object body; on failure answers 400 and returns nothing.
std::optional<json> body_object(const httplib::Request& req, httplib::Response& res,
                                bool allow_empty = false) {
  if (allow_empty && text::trim(req.body).empty()) return json::object();
  auto j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    send_error(res, 400, "bad_request", "request body must be a JSON object");
    return std::nullopt;
  }
  return j;
}

std::optional<std::string> string_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

json summarize(const ClassContents& contents) {
  json classes = json::array();
  for (const auto& cls : contents.classes()) {
    json tags = json::object();
    std::size_t total = 0;
    for (const auto& grp : cls.subclasses) {
      tags[grp.tag] = grp.contents.size();
      total += grp.contents.size();
    }
    classes.push_back({{"name", cls.class_name}, {"tags", tags}, {"content_count", total}});
  }
  return classes;
}

json stats_json(const TraversalStats& stats) {
  return {{"n_visited", stats.n_visited}, {"m_relevant", stats.m_relevant}};
}

json history_json(const HistoryRecord& r) {
  return {{"id", r.id},
          {"url", r.url},
          {"timestamp", format_iso8601(r.timestamp)},
          {"status", r.ok ? "ok" : "failed"},
          {"reason", r.ok ? json(nullptr) : json(r.failure_reason)},
          {"csv_path", r.csv_path ? json(*r.csv_path) : json(nullptr)},
          {"stats", stats_json(r.stats)}};
}

}  // namespace

// ---------------------------------------------------------------------------
// ServiceConfig

ServiceConfig ServiceConfig::from_env(ServiceConfig base) {
  if (const char* dir = std::getenv("SCRAPEFLOW_DATA_DIR"); dir && *dir) base.data_dir = dir;
  if (const char* bind = std::getenv("SCRAPEFLOW_BIND"); bind && *bind) {
    std::string_view b = bind;
    auto colon = b.rfind(':');
    if (colon == std::string_view::npos) throw InvalidArgument("SCRAPEFLOW_BIND must be host:port");
    auto port = parse_long(b.substr(colon + 1));
    if (!port || *port < 0 || *port > 65535)
      throw InvalidArgument("SCRAPEFLOW_BIND has an invalid port");
    base.host = std::string(b.substr(0, colon));
    base.port = static_cast<int>(*port);
  }
  if (const char* ttl = std::getenv("SCRAPEFLOW_SESSION_TTL_H"); ttl && *ttl) {
    auto hours = parse_long(ttl);
    if (!hours || *hours <= 0) throw InvalidArgument("SCRAPEFLOW_SESSION_TTL_H must be a positive integer");
    base.session_ttl = std::chrono::hours(*hours);
  }
  return base;
}

// ---------------------------------------------------------------------------
// JobCache

JobCache::JobCache(std::size_t per_user, std::chrono::milliseconds ttl)
    : per_user_(per_user), ttl_(ttl) {
  if (per_user_ == 0) throw InvalidArgument("job cache capacity must be positive");
}

void JobCache::expire_locked(UtcTime now) {
  for (auto it = by_id_.begin(); it != by_id_.end();) {
    if (now - it->second->last_used > ttl_) {
      lru_[it->second->owner].remove(it->first);
      it = by_id_.erase(it);
    } else {
      ++it;
    }
  }
}

std::shared_ptr<ScrapeJob> JobCache::add(ScrapeJob job, UtcTime now) {
  std::lock_guard lock(mutex_);
  expire_locked(now);
  job.created_at = job.last_used = now;
  auto ptr = std::make_shared<ScrapeJob>(std::move(job));
  auto& order = lru_[ptr->owner];
  order.push_front(ptr->id);
  by_id_[ptr->id] = ptr;
  while (order.size() > per_user_) {
    by_id_.erase(order.back());
    order.pop_back();
  }
  return ptr;
}

std::shared_ptr<ScrapeJob> JobCache::get(const std::string& id, UtcTime now) {
  std::lock_guard lock(mutex_);
  expire_locked(now);
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return nullptr;
  auto& order = lru_[it->second->owner];
  order.remove(id);
  order.push_front(id);
  it->second->last_used = now;
  return it->second;
}

bool JobCache::mark_exported(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto it = by_id_.find(id);
  if (it == by_id_.end() || it->second->state == JobState::Exported) return false;
  it->second->state = JobState::Exported;
  return true;
}

std::size_t JobCache::size() const {
  std::lock_guard lock(mutex_);
  return by_id_.size();
}

// ---------------------------------------------------------------------------
// Service

Service::Service(ServiceConfig config, Fetcher& fetcher, Clock clock)
    : config_(std::move(config)),
      fetcher_(fetcher),
      clock_(std::move(clock)),
      store_(config_.data_dir),
      accounts_(store_, clock_, AccountOptions{config_.pbkdf2_iterations, config_.session_ttl}),
      history_(store_, accounts_),
      jobs_(config_.max_jobs_per_user, config_.job_ttl),
      server_(std::make_unique<httplib::Server>()) {
  mount();
}

Service::~Service() { stop(); }

int Service::start() {
  int port = config_.port == 0 ? server_->bind_to_any_port(config_.host)
                               : (server_->bind_to_port(config_.host, config_.port)
                                      ? config_.port
                                      : -1);
  if (port < 0)
    throw Error("bind_failed", "cannot bind " + config_.host + ":" + std::to_string(config_.port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  log::info("listening on " + config_.host + ":" + std::to_string(port));
  return port;
}

void Service::run() {
  if (!server_->bind_to_port(config_.host, config_.port))
    throw Error("bind_failed", "cannot bind " + config_.host + ":" + std::to_string(config_.port));
  log::info("listening on " + config_.host + ":" + std::to_string(config_.port));
  server_->listen_after_bind();
}

void Service::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

void Service::mount() {
  auto& s = *server_;
  s.set_default_headers({{"Access-Control-Allow-Origin", config_.cors_origin},
                         {"Access-Control-Allow-Headers", "Authorization, Content-Type"},
                         {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  s.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });

  auto wrap = [this](void (Service::*fn)(const httplib::Request&, httplib::Response&)) {
    return [this, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        (this->*fn)(req, res);
      } catch (const StoreUnavailable& e) {
        log::error(e.what());
        send_error(res, 503, e.code(), "storage unavailable");
      } catch (const std::exception& e) {
        log::error(std::string("unhandled: ") + e.what());
        send_error(res, 500, "internal_error");
      }
    };
  };
  s.Post("/api/register", wrap(&Service::handle_register));
  s.Post("/api/login", wrap(&Service::handle_login));
  s.Post("/api/logout", wrap(&Service::handle_logout));
  s.Post("/api/scrape", wrap(&Service::handle_scrape));
  s.Post(R"(/api/jobs/([^/]+)/refine)", wrap(&Service::handle_refine));
  s.Post(R"(/api/jobs/([^/]+)/export)", wrap(&Service::handle_export));
  s.Get("/api/history", wrap(&Service::handle_history));
  s.Get(R"(/api/download/([^/]+))", wrap(&Service::handle_download));
  s.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  });
}

std::optional<Session> Service::authorize(const httplib::Request& req, httplib::Response& res) {
  auto header = req.get_header_value("Authorization");
  constexpr std::string_view kBearer = "Bearer ";
  if (header.size() > kBearer.size() && header.compare(0, kBearer.size(), kBearer) == 0) {
    if (auto session = accounts_.resolve(text::trim(header.substr(kBearer.size()))))
      return session;
  }
  send_error(res, 401, "unauthorized", "missing, invalid or expired session token");
  return std::nullopt;
}

void Service::handle_register(const httplib::Request& req, httplib::Response& res) {
  auto body = body_object(req, res);
  if (!body) return;
  auto username = string_field(*body, "username");
  auto password = string_field(*body, "password");
  if (!username || !password) {
    send_error(res, 400, "validation_error", "username and password are required strings");
    return;
  }
  try {
    if (accounts_.create_user(*username, *password) == CreateUserResult::UsernameExists) {
      send_error(res, 409, "username_exists");
      return;
    }
  } catch (const ValidationError& e) {
    send_error(res, 400, "validation_error", e.what());
    return;
  }
  send_json(res, 201, {{"username", *username}});
}

void Service::handle_login(const httplib::Request& req, httplib::Response& res) {
  auto body = body_object(req, res);
  if (!body) return;
  auto username = string_field(*body, "username");
  auto password = string_field(*body, "password");
  if (!username || !password) {
    send_error(res, 400, "validation_error", "username and password are required strings");
    return;
  }
  auto session = accounts_.authenticate(*username, *password);
  if (!session) {
    send_error(res, 401, "invalid_credentials");
    return;
  }
  send_json(res, 200, {{"token", session->token},
                       {"username", session->username},
                       {"expires_at", format_iso8601(session->expires_at)}});
}

void Service::handle_logout(const httplib::Request& req, httplib::Response& res) {
  auto session = authorize(req, res);
  if (!session) return;
  accounts_.revoke(session->token);
  res.status = 204;
}

void Service::handle_scrape(const httplib::Request& req, httplib::Response& res) {
  auto session = authorize(req, res);
  if (!session) return;
  auto body = body_object(req, res);
  if (!body) return;

  auto url = string_field(*body, "url");
  if (!url) {
    send_error(res, 400, "validation_error", "url is required");
    return;
  }
  auto consent = body->find("consent");
  if (consent == body->end() || !consent->is_boolean()) {
    send_error(res, 400, "validation_error", "consent must be a boolean");
    return;
  }
  FetchRequest fetch_req;
  fetch_req.url = *url;
  fetch_req.consent = consent->get<bool>();
  fetch_req.respect_robots = body->value("respect_robots", true);
  fetch_req.timeout = config_.fetch_timeout;

  ExtractOptions options;
  try {
    fetch_req.validate();
    if (auto tags = body->find("tags"); tags != body->end() && !tags->is_null()) {
      if (tags->is_string()) {
        options.tags = TagSet::parse_list(tags->get<std::string>());
      } else if (tags->is_array()) {
        std::vector<std::string> names;
        for (const auto& t : *tags) {
          if (!t.is_string()) throw InvalidArgument("tags must be strings");
          names.push_back(t.get<std::string>());
        }
        options.tags = TagSet(names);
      } else {
        throw InvalidArgument("tags must be a list or a comma-separated string");
      }
    }
    if (auto rx = string_field(*body, "filter_regex"); rx && !rx->empty())
      options.rule = FilterRule::regex(*rx);
  } catch (const InvalidUrl& e) {
    send_error(res, 400, "invalid_url", e.what());
    return;
  } catch (const Error& e) {
    send_error(res, 400, "validation_error", e.what());
    return;
  }

  HistoryRecord record;
  record.username = session->username;
  record.url = *url;
  record.timestamp = clock_();

  auto fail = [&](int status, std::string_view error, const std::string& reason,
                  const std::string& message) {
    record.ok = false;
    record.failure_reason = reason;
    auto id = history_.record_history(record);
    send_error(res, status, error, message, {{"reason", reason}, {"history_id", id}});
  };

  std::optional<PageScrape> page;
  try {
    page = scrape_page(fetcher_, fetch_req, options);
  } catch (const ConsentDenied& e) {
    return fail(403, "consent_denied", std::string(to_string(e.reason())), e.what());
  } catch (const HttpStatusError& e) {
    return fail(502, "upstream_error", "http_status:" + std::to_string(e.status()), e.what());
  } catch (const FetchError& e) {
    return fail(502, "upstream_error", e.code(), e.what());
  } catch (const NonHtmlContent& e) {
    return fail(422, "unprocessable", e.code(), e.what());
  } catch (const EmptyDocument& e) {
    return fail(422, "unprocessable", e.code(), e.what());
  } catch (const EncodingError& e) {
    return fail(422, "unprocessable", e.code(), e.what());
  }

  const auto& extraction = page->extraction;
  record.stats = extraction.stats;
  auto history_id = history_.record_history(record);

  ScrapeJob job;
  job.id = random_token();
  job.owner = session->username;
  job.url = page->response.final_url;
  job.history_id = history_id;
  job.contents = extraction.contents;
  job.stats = extraction.stats;
  auto stored = jobs_.add(std::move(job), clock_());

  json out = {{"job_id", stored->id},
              {"history_id", history_id},
              {"url", *url},
              {"final_url", page->response.final_url},
              {"status", page->response.status},
              {"class_count", extraction.contents.classes().size()},
              {"triple_count", extraction.contents.triple_count()},
              {"classes", summarize(extraction.contents)},
              {"stats", stats_json(extraction.stats)},
              {"efficiency", efficiency(extraction.stats)},
              {"data", to_json(extraction.contents)}};
  send_json(res, 200, out);
}

std::shared_ptr<ScrapeJob> Service::owned_job(const Session& session, const std::string& id,
                                              httplib::Response& res) {
  auto job = jobs_.get(id, clock_());
  if (!job) {
    send_error(res, 404, "job_not_found");
    return nullptr;
  }
  if (job->owner != session.username) {
    send_error(res, 403, "forbidden");
    return nullptr;
  }
  return job;
}

namespace {

// {"mode": ..., "needle": ...}; answers 400 and returns nothing on bad input.
std::optional<RefinementQuery> parse_refinement(const json& j, httplib::Response& res) {
  auto mode = string_field(j, "mode");
  auto needle = string_field(j, "needle");
  if (!mode || !needle) {
    send_error(res, 400, "validation_error", "mode and needle are required strings");
    return std::nullopt;
  }
  try {
    auto q = RefinementQuery::parse(*mode, *needle);
    if (q.needle.empty()) throw InvalidArgument("needle must not be empty");
    return q;
  } catch (const Error& e) {
    send_error(res, 400, "validation_error", e.what());
    return std::nullopt;
  }
}

}  // namespace

void Service::handle_refine(const httplib::Request& req, httplib::Response& res) {
  auto session = authorize(req, res);
  if (!session) return;
  auto job = owned_job(*session, req.matches[1], res);
  if (!job) return;
  auto body = body_object(req, res);
  if (!body) return;
  auto query = parse_refinement(*body, res);
  if (!query) return;

  auto refined = refine(job->contents, *query);
  send_json(res, 200, {{"job_id", job->id},
                       {"class_count", refined.classes().size()},
                       {"triple_count", refined.triple_count()},
                       {"classes", summarize(refined)},
                       {"data", to_json(refined)}});
}

void Service::handle_export(const httplib::Request& req, httplib::Response& res) {
  auto session = authorize(req, res);
  if (!session) return;
  auto job = owned_job(*session, req.matches[1], res);
  if (!job) return;
  auto body = body_object(req, res, /*allow_empty=*/true);
  if (!body) return;

  ClassContents contents = job->contents;
  if (auto r = body->find("refinement"); r != body->end() && !r->is_null()) {
    if (!r->is_object()) {
      send_error(res, 400, "validation_error", "refinement must be an object");
      return;
    }
    auto query = parse_refinement(*r, res);
    if (!query) return;
    contents = refine(job->contents, *query);
  }

  auto doc = to_csv(contents, session->username, clock_());
  auto download_id = random_token();
  auto path = write_csv_file(doc, config_.data_dir / "downloads" / download_id);
  {
    std::lock_guard lock(downloads_mutex_);
    downloads_[download_id] = {session->username, path, doc.filename};
  }
  history_.attach_csv(session->username, job->history_id, path.string());
  jobs_.mark_exported(job->id);

  send_json(res, 200, {{"download_id", download_id},
                       {"filename", doc.filename},
                       {"row_count", doc.rows.size()}});
}

void Service::handle_history(const httplib::Request& req, httplib::Response& res) {
  auto session = authorize(req, res);
  if (!session) return;
  auto param = [&](const char* name, long fallback) -> std::optional<long> {
    if (!req.has_param(name)) return fallback;
    auto v = parse_long(req.get_param_value(name));
    if (!v || *v < 0) return std::nullopt;
    return v;
  };
  auto limit = param("limit", 50);
  auto offset = param("offset", 0);
  if (!limit || !offset || *limit == 0) {
    send_error(res, 400, "validation_error", "limit must be positive and offset non-negative");
    return;
  }
  auto capped = std::min<std::size_t>(static_cast<std::size_t>(*limit), config_.max_history_page);
  auto records = history_.list_history(session->username, capped, static_cast<std::size_t>(*offset));
  json list = json::array();
  for (const auto& r : records) list.push_back(history_json(r));
  send_json(res, 200, {{"records", list},
                       {"pagination",
                        {{"limit", capped},
                         {"offset", *offset},
                         {"total", history_.count(session->username)}}}});
}

void Service::handle_download(const httplib::Request& req, httplib::Response& res) {
  auto session = authorize(req, res);
  if (!session) return;
  Download download;
  {
    std::lock_guard lock(downloads_mutex_);
    auto it = downloads_.find(req.matches[1]);
    if (it == downloads_.end()) {
      send_error(res, 404, "download_not_found");
      return;
    }
    download = it->second;
  }
  if (download.owner != session->username) {
    send_error(res, 403, "forbidden");
    return;
  }
  std::ifstream in(download.path, std::ios::binary);
  if (!in) {
    send_error(res, 404, "download_not_found", "file is no longer available");
    return;
  }
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  res.status = 200;
  res.set_header("Content-Disposition", "attachment; filename=\"" + download.filename + "\"");
  res.set_content(std::move(bytes), "text/csv; charset=utf-8");
}

}  // namespace scrapeflow
