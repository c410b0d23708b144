#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "scrapeflow/extractor.hpp"
#include "scrapeflow/fetcher.hpp"
#include "scrapeflow/persistence.hpp"
#include "scrapeflow/time.hpp"

namespace httplib {
class Server;
struct Request;
struct Response;
}  // namespace httplib

namespace scrapeflow {

struct ServiceConfig {
  std::filesystem::path data_dir = "scrapeflow-data";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::chrono::hours session_ttl{24};
  std::chrono::minutes job_ttl{60};
  std::size_t max_jobs_per_user = 100;
  std::size_t max_history_page = 500;
  int pbkdf2_iterations = 100'000;
  std::string cors_origin = "*";
  std::chrono::milliseconds fetch_timeout{30'000};

  // Overrides from SCRAPEFLOW_DATA_DIR, SCRAPEFLOW_BIND (host:port) and
  // SCRAPEFLOW_SESSION_TTL_H. Throws InvalidArgument on malformed values.
  static ServiceConfig from_env(ServiceConfig base);
};

enum class JobState { Scraped, Exported };

struct ScrapeJob {
  std::string id;
  std::string owner;
  std::string url;
  std::string history_id;
  ClassContents contents;  // immutable after creation
  TraversalStats stats;
  UtcTime created_at;
  UtcTime last_used;
  JobState state = JobState::Scraped;
};

// Per-user LRU of recent scrape results with an idle TTL.
class JobCache {
 public:
  JobCache(std::size_t per_user, std::chrono::milliseconds ttl);

  std::shared_ptr<ScrapeJob> add(ScrapeJob job, UtcTime now);
  // Expired and evicted jobs are gone. Touches the job on success.
  std::shared_ptr<ScrapeJob> get(const std::string& id, UtcTime now);
  // Moves Scraped -> Exported. Returns false if it was already exported.
  bool mark_exported(const std::string& id);
  std::size_t size() const;

 private:
  void expire_locked(UtcTime now);

  std::size_t per_user_;
  std::chrono::milliseconds ttl_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<ScrapeJob>> by_id_;
  std::map<std::string, std::list<std::string>> lru_;  // owner -> ids, most recent first
};

// JSON API over HTTP for the web frontend.
class Service {
 public:
  Service(ServiceConfig config, Fetcher& fetcher, Clock clock = system_clock_now);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds config.host:port (port 0 picks a free one), serves on a background
  // thread and returns the bound port. Throws StoreUnavailable / Error.
  int start();
  // Binds and serves on the calling thread until stop().
  void run();
  void stop();

  Accounts& accounts() { return accounts_; }
  History& history() { return history_; }
  JsonLinesStore& store() { return store_; }
  const ServiceConfig& config() const { return config_; }

 private:
  struct Download {
    std::string owner;
    std::filesystem::path path;
    std::string filename;
  };

  void mount();
  std::optional<Session> authorize(const httplib::Request& req, httplib::Response& res);

  void handle_register(const httplib::Request& req, httplib::Response& res);
  void handle_login(const httplib::Request& req, httplib::Response& res);
  void handle_logout(const httplib::Request& req, httplib::Response& res);
  void handle_scrape(const httplib::Request& req, httplib::Response& res);
  void handle_refine(const httplib::Request& req, httplib::Response& res);
  void handle_export(const httplib::Request& req, httplib::Response& res);
  void handle_history(const httplib::Request& req, httplib::Response& res);
  void handle_download(const httplib::Request& req, httplib::Response& res);

  std::shared_ptr<ScrapeJob> owned_job(const Session& session, const std::string& id,
                                       httplib::Response& res);

  ServiceConfig config_;
  Fetcher& fetcher_;
  Clock clock_;
  JsonLinesStore store_;
  Accounts accounts_;
  History history_;
  JobCache jobs_;
  std::mutex downloads_mutex_;
  std::map<std::string, Download> downloads_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace scrapeflow
