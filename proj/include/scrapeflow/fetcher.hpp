#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "scrapeflow/errors.hpp"

namespace scrapeflow {

struct Url {
  std::string scheme;  // "http" | "https"
  std::string host;
  int port = 0;
  std::string target;  // path + query, starts with '/'

  // scheme://host[:port] (default ports omitted)
  std::string origin() const;
  std::string str() const { return origin() + target; }

  // Throws InvalidUrl.
  static Url parse(std::string_view text);

  // Resolves a Location header value against this URL.
  Url resolve(std::string_view reference) const;
};

// Stable, machine-readable fetch failure. code() is one of dns_error,
// connect_error, timeout, too_many_redirects, body_too_large, http_status,
// invalid_url, consent_denied.
class FetchError : public Error {
 public:
  using Error::Error;
};

class InvalidUrl : public FetchError {
 public:
  explicit InvalidUrl(const std::string& m) : FetchError("invalid_url", m) {}
};
class DnsError : public FetchError {
 public:
  explicit DnsError(const std::string& m) : FetchError("dns_error", m) {}
};
class ConnectError : public FetchError {
 public:
  explicit ConnectError(const std::string& m) : FetchError("connect_error", m) {}
};
class TimeoutError : public FetchError {
 public:
  explicit TimeoutError(const std::string& m) : FetchError("timeout", m) {}
};
class TooManyRedirects : public FetchError {
 public:
  explicit TooManyRedirects(const std::string& m) : FetchError("too_many_redirects", m) {}
};
class BodyTooLarge : public FetchError {
 public:
  explicit BodyTooLarge(const std::string& m) : FetchError("body_too_large", m) {}
};

class HttpStatusError : public FetchError {
 public:
  HttpStatusError(int status, const std::string& url)
      : FetchError("http_status", "HTTP " + std::to_string(status) + " for " + url),
        status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

enum class DenyReason { User, Robots };

std::string_view to_string(DenyReason reason);

class ConsentDenied : public FetchError {
 public:
  explicit ConsentDenied(DenyReason reason)
      : FetchError("consent_denied",
                   std::string("scraping not permitted: ") + std::string(to_string(reason))),
        reason_(reason) {}
  DenyReason reason() const noexcept { return reason_; }

 private:
  DenyReason reason_;
};

// Lowercase header names.
using HeaderMap = std::map<std::string, std::string>;

struct FetchRequest {
  std::string url;
  HeaderMap headers;  // defaults fill in missing User-Agent / Accept
  std::chrono::milliseconds timeout{30'000};
  std::size_t max_redirects = 5;
  std::size_t max_body = 8u << 20;
  bool consent = false;
  bool respect_robots = true;

  // Throws InvalidUrl / InvalidArgument.
  void validate() const;
};

struct FetchResponse {
  int status = 0;
  HeaderMap headers;
  std::string body;
  std::string final_url;
  std::chrono::nanoseconds elapsed{0};

  std::string content_type() const;
  // text/html or application/xhtml+xml, or no Content-Type at all.
  bool is_html() const;
};

struct ConsentDecision {
  bool allowed = true;
  std::optional<DenyReason> reason;
};

// User flag first, then robots.txt when requested. A missing body means no
// robots.txt (allow); an undecodable body is treated the same and logged.
ConsentDecision check_consent(const FetchRequest& request,
                              const std::optional<std::string>& robots_body);

// "scrapeflow/<version> (+<docs-url>)"
std::string default_user_agent();

struct FetcherOptions {
  std::string user_agent = default_user_agent();
  // When set, at most one request per host is in flight and consecutive
  // requests to a host are spaced by `politeness_delay`.
  bool politeness = false;
  std::chrono::milliseconds politeness_delay{0};
};

// Blocking HTTP/1.1 client. Thread-safe: concurrent fetch() calls are
// independent apart from the per-host politeness lock.
class Fetcher {
 public:
  explicit Fetcher(FetcherOptions options = {});

  // Applies the consent gate (no request at all when consent is false),
  // follows redirects, enforces the body cap and raises on 4xx/5xx.
  FetchResponse fetch(const FetchRequest& request);

  // GET <origin>/robots.txt. Empty when it is absent or unreachable.
  std::optional<std::string> fetch_robots(const Url& url, const FetchRequest& request);

 private:
  struct HostSlot {
    std::mutex mutex;
    std::chrono::steady_clock::time_point last{};
  };

  FetchResponse get_once(const Url& url, const FetchRequest& request);
  HostSlot& slot_for(const std::string& origin);

  FetcherOptions options_;
  std::mutex slots_mutex_;
  std::unordered_map<std::string, std::unique_ptr<HostSlot>> slots_;
};

}  // namespace scrapeflow
