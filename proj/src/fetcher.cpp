#include "scrapeflow/fetcher.hpp"

#include <netdb.h>
#include <sys/socket.h>

#include <httplib.h>

#include <thread>

#include "scrapeflow/log.hpp"
#include "scrapeflow/robots.hpp"
#include "scrapeflow/text.hpp"
#include "scrapeflow/version.hpp"

namespace scrapeflow {

namespace {

int default_port(std::string_view scheme) { return scheme == "https" ? 443 : 80; }

std::string strip_fragment(std::string_view s) {
  return std::string(s.substr(0, s.find('#')));
}

bool resolves(const std::string& host) {
  std::string name = host;
  if (name.size() > 2 && name.front() == '[' && name.back() == ']')
    name = name.substr(1, name.size() - 2);
  addrinfo hints{};
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  int rc = ::getaddrinfo(name.c_str(), nullptr, &hints, &res);
  if (res) ::freeaddrinfo(res);
  return rc == 0;
}

template <class Duration>
std::pair<time_t, time_t> split_timeout(Duration d) {
  auto us = std::chrono::duration_cast<std::chrono::microseconds>(d).count();
  return {static_cast<time_t>(us / 1'000'000), static_cast<time_t>(us % 1'000'000)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Url

std::string Url::origin() const {
  std::string out = scheme + "://" + host;
  if (port != default_port(scheme)) out += ":" + std::to_string(port);
  return out;
}

Url Url::parse(std::string_view text_in) {
  auto in = text::trim(text_in);
  auto sep = in.find("://");
  if (sep == std::string::npos) throw InvalidUrl("URL lacks a scheme: " + in);
  Url url;
  url.scheme = text::to_lower_ascii(in.substr(0, sep));
  if (url.scheme != "http" && url.scheme != "https")
    throw InvalidUrl("unsupported scheme: " + url.scheme);

  auto rest = std::string_view(in).substr(sep + 3);
  auto auth_end = rest.find_first_of("/?#");
  auto authority = rest.substr(0, auth_end);
  if (auto at = authority.rfind('@'); at != std::string_view::npos)
    authority = authority.substr(at + 1);

  std::string_view host = authority;
  std::string_view port_text;
  if (!authority.empty() && authority.front() == '[') {
    auto close = authority.find(']');
    if (close == std::string_view::npos) throw InvalidUrl("bad IPv6 literal: " + in);
    host = authority.substr(0, close + 1);
    auto after = authority.substr(close + 1);
    if (!after.empty()) {
      if (after.front() != ':') throw InvalidUrl("bad authority: " + in);
      port_text = after.substr(1);
    }
  } else if (auto colon = authority.rfind(':'); colon != std::string_view::npos) {
    host = authority.substr(0, colon);
    port_text = authority.substr(colon + 1);
  }
  if (host.empty()) throw InvalidUrl("URL has no host: " + in);
  for (char c : host) {
    if (text::is_html_space(c) || c == '/' || c == '\\')
      throw InvalidUrl("invalid host: " + std::string(host));
  }
  url.host = text::to_lower_ascii(host);

  url.port = default_port(url.scheme);
  if (!port_text.empty()) {
    if (port_text.size() > 5 || port_text.find_first_not_of("0123456789") != std::string_view::npos)
      throw InvalidUrl("invalid port: " + std::string(port_text));
    url.port = std::stoi(std::string(port_text));
    if (url.port < 1 || url.port > 65535) throw InvalidUrl("port out of range");
  }

  url.target = auth_end == std::string_view::npos ? "/" : strip_fragment(rest.substr(auth_end));
  if (url.target.empty()) url.target = "/";
  if (url.target.front() == '?') url.target.insert(0, "/");
  for (char c : url.target) {
    if (c == ' ' || c == '\n' || c == '\r' || c == '\t')
      throw InvalidUrl("URL contains whitespace: " + in);
  }
  return url;
}

Url Url::resolve(std::string_view reference) const {
  auto ref = text::trim(reference);
  if (ref.find("://") != std::string::npos) return parse(ref);
  if (ref.rfind("//", 0) == 0) return parse(scheme + ":" + ref);
  Url out = *this;
  if (ref.empty()) return out;
  if (ref.front() == '/') {
    out.target = strip_fragment(ref);
  } else if (ref.front() == '?') {
    out.target = target.substr(0, target.find('?')) + strip_fragment(ref);
  } else {
    auto path = target.substr(0, target.find('?'));
    out.target = path.substr(0, path.rfind('/') + 1) + strip_fragment(ref);
  }
  if (out.target.empty()) out.target = "/";
  return out;
}

// ---------------------------------------------------------------------------
// Requests and responses

void FetchRequest::validate() const {
  (void)Url::parse(url);
  if (timeout.count() <= 0) throw InvalidArgument("timeout must be positive");
  if (max_body == 0) throw InvalidArgument("max_body must be positive");
}

std::string FetchResponse::content_type() const {
  auto it = headers.find("content-type");
  return it == headers.end() ? std::string{} : it->second;
}

bool FetchResponse::is_html() const {
  auto ct = text::to_lower_ascii(content_type());
  if (text::trim(ct).empty()) return true;
  return ct.find("text/html") != std::string::npos ||
         ct.find("application/xhtml+xml") != std::string::npos;
}

std::string_view to_string(DenyReason reason) {
  return reason == DenyReason::User ? "user" : "robots";
}

std::string default_user_agent() {
  return std::string(kRobotsToken) + "/" + std::string(kVersion) +
         " (+https://scrapeflow.invalid/bot)";
}

ConsentDecision check_consent(const FetchRequest& request,
                              const std::optional<std::string>& robots_body) {
  if (!request.consent) return {false, DenyReason::User};
  if (!request.respect_robots || !robots_body) return {true, std::nullopt};
  if (!text::is_valid_utf8(*robots_body) ||
      robots_body->find('\0') != std::string::npos) {
    log::warn("ignoring undecodable robots.txt for " + request.url);
    return {true, std::nullopt};
  }
  Url url = Url::parse(request.url);
  auto rules = RobotsRules::parse(*robots_body, kRobotsToken);
  if (!rules.allowed(url.target)) return {false, DenyReason::Robots};
  return {true, std::nullopt};
}

// ---------------------------------------------------------------------------
// Fetcher

Fetcher::Fetcher(FetcherOptions options) : options_(std::move(options)) {}

Fetcher::HostSlot& Fetcher::slot_for(const std::string& origin) {
  std::lock_guard lock(slots_mutex_);
  auto& slot = slots_[origin];
  if (!slot) slot = std::make_unique<HostSlot>();
  return *slot;
}

FetchResponse Fetcher::get_once(const Url& url, const FetchRequest& request) {
  if (!resolves(url.host)) throw DnsError("cannot resolve host " + url.host);

  std::unique_lock<std::mutex> host_lock;
  if (options_.politeness) {
    auto& slot = slot_for(url.origin());
    host_lock = std::unique_lock(slot.mutex);
    auto ready = slot.last + options_.politeness_delay;
    if (slot.last != std::chrono::steady_clock::time_point{} &&
        std::chrono::steady_clock::now() < ready) {
      std::this_thread::sleep_until(ready);
    }
  }

  httplib::Client client(url.scheme + "://" + url.host + ":" + std::to_string(url.port));
  auto [sec, usec] = split_timeout(request.timeout);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
  client.set_follow_location(false);
  client.set_keep_alive(false);

  httplib::Headers headers;
  HeaderMap merged = request.headers;
  merged.try_emplace("user-agent", options_.user_agent);
  merged.try_emplace("accept", "text/html");
  for (const auto& [k, v] : merged) headers.emplace(k, v);

  std::string body;
  bool too_large = false;
  auto start = std::chrono::steady_clock::now();
  auto result = client.Get(url.target, headers, [&](const char* data, std::size_t len) {
    if (body.size() + len > request.max_body) {
      too_large = true;
      return false;
    }
    body.append(data, len);
    return true;
  });
  auto elapsed = std::chrono::steady_clock::now() - start;

  if (options_.politeness) slot_for(url.origin()).last = std::chrono::steady_clock::now();

  if (!result) {
    auto err = result.error();
    if (too_large) throw BodyTooLarge("body exceeds " + std::to_string(request.max_body) + " bytes");
    if (err == httplib::Error::ConnectionTimeout) throw TimeoutError("connect timed out: " + url.str());
    if (err == httplib::Error::Read && elapsed >= request.timeout * 9 / 10)
      throw TimeoutError("read timed out: " + url.str());
    throw ConnectError(httplib::to_string(err) + ": " + url.str());
  }

  FetchResponse response;
  response.status = result->status;
  for (const auto& [k, v] : result->headers) {
    auto key = text::to_lower_ascii(k);
    auto [it, inserted] = response.headers.try_emplace(key, v);
    if (!inserted) it->second += ", " + v;
  }
  response.body = std::move(body);
  response.final_url = url.str();
  response.elapsed = std::max<std::chrono::nanoseconds>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(elapsed), std::chrono::nanoseconds{1});
  return response;
}

std::optional<std::string> Fetcher::fetch_robots(const Url& url, const FetchRequest& request) {
  Url robots = url;
  robots.target = "/robots.txt";
  try {
    auto r = get_once(robots, request);
    if (r.status >= 200 && r.status < 300) return std::move(r.body);
  } catch (const FetchError& e) {
    log::info("robots.txt unavailable for " + url.origin() + ": " + e.what());
  }
  return std::nullopt;
}

FetchResponse Fetcher::fetch(const FetchRequest& request) {
  request.validate();
  if (!request.consent) throw ConsentDenied(DenyReason::User);

  Url url = Url::parse(request.url);
  // robots.txt per origin, checked on every hop so a redirect can't escape it
  std::map<std::string, std::optional<std::string>> robots;
  auto check_robots = [&](const Url& target) {
    if (!request.respect_robots) return;
    auto origin = target.origin();
    auto it = robots.find(origin);
    if (it == robots.end()) it = robots.emplace(origin, fetch_robots(target, request)).first;
    FetchRequest hop = request;
    hop.url = target.str();
    auto decision = check_consent(hop, it->second);
    if (!decision.allowed) throw ConsentDenied(*decision.reason);
  };

  auto total = std::chrono::nanoseconds{0};
  for (std::size_t redirects = 0;; ++redirects) {
    check_robots(url);
    auto response = get_once(url, request);
    total += response.elapsed;
    bool redirect = response.status >= 300 && response.status < 400 &&
                    response.headers.count("location");
    if (redirect) {
      if (redirects >= request.max_redirects)
        throw TooManyRedirects("more than " + std::to_string(request.max_redirects) +
                               " redirects from " + request.url);
      url = url.resolve(response.headers.at("location"));
      continue;
    }
    if (response.status >= 400) throw HttpStatusError(response.status, url.str());
    response.elapsed = total;
    return response;
  }
}

}  // namespace scrapeflow
