#include "scrapeflow/time.hpp"

#include <charconv>
#include <cstdio>

namespace scrapeflow {

namespace {

using namespace std::chrono;

struct Civil {
  int year;
  unsigned month, day;
  long hour, minute, second, millis;
};

Civil to_civil(UtcTime t) {
  auto day_point = floor<days>(t);
  year_month_day ymd{day_point};
  hh_mm_ss hms{t - day_point};
  return {int(ymd.year()),
          unsigned(ymd.month()),
          unsigned(ymd.day()),
          static_cast<long>(hms.hours().count()),
          static_cast<long>(hms.minutes().count()),
          static_cast<long>(hms.seconds().count()),
          static_cast<long>(hms.subseconds().count())};
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace

UtcTime system_clock_now() {
  return floor<milliseconds>(system_clock::now());
}

Clock fixed_clock(UtcTime t) {
  return [t] { return t; };
}

std::string format_compact(UtcTime t) {
  auto c = to_civil(t);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d%02u%02uT%02ld%02ld%02ldZ", c.year,
                c.month, c.day, c.hour, c.minute, c.second);
  return buf;
}

std::string format_iso8601(UtcTime t) {
  auto c = to_civil(t);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ld.%03ldZ",
                c.year, c.month, c.day, c.hour, c.minute, c.second, c.millis);
  return buf;
}

std::optional<UtcTime> parse_iso8601(std::string_view s) {
  // 2024-01-02T03:04:05Z is the shortest accepted form
  if (s.size() < 20 || s.back() != 'Z' || s[4] != '-' || s[7] != '-' ||
      (s[10] != 'T' && s[10] != 't') || s[13] != ':' || s[16] != ':') {
    return std::nullopt;
  }
  int y, mo, d, h, mi, se, ms = 0;
  if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), mo) ||
      !parse_int(s.substr(8, 2), d) || !parse_int(s.substr(11, 2), h) ||
      !parse_int(s.substr(14, 2), mi) || !parse_int(s.substr(17, 2), se)) {
    return std::nullopt;
  }
  auto rest = s.substr(19, s.size() - 20);
  if (!rest.empty()) {
    if (rest[0] != '.' || rest.size() < 2 || rest.size() > 4) return std::nullopt;
    auto frac = std::string(rest.substr(1));
    frac.resize(3, '0');
    if (!parse_int(frac, ms)) return std::nullopt;
  }
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                     day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || se > 60) return std::nullopt;
  return UtcTime{sys_days{ymd}} + hours{h} + minutes{mi} + seconds{se} +
         milliseconds{ms};
}

}  // namespace scrapeflow
