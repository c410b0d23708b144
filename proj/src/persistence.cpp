#include "scrapeflow/persistence.hpp"

#include <fcntl.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>

#include "scrapeflow/errors.hpp"
#include "scrapeflow/log.hpp"
#include "scrapeflow/text.hpp"

namespace scrapeflow {

namespace fs = std::filesystem;

namespace {

bool matches(const Document& doc, const Document& filter) {
  if (!filter.is_object()) return true;
  for (const auto& [k, v] : filter.items()) {
    auto it = doc.find(k);
    if (it == doc.end() || *it != v) return false;
  }
  return true;
}

void write_all(int fd, const std::string& data, const fs::path& path) {
  std::size_t done = 0;
  while (done < data.size()) {
    auto n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw StoreUnavailable("write failed for " + path.string() + ": " + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

void fsync_dir(const fs::path& dir) {
  int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

std::string random_bytes(std::size_t n) {
  std::string out(n, '\0');
  if (RAND_bytes(reinterpret_cast<unsigned char*>(out.data()), static_cast<int>(n)) != 1)
    throw std::runtime_error("RAND_bytes failed");
  return out;
}

std::optional<std::string> from_hex(std::string_view hex) {
  if (hex.size() % 2) return std::nullopt;
  std::string out;
  out.reserve(hex.size() / 2);
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = nibble(hex[i]), lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<char>(hi * 16 + lo));
  }
  return out;
}

std::string pbkdf2(std::string_view password, std::string_view salt, int iterations) {
  std::string out(32, '\0');
  if (PKCS5_PBKDF2_HMAC(password.data(), static_cast<int>(password.size()),
                        reinterpret_cast<const unsigned char*>(salt.data()),
                        static_cast<int>(salt.size()), iterations, EVP_sha256(),
                        static_cast<int>(out.size()),
                        reinterpret_cast<unsigned char*>(out.data())) != 1) {
    throw std::runtime_error("PBKDF2 failed");
  }
  return out;
}

std::string col(std::string_view name) { return std::string(name); }

}  // namespace

// ---------------------------------------------------------------------------
// JsonLinesStore

JsonLinesStore::JsonLinesStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_))
    throw StoreUnavailable("cannot use data directory " + dir_.string());
}

fs::path JsonLinesStore::file_for(const std::string& collection) const {
  return dir_ / (collection + ".jsonl");
}

JsonLinesStore::Collection& JsonLinesStore::collection(const std::string& name) const {
  if (name.empty() || name.find_first_of("/\\.") != std::string::npos)
    throw InvalidArgument("invalid collection name: " + name);
  std::lock_guard lock(registry_mutex_);
  auto& slot = collections_[name];
  if (!slot) slot = std::make_unique<Collection>();
  if (!slot->loaded) {
    load(name, *slot);
    slot->loaded = true;
  }
  return *slot;
}

void JsonLinesStore::load(const std::string& name, Collection& c) const {
  auto path = file_for(name);
  if (!fs::exists(path)) return;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreUnavailable("cannot read " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0, line_no = 0;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    bool terminated = end != std::string::npos;
    if (!terminated) end = content.size();
    auto line = std::string_view(content).substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (text::trim(line).empty()) continue;
    Document doc;
    try {
      doc = Document::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      if (!terminated) {
        log::warn("dropping torn final line in " + path.string());
        break;
      }
      throw StoreUnavailable("corrupt line " + std::to_string(line_no) + " in " + path.string());
    }
    if (doc.contains("_id") && doc["_id"].is_string()) {
      const auto& id = doc["_id"].get_ref<const std::string&>();
      if (!id.empty() && id.find_first_not_of("0123456789") == std::string::npos)
        c.next_id = std::max(c.next_id, static_cast<std::size_t>(std::stoull(id)) + 1);
    }
    c.docs.push_back(std::move(doc));
  }
}

std::string JsonLinesStore::append_locked(const std::string& name, Collection& c, Document doc) {
  auto id = std::to_string(c.next_id);
  Document stored = {{"_id", id}};
  for (auto& [k, v] : doc.items()) {
    if (k != "_id") stored[k] = v;
  }
  auto path = file_for(name);
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0600);
  if (fd < 0) throw StoreUnavailable("cannot open " + path.string() + ": " + std::strerror(errno));
  try {
    write_all(fd, stored.dump() + "\n", path);
    if (::fsync(fd) != 0) throw StoreUnavailable("fsync failed for " + path.string());
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  ++c.next_id;
  c.docs.push_back(std::move(stored));
  return id;
}

void JsonLinesStore::rewrite_locked(const std::string& name, const Collection& c) {
  auto path = file_for(name);
  auto tmp = path;
  tmp += ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
  if (fd < 0) throw StoreUnavailable("cannot open " + tmp.string() + ": " + std::strerror(errno));
  try {
    std::string data;
    for (const auto& d : c.docs) data += d.dump() + "\n";
    write_all(fd, data, tmp);
    if (::fsync(fd) != 0) throw StoreUnavailable("fsync failed for " + tmp.string());
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw StoreUnavailable("rename failed for " + path.string() + ": " + ec.message());
  fsync_dir(dir_);
}

std::string JsonLinesStore::insert(const std::string& name, Document doc) {
  auto& c = collection(name);
  std::unique_lock lock(c.mutex);
  return append_locked(name, c, std::move(doc));
}

std::optional<std::string> JsonLinesStore::insert_unique(const std::string& name,
                                                         const std::string& key, Document doc) {
  if (!doc.contains(key)) throw InvalidArgument("document lacks unique key " + key);
  auto& c = collection(name);
  std::unique_lock lock(c.mutex);
  const auto& value = doc[key];
  for (const auto& d : c.docs) {
    auto it = d.find(key);
    if (it != d.end() && *it == value) return std::nullopt;
  }
  return append_locked(name, c, std::move(doc));
}

bool JsonLinesStore::replace(const std::string& name, const std::string& id, Document doc) {
  auto& c = collection(name);
  std::unique_lock lock(c.mutex);
  auto it = std::find_if(c.docs.begin(), c.docs.end(), [&](const Document& d) {
    return d.contains("_id") && d["_id"] == id;
  });
  if (it == c.docs.end()) return false;
  Document stored = {{"_id", id}};
  for (auto& [k, v] : doc.items()) {
    if (k != "_id") stored[k] = v;
  }
  auto previous = std::exchange(*it, std::move(stored));
  try {
    rewrite_locked(name, c);
  } catch (...) {
    *it = std::move(previous);
    throw;
  }
  return true;
}

std::size_t JsonLinesStore::count(const std::string& name, const Document& filter) const {
  auto& c = collection(name);
  std::shared_lock lock(c.mutex);
  return static_cast<std::size_t>(std::count_if(
      c.docs.begin(), c.docs.end(), [&](const Document& d) { return matches(d, filter); }));
}

std::vector<Document> JsonLinesStore::find(const std::string& name, const Document& filter) const {
  auto& c = collection(name);
  std::shared_lock lock(c.mutex);
  std::vector<Document> out;
  for (const auto& d : c.docs)
    if (matches(d, filter)) out.push_back(d);
  return out;
}

// ---------------------------------------------------------------------------
// Credentials

void validate_username(std::string_view username) {
  if (username.size() < 3 || username.size() > 64)
    throw ValidationError("username must be 3-64 characters");
  for (char c : username) {
    bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
              c == '_' || c == '.' || c == '-';
    if (!ok) throw ValidationError("username may only contain letters, digits, '_', '.', '-'");
  }
}

void validate_password(std::string_view password) {
  if (password.size() < 6 || password.size() > 256)
    throw ValidationError("password must be 6-256 characters");
}

std::string hash_password(std::string_view password, int iterations) {
  if (iterations < 1) throw InvalidArgument("iterations must be positive");
  auto salt = random_bytes(16);
  return "pbkdf2-sha256$" + std::to_string(iterations) + "$" + text::to_hex(salt) + "$" +
         text::to_hex(pbkdf2(password, salt, iterations));
}

bool verify_password(std::string_view password, std::string_view encoded) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto sep = encoded.find('$', start);
    parts.push_back(encoded.substr(start, sep - start));
    if (sep == std::string_view::npos) break;
    start = sep + 1;
  }
  if (parts.size() != 4 || parts[0] != "pbkdf2-sha256") return false;
  int iterations = 0;
  try {
    iterations = std::stoi(std::string(parts[1]));
  } catch (const std::exception&) {
    return false;
  }
  auto salt = from_hex(parts[2]);
  auto expected = from_hex(parts[3]);
  if (iterations < 1 || !salt || !expected || expected->size() != 32) return false;
  auto actual = pbkdf2(password, *salt, iterations);
  return CRYPTO_memcmp(actual.data(), expected->data(), actual.size()) == 0;
}

std::string random_token() { return text::to_hex(random_bytes(16)); }

// ---------------------------------------------------------------------------
// Accounts

Accounts::Accounts(DocumentStore& store, Clock clock, AccountOptions options)
    : store_(store),
      clock_(std::move(clock)),
      options_(options),
      dummy_hash_(hash_password(random_token(), options.pbkdf2_iterations)) {}

CreateUserResult Accounts::create_user(std::string_view username, std::string_view password) {
  validate_username(username);
  validate_password(password);
  Document doc = {{"username", username},
                  {"password_hash", hash_password(password, options_.pbkdf2_iterations)},
                  {"created_at", format_iso8601(clock_())}};
  auto id = store_.insert_unique(col(kUsersCollection), "username", std::move(doc));
  return id ? CreateUserResult::Created : CreateUserResult::UsernameExists;
}

std::optional<Session> Accounts::authenticate(std::string_view username,
                                              std::string_view password) {
  auto user = find_user(username);
  // Unknown users still pay for one hash so timing does not reveal them.
  bool ok = verify_password(password, user ? user->password_hash : dummy_hash_) && user;
  if (!ok) return std::nullopt;
  Session s{random_token(), user->username,
            clock_() + std::chrono::duration_cast<std::chrono::milliseconds>(options_.session_ttl)};
  std::lock_guard lock(sessions_mutex_);
  sessions_[s.token] = s;
  return s;
}

std::optional<Session> Accounts::resolve(std::string_view token) {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(token);
  if (it == sessions_.end()) return std::nullopt;
  if (clock_() >= it->second.expires_at) {
    sessions_.erase(it);
    return std::nullopt;
  }
  return it->second;
}

void Accounts::revoke(std::string_view token) {
  std::lock_guard lock(sessions_mutex_);
  if (auto it = sessions_.find(token); it != sessions_.end()) sessions_.erase(it);
}

bool Accounts::user_exists(std::string_view username) const {
  return store_.count(col(kUsersCollection), {{"username", username}}) > 0;
}

std::optional<UserRecord> Accounts::find_user(std::string_view username) const {
  auto docs = store_.find(col(kUsersCollection), {{"username", username}});
  if (docs.empty()) return std::nullopt;
  const auto& d = docs.front();
  UserRecord u;
  u.username = d.value("username", "");
  u.password_hash = d.value("password_hash", "");
  u.created_at = parse_iso8601(d.value("created_at", "")).value_or(UtcTime{});
  return u;
}

// ---------------------------------------------------------------------------
// History

Document to_document(const HistoryRecord& r) {
  Document d = {{"username", r.username},
                {"url", r.url},
                {"timestamp", format_iso8601(r.timestamp)},
                {"csv_path", r.csv_path ? Document(*r.csv_path) : Document(nullptr)},
                {"status", r.ok ? "ok" : "failed"}};
  if (!r.ok) d["reason"] = r.failure_reason;
  d["stats"] = {{"n_visited", r.stats.n_visited}, {"m_relevant", r.stats.m_relevant}};
  return d;
}

HistoryRecord history_from_document(const Document& d) {
  HistoryRecord r;
  r.id = d.value("_id", "");
  r.username = d.value("username", "");
  r.url = d.value("url", "");
  r.timestamp = parse_iso8601(d.value("timestamp", "")).value_or(UtcTime{});
  if (d.contains("csv_path") && d["csv_path"].is_string()) r.csv_path = d["csv_path"].get<std::string>();
  r.ok = d.value("status", "failed") == "ok";
  r.failure_reason = d.value("reason", "");
  if (d.contains("stats")) {
    r.stats.n_visited = d["stats"].value("n_visited", std::size_t{0});
    r.stats.m_relevant = d["stats"].value("m_relevant", std::size_t{0});
  }
  return r;
}

History::History(DocumentStore& store, const Accounts& accounts)
    : store_(store), accounts_(accounts) {}

std::string History::record_history(HistoryRecord record) {
  if (!accounts_.user_exists(record.username))
    throw UnknownUser("unknown user: " + record.username);
  return store_.insert(col(kHistoryCollection), to_document(record));
}

std::vector<HistoryRecord> History::list_history(std::string_view username, std::size_t limit,
                                                 std::size_t offset) const {
  if (!accounts_.user_exists(username)) throw UnknownUser("unknown user: " + std::string(username));
  std::vector<HistoryRecord> all;
  for (const auto& d : store_.find(col(kHistoryCollection), {{"username", username}}))
    all.push_back(history_from_document(d));
  std::stable_sort(all.begin(), all.end(), [](const HistoryRecord& a, const HistoryRecord& b) {
    return a.timestamp > b.timestamp;
  });
  if (offset >= all.size()) return {};
  auto first = all.begin() + static_cast<std::ptrdiff_t>(offset);
  auto last = first + static_cast<std::ptrdiff_t>(std::min(limit, all.size() - offset));
  return {std::make_move_iterator(first), std::make_move_iterator(last)};
}

std::size_t History::count(std::string_view username) const {
  return store_.count(col(kHistoryCollection), {{"username", username}});
}

bool History::attach_csv(std::string_view username, std::string_view id, const std::string& path) {
  std::lock_guard lock(update_mutex_);
  auto docs = store_.find(col(kHistoryCollection), {{"_id", id}});
  if (docs.empty() || docs.front().value("username", "") != username) return false;
  auto doc = docs.front();
  doc["csv_path"] = path;
  return store_.replace(col(kHistoryCollection), std::string(id), std::move(doc));
}

}  // namespace scrapeflow
