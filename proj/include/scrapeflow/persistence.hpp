#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "scrapeflow/dom_graph.hpp"
#include "scrapeflow/time.hpp"

namespace scrapeflow {

using Document = nlohmann::ordered_json;

// Schemaless collections of JSON documents. Every call is atomic. Filters
// match documents whose top-level fields equal every field of the filter.
class DocumentStore {
 public:
  virtual ~DocumentStore() = default;

  // Assigns and returns "_id".
  virtual std::string insert(const std::string& collection, Document doc) = 0;
  // Inserts unless a document with the same value under `key` exists.
  // Returns the new id, or nothing when the key is taken.
  virtual std::optional<std::string> insert_unique(const std::string& collection,
                                                   const std::string& key, Document doc) = 0;
  // Replaces the document with this "_id". Returns false if absent.
  virtual bool replace(const std::string& collection, const std::string& id, Document doc) = 0;
  virtual std::size_t count(const std::string& collection, const Document& filter) const = 0;
  // Matches in insertion order.
  virtual std::vector<Document> find(const std::string& collection,
                                     const Document& filter) const = 0;
};

// One JSON-lines file per collection under a data directory. Inserts are
// appended and fsync'ed; replacements rewrite the file through a temporary
// and rename. Writes are serialized per collection; reads share a lock.
class JsonLinesStore final : public DocumentStore {
 public:
  // Loads existing files. Throws StoreUnavailable if the directory cannot be
  // created or a file is corrupt.
  explicit JsonLinesStore(std::filesystem::path dir);

  std::string insert(const std::string& collection, Document doc) override;
  std::optional<std::string> insert_unique(const std::string& collection,
                                           const std::string& key, Document doc) override;
  bool replace(const std::string& collection, const std::string& id, Document doc) override;
  std::size_t count(const std::string& collection, const Document& filter) const override;
  std::vector<Document> find(const std::string& collection,
                             const Document& filter) const override;

  std::filesystem::path file_for(const std::string& collection) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  struct Collection {
    mutable std::shared_mutex mutex;
    std::vector<Document> docs;
    std::size_t next_id = 1;
    bool loaded = false;
  };

  Collection& collection(const std::string& name) const;
  void load(const std::string& name, Collection& c) const;
  std::string append_locked(const std::string& name, Collection& c, Document doc);
  void rewrite_locked(const std::string& name, const Collection& c);

  std::filesystem::path dir_;
  mutable std::mutex registry_mutex_;
  mutable std::map<std::string, std::unique_ptr<Collection>> collections_;
};

inline constexpr std::string_view kUsersCollection = "users";
inline constexpr std::string_view kHistoryCollection = "history";

// Usernames: 3-64 chars of [A-Za-z0-9_.-]. Passwords: 6-256 bytes.
void validate_username(std::string_view username);
void validate_password(std::string_view password);

// PBKDF2-HMAC-SHA256, encoded as "pbkdf2-sha256$<iter>$<salt hex>$<hash hex>".
std::string hash_password(std::string_view password, int iterations);
bool verify_password(std::string_view password, std::string_view encoded);

// 128-bit random token, hex encoded.
std::string random_token();

struct UserRecord {
  std::string username;
  std::string password_hash;
  UtcTime created_at;
};

struct Session {
  std::string token;
  std::string username;
  UtcTime expires_at;
};

enum class CreateUserResult { Created, UsernameExists };

struct AccountOptions {
  int pbkdf2_iterations = 100'000;
  std::chrono::hours session_ttl{24};
};

// Users and server-side sessions.
class Accounts {
 public:
  Accounts(DocumentStore& store, Clock clock, AccountOptions options = {});

  // Atomic check-and-insert. Throws ValidationError on bad shapes.
  CreateUserResult create_user(std::string_view username, std::string_view password);

  // Unknown user and wrong password are reported identically.
  std::optional<Session> authenticate(std::string_view username, std::string_view password);

  // The live session for a token; expired sessions are dropped.
  std::optional<Session> resolve(std::string_view token);
  void revoke(std::string_view token);

  bool user_exists(std::string_view username) const;
  std::optional<UserRecord> find_user(std::string_view username) const;

 private:
  DocumentStore& store_;
  Clock clock_;
  AccountOptions options_;
  std::string dummy_hash_;
  std::mutex sessions_mutex_;
  std::map<std::string, Session, std::less<>> sessions_;
};

struct HistoryRecord {
  std::string id;  // assigned by record_history
  std::string username;
  std::string url;
  UtcTime timestamp;
  std::optional<std::string> csv_path;
  bool ok = true;
  std::string failure_reason;  // set when !ok
  TraversalStats stats;
};

Document to_document(const HistoryRecord& record);
HistoryRecord history_from_document(const Document& doc);

// Append-only scrape history keyed by user.
class History {
 public:
  History(DocumentStore& store, const Accounts& accounts);

  // Throws UnknownUser.
  std::string record_history(HistoryRecord record);

  // Newest timestamp first; equal timestamps keep insertion order.
  // Throws UnknownUser.
  std::vector<HistoryRecord> list_history(std::string_view username, std::size_t limit,
                                          std::size_t offset) const;
  std::size_t count(std::string_view username) const;

  // Links an exported CSV file to a record. Returns false if the record is
  // missing or owned by someone else.
  bool attach_csv(std::string_view username, std::string_view id, const std::string& path);

 private:
  DocumentStore& store_;
  const Accounts& accounts_;
  std::mutex update_mutex_;
};

}  // namespace scrapeflow
