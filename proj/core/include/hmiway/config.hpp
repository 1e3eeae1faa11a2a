#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hmiway {

// Plain-text `key = value` configuration with `#` comments. Getters record
// which keys were consumed so callers can reject unknown keys with the exact
// source line.
class KeyValueFile {
 public:
  KeyValueFile() = default;

  static KeyValueFile parse_file(const std::string& path);
  static KeyValueFile parse_string(const std::string& text, const std::string& source_name);

  const std::string& source_name() const { return source_; }

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  std::int64_t get_int(const std::string& key, std::int64_t fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);

  // Required variants: missing key is a ConfigError.
  std::string require_string(const std::string& key);
  double require_double(const std::string& key);
  std::int64_t require_int(const std::string& key);

  // CLI overrides; recorded with line 0.
  void set(const std::string& key, const std::string& value);

  // Keys present in the file but never read.
  std::vector<std::string> unused_keys() const;

  // Throws ConfigError listing every unused key with its line.
  void reject_unused() const;

  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

  // Deterministic snapshot of all entries (sorted by key).
  std::vector<std::pair<std::string, std::string>> entries() const;

 private:
  struct Entry {
    std::string raw;
    int line = 0;
    bool used = false;
  };

  const Entry* find(const std::string& key) const;
  Entry* touch(const std::string& key);

  std::string source_ = "<config>";
  std::map<std::string, Entry> values_;
};

}  // namespace hmiway
