#include "hmiway/config.hpp"

#include <cctype>
#include <cstdlib>
#include <sstream>

#include "hmiway/errors.hpp"
#include "hmiway/util.hpp"

namespace hmiway {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-'))
      return false;
  }
  return true;
}

}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
  return parse_string(read_file(path), path);
}

KeyValueFile KeyValueFile::parse_string(const std::string& text, const std::string& source_name) {
  KeyValueFile kv;
  kv.source_ = source_name;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source_name, lineno, "expected 'key = value'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (!valid_key(key))
      throw ConfigError(source_name, lineno, "invalid key '" + key + "'");
    if (kv.values_.count(key))
      throw ConfigError(source_name, lineno, "duplicate key '" + key + "'");
    kv.values_[key] = Entry{value, lineno, false};
  }
  return kv;
}

bool KeyValueFile::has(const std::string& key) const { return values_.count(key) != 0; }

const KeyValueFile::Entry* KeyValueFile::find(const std::string& key) const {
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

KeyValueFile::Entry* KeyValueFile::touch(const std::string& key) {
  auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  it->second.used = true;
  return &it->second;
}

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) {
  Entry* e = touch(key);
  return e ? e->raw : fallback;
}

double KeyValueFile::get_double(const std::string& key, double fallback) {
  Entry* e = touch(key);
  if (!e) return fallback;
  const char* s = e->raw.c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  if (end == s || *end != '\0')
    throw ConfigError(source_, e->line, "key '" + key + "': expected a number, got '" + e->raw + "'");
  return v;
}

std::int64_t KeyValueFile::get_int(const std::string& key, std::int64_t fallback) {
  Entry* e = touch(key);
  if (!e) return fallback;
  const char* s = e->raw.c_str();
  char* end = nullptr;
  long long v = std::strtoll(s, &end, 10);
  if (end == s || *end != '\0')
    throw ConfigError(source_, e->line, "key '" + key + "': expected an integer, got '" + e->raw + "'");
  return v;
}

std::uint64_t KeyValueFile::get_u64(const std::string& key, std::uint64_t fallback) {
  Entry* e = touch(key);
  if (!e) return fallback;
  const char* s = e->raw.c_str();
  char* end = nullptr;
  unsigned long long v = std::strtoull(s, &end, 10);
  if (end == s || *end != '\0')
    throw ConfigError(source_, e->line, "key '" + key + "': expected an unsigned integer, got '" + e->raw + "'");
  return v;
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) {
  Entry* e = touch(key);
  if (!e) return fallback;
  if (e->raw == "true" || e->raw == "1" || e->raw == "yes") return true;
  if (e->raw == "false" || e->raw == "0" || e->raw == "no") return false;
  throw ConfigError(source_, e->line, "key '" + key + "': expected a boolean, got '" + e->raw + "'");
}

std::string KeyValueFile::require_string(const std::string& key) {
  Entry* e = touch(key);
  if (!e) throw ConfigError(source_, 0, "missing required key '" + key + "'");
  return e->raw;
}

double KeyValueFile::require_double(const std::string& key) {
  if (!has(key)) throw ConfigError(source_, 0, "missing required key '" + key + "'");
  return get_double(key, 0.0);
}

std::int64_t KeyValueFile::require_int(const std::string& key) {
  if (!has(key)) throw ConfigError(source_, 0, "missing required key '" + key + "'");
  return get_int(key, 0);
}

void KeyValueFile::set(const std::string& key, const std::string& value) {
  values_[key] = Entry{value, 0, false};
}

std::vector<std::string> KeyValueFile::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, e] : values_)
    if (!e.used) out.push_back(k);
  return out;
}

void KeyValueFile::reject_unused() const {
  auto unused = unused_keys();
  if (unused.empty()) return;
  const Entry* first = find(unused.front());
  std::string msg = "unknown key '" + unused.front() + "'";
  if (unused.size() > 1) msg += " (and " + std::to_string(unused.size() - 1) + " more)";
  throw ConfigError(source_, first ? first->line : 0, msg);
}

void KeyValueFile::fail(const std::string& key, const std::string& message) const {
  const Entry* e = find(key);
  throw ConfigError(source_, e ? e->line : 0, "key '" + key + "': " + message);
}

std::vector<std::pair<std::string, std::string>> KeyValueFile::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, e] : values_) out.emplace_back(k, e.raw);
  return out;
}

}  // namespace hmiway
