#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace fsner {

// Flat key=value configuration with a fixed schema. Values are kept as
// strings; typed getters parse on access. Unknown keys and malformed values
// raise ParseError. '#' starts a comment in config files.
class Config {
 public:
  Config();  // all keys at their defaults

  static const std::map<std::string, std::string>& schema_defaults();
  static bool known_key(const std::string& key);

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool is_default(const std::string& key) const;

  void load_file(const std::string& path);
  void load_text(const std::string& text, const std::string& origin);

  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;  // true/false/1/0/yes/no/on/off

  // Sorted "key = value" lines; printed at the start of every CLI run.
  std::string resolved_text() const;
  // FNV-1a hash of resolved_text as 16 hex digits.
  std::string fingerprint() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace fsner
