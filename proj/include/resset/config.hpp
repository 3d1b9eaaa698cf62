#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace resset {

/// Flat `key = value` text. '#' starts a comment; blank lines are skipped;
/// duplicate keys are an error (they are always typos). Values stay strings
/// until a typed getter parses them, so one file can serve commands that
/// care about different keys.
class Config {
 public:
  Config() = default;

  static Config load(const std::string& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;  // true/false/1/0

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }

  /// Rejects keys outside the caller's vocabulary, naming the offender.
  void require_known(std::span<const std::string> known) const;

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace resset
