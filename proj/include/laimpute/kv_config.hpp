#ifndef LAIMPUTE_KV_CONFIG_HPP
#define LAIMPUTE_KV_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace laimpute {

/// Flat `key = value` text configuration. Lines starting with '#' and blank
/// lines are ignored. Later assignments override earlier ones, so applying a
/// file and then command-line overrides gives CLI > file > defaults.
///
/// Readers call the typed getters for every key they understand and then
/// `reject_unused()`, which throws ConfigError naming the first key nobody
/// asked for.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig from_file(const std::filesystem::path& path);
  static KeyValueConfig from_string(const std::string& text, const std::string& source = "<string>");

  /// Applies a single `key=value` override.
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);
  void merge(const KeyValueConfig& other);

  bool contains(const std::string& key) const { return values_.contains(key); }
  bool empty() const { return values_.empty(); }

  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  void reject_unused() const;

  /// Serializes in sorted key order.
  std::string to_string() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

/// Writes `key=value` lines in the given order.
std::string format_key_values(const std::vector<std::pair<std::string, std::string>>& entries);

}  // namespace laimpute

#endif  // LAIMPUTE_KV_CONFIG_HPP
