#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace throwsim {

// Raised for malformed files, unknown/missing keys and type errors. The CLI
// maps it to a dedicated exit code.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat `key = value` configuration file. Lines starting with '#' (or trailing
// '#' comments) are ignored. Keys are dotted lowercase identifiers; values are
// scalars or comma-separated lists. Duplicate keys are rejected. Typed getters
// record which keys were consumed so that loaders can reject unknown keys.
class KeyValueFile {
 public:
  KeyValueFile() = default;

  static KeyValueFile parse_file(const std::string& path);
  static KeyValueFile parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  std::int64_t get_int64(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  void set(const std::string& key, const std::string& value);
  void set_double(const std::string& key, double value);

  // Keys present in the file but never consumed by a getter.
  std::vector<std::string> unused_keys() const;
  // Throws ConfigError naming the first unknown key, if any.
  void require_all_used() const;

  const std::string& origin() const { return origin_; }
  const std::map<std::string, std::string>& entries() const { return entries_; }

  // Deterministic serialization (sorted keys), suitable for snapshots.
  std::string serialize() const;

 private:
  const std::string& raw(const std::string& key) const;

  std::string origin_;
  std::map<std::string, std::string> entries_;
  mutable std::set<std::string> used_;
};

// FNV-1a, used to stamp checkpoints with the resolved config they came from.
std::uint64_t fnv1a_hash(std::string_view text);

// Shared numeric formatting for CSV/snapshot output: shortest representation
// that round-trips a double exactly.
std::string format_double(double value);

}  // namespace throwsim
