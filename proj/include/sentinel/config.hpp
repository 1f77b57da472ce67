#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sentinel {

// Flat key=value configuration. Lines whose first non-blank character is
// '#' are comments; there are no inline comments, so values may contain
// '#'. Duplicate keys: last one wins. Values are whitespace-trimmed.
class Config {
 public:
  static std::optional<Config> parse(const std::string& text, std::string* err);
  static std::optional<Config> load_file(const std::string& path,
                                         std::string* err);

  bool has(const std::string& key) const;
  std::string get_str(const std::string& key,
                      const std::string& fallback = "") const;
  std::int64_t get_i64(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated list; empty value -> empty list.
  std::vector<std::string> get_list(const std::string& key) const;

  // Paths in a config file are resolved against the file's directory.
  std::string resolve_path(const std::string& value) const;
  std::string get_path(const std::string& key,
                       const std::string& fallback = "") const;

  // All keys sharing a prefix, e.g. "services." -> remainder -> value.
  std::map<std::string, std::string> with_prefix(const std::string& prefix) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
  std::string base_dir_;
};

}  // namespace sentinel
