#include "sentinel/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace sentinel {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::optional<Config> Config::parse(const std::string& text, std::string* err) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      if (err) {
        *err = "config line " + std::to_string(line_no) + ": expected key=value";
      }
      return std::nullopt;
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) {
      if (err) *err = "config line " + std::to_string(line_no) + ": empty key";
      return std::nullopt;
    }
    cfg.entries_[key] = trim(t.substr(eq + 1));
  }
  return cfg;
}

std::optional<Config> Config::load_file(const std::string& path,
                                        std::string* err) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (err) *err = "cannot open config file: " + path;
    return std::nullopt;
  }
  std::stringstream buf;
  buf << in.rdbuf();
  auto cfg = parse(buf.str(), err);
  if (cfg) {
    cfg->base_dir_ = std::filesystem::path(path).parent_path().string();
  }
  return cfg;
}

bool Config::has(const std::string& key) const {
  return entries_.count(key) > 0;
}

std::string Config::get_str(const std::string& key,
                            const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

std::int64_t Config::get_i64(const std::string& key,
                             std::int64_t fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) return fallback;
    return v;
  } catch (...) {
    return fallback;
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  return fallback;
}

std::vector<std::string> Config::get_list(const std::string& key) const {
  std::vector<std::string> out;
  const auto it = entries_.find(key);
  if (it == entries_.end()) return out;
  std::istringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::string Config::resolve_path(const std::string& value) const {
  if (value.empty() || base_dir_.empty()) return value;
  std::filesystem::path p(value);
  if (p.is_absolute()) return value;
  return (std::filesystem::path(base_dir_) / p).string();
}

std::string Config::get_path(const std::string& key,
                             const std::string& fallback) const {
  const std::string v = get_str(key, fallback);
  return v.empty() ? v : resolve_path(v);
}

std::map<std::string, std::string> Config::with_prefix(
    const std::string& prefix) const {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : entries_) {
    if (k.size() > prefix.size() && k.compare(0, prefix.size(), prefix) == 0) {
      out[k.substr(prefix.size())] = v;
    }
  }
  return out;
}

}  // namespace sentinel
