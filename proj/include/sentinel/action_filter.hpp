#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>

#include "sentinel/domain.hpp"

namespace sentinel {

// Closed list of (service, action) pairs the gateway will forward.
// Anything not listed is refused before dispatch.
struct ActionRegistry {
  std::set<std::pair<std::string, std::string>> entries;
  std::string version;  // content hash of the registry text

  bool contains(const std::string& service, const std::string& action) const {
    return entries.count({service, action}) > 0;
  }
  std::set<std::string> services() const;
};

struct RegistryParseError {
  int line = 0;
  std::string message;
};

struct RegistryParseResult {
  std::optional<ActionRegistry> registry;
  std::optional<RegistryParseError> error;
};

// Line format: "<service> <action>"; '#' comments and blank lines allowed.
// Names are lowercased to match canonicalized requests.
RegistryParseResult parse_registry(std::string_view text);
RegistryParseResult load_registry_file(const std::string& path);

Verdict check_action(const Request& req, const ActionRegistry& registry);

}  // namespace sentinel
