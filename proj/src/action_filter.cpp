#include "sentinel/action_filter.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <vector>

#include "sentinel/crypto.hpp"
#include "sentinel/encoding.hpp"

namespace sentinel {
namespace {

std::string lower(std::string s) {
  for (char& c : s)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
              c == '-';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

std::set<std::string> ActionRegistry::services() const {
  std::set<std::string> out;
  for (const auto& e : entries) out.insert(e.first);
  return out;
}

RegistryParseResult parse_registry(std::string_view text) {
  ActionRegistry reg;
  reg.version = to_hex(sha256(text));

  RegistryParseResult out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string::size_type hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);

    std::istringstream ls(line);
    std::vector<std::string> words;
    std::string w;
    while (ls >> w) words.push_back(w);
    if (words.empty()) continue;
    if (words.size() != 2) {
      out.error = RegistryParseError{
          lineno, "expected \"<service> <action>\", got " +
                      std::to_string(words.size()) + " fields"};
      return out;
    }
    std::string service = lower(words[0]);
    std::string action = lower(words[1]);
    if (!valid_name(service) || !valid_name(action)) {
      out.error = RegistryParseError{
          lineno, "names must be [a-z0-9_-], got \"" + words[0] + " " +
                      words[1] + "\""};
      return out;
    }
    reg.entries.insert({std::move(service), std::move(action)});
  }
  out.registry = std::move(reg);
  return out;
}

RegistryParseResult load_registry_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    RegistryParseResult r;
    r.error = RegistryParseError{0, "cannot open " + path};
    return r;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_registry(buf.str());
}

Verdict check_action(const Request& req, const ActionRegistry& registry) {
  if (req.service.empty() || req.action.empty())
    return Verdict::deny(Layer::ActionFilter, "unknown-action",
                         "request names no service action");
  if (!registry.contains(req.service, req.action))
    return Verdict::deny(Layer::ActionFilter, "unknown-action",
                         req.service + "." + req.action + " is not available");
  return Verdict::allow(Layer::ActionFilter, "action-known",
                        req.service + "." + req.action);
}

}  // namespace sentinel
