#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "sentinel/domain.hpp"

namespace sentinel {

enum class SanitizeStrategy { Strip, Replace };
enum class CaseMode { Preserve, Upper, Lower };

// Character policy applied to request fields before any filtering layer.
// Letters and digits are always allowed ("alnum"); space and further
// characters come in through `extra`. Case mapping runs after filtering.
struct SanitizationPolicy {
  std::string extra;  // extra allowed characters, verbatim
  SanitizeStrategy strategy = SanitizeStrategy::Strip;
  char replacement = '_';  // used by Replace; must itself be allowed
  CaseMode case_mode = CaseMode::Preserve;

  bool query_values = true;
  bool body_text = true;
  bool header_values = false;
  bool path_segments = false;

  // When set, the gateway records a ThreatEvent if a request lost
  // characters to sanitization.
  bool report = false;

  bool allows(char c) const;
  bool has_targets() const {
    return query_values || body_text || header_values || path_segments;
  }

  // The most restrictive stock policy: alnum only, strip, uppercase,
  // query+body, reporting on. Turns "#@abc*" into "ABC".
  static SanitizationPolicy strict_upper();
};

// Config form: allowed = "alnum" | "alnum+<chars>" ("\s" = space,
// "\\" = backslash), strategy = "strip" | "replace:<c>",
// case = "preserve" | "upper" | "lower", targets = query,body[,headers,path].
std::optional<SanitizationPolicy> parse_policy(const std::string& allowed,
                                               const std::string& strategy,
                                               const std::string& case_mode,
                                               const std::string& targets,
                                               bool report, std::string* err);

struct SanitizedInput {
  std::string original;
  std::string cleaned;
  int removed_count = 0;
};

SanitizedInput sanitize(std::string_view text, const SanitizationPolicy& policy);

struct SanitizedRequest {
  Request request;
  int total_removed = 0;
};

// Rewrites the fields named by the policy's targets; everything else is
// byte-identical. The certificate (field and x-ims-cert header) is never
// rewritten: it is integrity-checked, not cleaned.
SanitizedRequest sanitize_request(const Request& req,
                                  const SanitizationPolicy& policy);

}  // namespace sentinel
