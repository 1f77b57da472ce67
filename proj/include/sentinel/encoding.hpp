#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sentinel {

// Strict codecs. Certificate validation relies on canonical rejection:
// a decoder that tolerates case variants, whitespace or sloppy padding
// would let two distinct encodings map to the same bytes, and the
// exhaustive bit-flip guarantee ("no flipped certificate validates")
// would no longer hold.

std::string to_hex(std::span<const std::uint8_t> bytes);

// Lowercase hex only, even length. Rejects uppercase so every textual
// variant of a value has exactly one accepted spelling.
std::optional<std::vector<std::uint8_t>> from_hex(std::string_view hex);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::string base64_encode(std::string_view text);

// Canonical base64: standard alphabet, mandatory padding, no whitespace,
// and the unused low bits of a final partial group must be zero.
std::optional<std::vector<std::uint8_t>> base64_decode(std::string_view text);

}  // namespace sentinel
