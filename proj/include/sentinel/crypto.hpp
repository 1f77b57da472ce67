#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sentinel {

using Hash256 = std::array<std::uint8_t, 32>;
using Key256 = std::array<std::uint8_t, 32>;
using GcmTag = std::array<std::uint8_t, 16>;
using GcmNonce = std::array<std::uint8_t, 12>;

Hash256 sha256(std::span<const std::uint8_t> data);
Hash256 sha256(std::string_view text);

Hash256 hmac_sha256(std::span<const std::uint8_t> key, std::string_view data);

std::vector<std::uint8_t> pbkdf2_sha256(std::string_view secret,
                                        std::span<const std::uint8_t> salt,
                                        int iterations, std::size_t dklen);

// Timing-independent comparison; false when lengths differ.
bool ct_equal(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
bool ct_equal(std::string_view a, std::string_view b);

struct SealedBox {
  std::vector<std::uint8_t> ciphertext;
  GcmTag tag;
};

// AES-256-GCM. aad is authenticated but not encrypted.
SealedBox aes256gcm_seal(const Key256& key, const GcmNonce& nonce,
                         std::span<const std::uint8_t> aad,
                         std::span<const std::uint8_t> plaintext);

// Returns nullopt when the tag does not verify.
std::optional<std::vector<std::uint8_t>> aes256gcm_open(
    const Key256& key, const GcmNonce& nonce, std::span<const std::uint8_t> aad,
    std::span<const std::uint8_t> ciphertext, const GcmTag& tag);

// Key files hold 64 lowercase hex characters on one line.
std::optional<Key256> parse_key_hex(std::string_view text);
std::optional<Key256> load_key_file(const std::string& path, std::string* err);

}  // namespace sentinel
