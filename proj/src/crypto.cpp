#include "sentinel/crypto.hpp"

#include <openssl/core_names.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>

#include "sentinel/encoding.hpp"

namespace sentinel {

namespace {

using CtxPtr = std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)>;
using CipherCtxPtr =
    std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)>;

[[noreturn]] void crypto_fail(const char* what) {
  throw std::runtime_error(std::string("crypto: ") + what);
}

}  // namespace

Hash256 sha256(std::span<const std::uint8_t> data) {
  Hash256 out{};
  unsigned int len = 0;
  CtxPtr ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1 || len != 32) {
    crypto_fail("sha256");
  }
  return out;
}

Hash256 sha256(std::string_view text) {
  return sha256(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Hash256 hmac_sha256(std::span<const std::uint8_t> key, std::string_view data) {
  Hash256 out{};
  std::unique_ptr<EVP_MAC, decltype(&EVP_MAC_free)> mac(
      EVP_MAC_fetch(nullptr, "HMAC", nullptr), EVP_MAC_free);
  if (!mac) crypto_fail("hmac fetch");
  std::unique_ptr<EVP_MAC_CTX, decltype(&EVP_MAC_CTX_free)> ctx(
      EVP_MAC_CTX_new(mac.get()), EVP_MAC_CTX_free);
  if (!ctx) crypto_fail("hmac ctx");
  char digest_name[] = "SHA256";
  OSSL_PARAM params[] = {
      OSSL_PARAM_construct_utf8_string(OSSL_MAC_PARAM_DIGEST, digest_name, 0),
      OSSL_PARAM_construct_end()};
  std::size_t out_len = 0;
  if (EVP_MAC_init(ctx.get(), key.data(), key.size(), params) != 1 ||
      EVP_MAC_update(ctx.get(),
                     reinterpret_cast<const unsigned char*>(data.data()),
                     data.size()) != 1 ||
      EVP_MAC_final(ctx.get(), out.data(), &out_len, out.size()) != 1 ||
      out_len != 32) {
    crypto_fail("hmac");
  }
  return out;
}

std::vector<std::uint8_t> pbkdf2_sha256(std::string_view secret,
                                        std::span<const std::uint8_t> salt,
                                        int iterations, std::size_t dklen) {
  std::vector<std::uint8_t> out(dklen);
  if (PKCS5_PBKDF2_HMAC(secret.data(), static_cast<int>(secret.size()),
                        salt.data(), static_cast<int>(salt.size()), iterations,
                        EVP_sha256(), static_cast<int>(dklen),
                        out.data()) != 1) {
    crypto_fail("pbkdf2");
  }
  return out;
}

bool ct_equal(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) return false;
  if (a.empty()) return true;
  return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

bool ct_equal(std::string_view a, std::string_view b) {
  return ct_equal(std::span<const std::uint8_t>(
                      reinterpret_cast<const std::uint8_t*>(a.data()), a.size()),
                  std::span<const std::uint8_t>(
                      reinterpret_cast<const std::uint8_t*>(b.data()), b.size()));
}

SealedBox aes256gcm_seal(const Key256& key, const GcmNonce& nonce,
                         std::span<const std::uint8_t> aad,
                         std::span<const std::uint8_t> plaintext) {
  SealedBox box;
  box.ciphertext.resize(plaintext.size());
  CipherCtxPtr ctx(EVP_CIPHER_CTX_new(), EVP_CIPHER_CTX_free);
  int len = 0;
  if (!ctx ||
      EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.data(),
                         nonce.data()) != 1) {
    crypto_fail("gcm init");
  }
  if (!aad.empty() &&
      EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(),
                        static_cast<int>(aad.size())) != 1) {
    crypto_fail("gcm aad");
  }
  if (!plaintext.empty() &&
      EVP_EncryptUpdate(ctx.get(), box.ciphertext.data(), &len,
                        plaintext.data(),
                        static_cast<int>(plaintext.size())) != 1) {
    crypto_fail("gcm encrypt");
  }
  if (EVP_EncryptFinal_ex(ctx.get(), box.ciphertext.data() + len, &len) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG,
                          static_cast<int>(box.tag.size()),
                          box.tag.data()) != 1) {
    crypto_fail("gcm final");
  }
  return box;
}

std::optional<std::vector<std::uint8_t>> aes256gcm_open(
    const Key256& key, const GcmNonce& nonce, std::span<const std::uint8_t> aad,
    std::span<const std::uint8_t> ciphertext, const GcmTag& tag) {
  std::vector<std::uint8_t> plain(ciphertext.size());
  CipherCtxPtr ctx(EVP_CIPHER_CTX_new(), EVP_CIPHER_CTX_free);
  int len = 0;
  if (!ctx ||
      EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.data(),
                         nonce.data()) != 1) {
    crypto_fail("gcm init");
  }
  if (!aad.empty() &&
      EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(),
                        static_cast<int>(aad.size())) != 1) {
    crypto_fail("gcm aad");
  }
  if (!ciphertext.empty() &&
      EVP_DecryptUpdate(ctx.get(), plain.data(), &len, ciphertext.data(),
                        static_cast<int>(ciphertext.size())) != 1) {
    return std::nullopt;
  }
  GcmTag tag_copy = tag;
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG,
                          static_cast<int>(tag_copy.size()),
                          tag_copy.data()) != 1) {
    crypto_fail("gcm set tag");
  }
  if (EVP_DecryptFinal_ex(ctx.get(), plain.data() + len, &len) != 1) {
    return std::nullopt;  // tag mismatch
  }
  return plain;
}

std::optional<Key256> parse_key_hex(std::string_view text) {
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r' ||
                           text.back() == ' ' || text.back() == '\t')) {
    text.remove_suffix(1);
  }
  if (text.size() != 64) return std::nullopt;
  const auto bytes = from_hex(text);
  if (!bytes) return std::nullopt;
  Key256 key{};
  std::memcpy(key.data(), bytes->data(), key.size());
  return key;
}

std::optional<Key256> load_key_file(const std::string& path, std::string* err) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (err) *err = "cannot open key file: " + path;
    return std::nullopt;
  }
  std::string line;
  std::getline(in, line);
  auto key = parse_key_hex(line);
  if (!key && err) *err = "key file must hold 64 hex chars: " + path;
  return key;
}

}  // namespace sentinel
