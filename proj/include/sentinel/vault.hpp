#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sentinel/crypto.hpp"
#include "sentinel/rng.hpp"

namespace sentinel {

// AES-256-GCM key plus a short public identifier (first 8 bytes of the
// key's SHA-256) stored in each frame so a wrong key is distinguishable
// from tampering.
struct VaultKey {
  Key256 bytes{};
  std::array<std::uint8_t, 8> key_id{};

  static VaultKey from_bytes(const Key256& k);
  static std::optional<VaultKey> load_file(const std::string& path,
                                           std::string* err);
};

enum class VaultStatus { Ok, NotFound, TamperedRecord, WrongKey, IoFailure };
const char* to_string(VaultStatus s);

// Append-only log of sealed frames:
//   [u32 len][u16 keylen][record_key][key_id 8][nonce 12][tag 16][ciphertext]
// `len` covers everything after itself. record_key, keylen and key_id are
// authenticated as AAD; the newest frame for a record key wins. The index
// remembers each record's offset, frame length and key id from the moment
// the frame was written or verified, so on read any divergence on disk —
// including bytes outside the ciphertext — reports TamperedRecord.
class Vault {
 public:
  ~Vault();
  Vault(Vault&&) = delete;

  // Opens or creates the store and verifies every frame against `key`.
  // A frame bearing a different key_id fails open with WrongKey; an
  // unverifiable frame fails open with TamperedRecord.
  static std::optional<std::unique_ptr<Vault>> open(const std::string& path,
                                                    const VaultKey& key,
                                                    RandomSource& rng,
                                                    VaultStatus* status,
                                                    std::string* err);

  VaultStatus put(const std::string& record_key,
                  std::span<const std::uint8_t> plaintext, const VaultKey& key);

  struct GetResult {
    VaultStatus status = VaultStatus::IoFailure;
    std::vector<std::uint8_t> plaintext;
  };
  GetResult get(const std::string& record_key, const VaultKey& key);

  std::size_t record_count() const;
  const std::string& path() const { return path_; }
  const std::array<std::uint8_t, 8>& active_key_id() const {
    return key_.key_id;
  }

 private:
  Vault(std::string path, const VaultKey& key, RandomSource& rng);

  struct IndexEntry {
    std::uint64_t offset = 0;     // of the u32 length field
    std::uint32_t frame_len = 0;  // value of the length field
    std::array<std::uint8_t, 8> key_id{};
  };

  VaultStatus verify_and_index_locked(std::string* err);
  GcmNonce fresh_nonce_locked();

  std::string path_;
  VaultKey key_;
  RandomSource& rng_;

  mutable std::mutex mu_;
  int fd_ = -1;
  std::uint64_t end_offset_ = 0;
  std::map<std::string, IndexEntry> index_;
  std::set<std::array<std::uint8_t, 12>> used_nonces_;
};

}  // namespace sentinel
