#include "sentinel/vault.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "sentinel/encoding.hpp"

namespace sentinel {
namespace {

constexpr std::size_t kFixedTail = 8 + 12 + 16;  // key_id + nonce + tag

void put_u32(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
  p[2] = static_cast<std::uint8_t>(v >> 16);
  p[3] = static_cast<std::uint8_t>(v >> 24);
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 |
         static_cast<std::uint32_t>(p[3]) << 24;
}

void put_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] |
                                    static_cast<std::uint16_t>(p[1]) << 8);
}

// AAD binds the frame header to the ciphertext: keylen, record key, key_id.
std::vector<std::uint8_t> frame_aad(const std::string& record_key,
                                    const std::array<std::uint8_t, 8>& key_id) {
  std::vector<std::uint8_t> aad;
  aad.resize(2 + record_key.size() + key_id.size());
  put_u16(aad.data(), static_cast<std::uint16_t>(record_key.size()));
  std::memcpy(aad.data() + 2, record_key.data(), record_key.size());
  std::memcpy(aad.data() + 2 + record_key.size(), key_id.data(), key_id.size());
  return aad;
}

bool read_exact(int fd, std::uint64_t offset, std::uint8_t* buf,
                std::size_t n, bool* short_read) {
  std::size_t done = 0;
  while (done < n) {
    ssize_t r = ::pread(fd, buf + done, n - done,
                        static_cast<off_t>(offset + done));
    if (r < 0) {
      if (errno == EINTR) continue;
      *short_read = false;
      return false;
    }
    if (r == 0) {
      *short_read = true;
      return false;
    }
    done += static_cast<std::size_t>(r);
  }
  return true;
}

}  // namespace

const char* to_string(VaultStatus s) {
  switch (s) {
    case VaultStatus::Ok: return "ok";
    case VaultStatus::NotFound: return "not-found";
    case VaultStatus::TamperedRecord: return "tampered-record";
    case VaultStatus::WrongKey: return "wrong-key";
    case VaultStatus::IoFailure: return "io-failure";
  }
  return "?";
}

VaultKey VaultKey::from_bytes(const Key256& k) {
  VaultKey vk;
  vk.bytes = k;
  Hash256 h = sha256(std::span<const std::uint8_t>(k.data(), k.size()));
  std::memcpy(vk.key_id.data(), h.data(), vk.key_id.size());
  return vk;
}

std::optional<VaultKey> VaultKey::load_file(const std::string& path,
                                            std::string* err) {
  std::optional<Key256> k = load_key_file(path, err);
  if (!k) return std::nullopt;
  return from_bytes(*k);
}

Vault::Vault(std::string path, const VaultKey& key, RandomSource& rng)
    : path_(std::move(path)), key_(key), rng_(rng) {}

Vault::~Vault() {
  if (fd_ >= 0) ::close(fd_);
}

std::optional<std::unique_ptr<Vault>> Vault::open(const std::string& path,
                                                  const VaultKey& key,
                                                  RandomSource& rng,
                                                  VaultStatus* status,
                                                  std::string* err) {
  std::unique_ptr<Vault> v(new Vault(path, key, rng));
  v->fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_APPEND, 0600);
  if (v->fd_ < 0) {
    if (status) *status = VaultStatus::IoFailure;
    if (err) *err = "cannot open " + path + ": " + std::strerror(errno);
    return std::nullopt;
  }
  std::lock_guard<std::mutex> lock(v->mu_);
  VaultStatus st = v->verify_and_index_locked(err);
  if (status) *status = st;
  if (st != VaultStatus::Ok) return std::nullopt;
  return v;
}

// Walks the whole log, checking structure and every tag with the active
// key, and builds the index. Runs at open so a store that was tampered
// with while offline is rejected before use.
VaultStatus Vault::verify_and_index_locked(std::string* err) {
  off_t size = ::lseek(fd_, 0, SEEK_END);
  if (size < 0) {
    if (err) *err = "lseek failed";
    return VaultStatus::IoFailure;
  }
  end_offset_ = static_cast<std::uint64_t>(size);

  std::uint64_t off = 0;
  while (off < end_offset_) {
    std::uint8_t lenbuf[4];
    bool short_read = false;
    if (off + 4 > end_offset_ ||
        !read_exact(fd_, off, lenbuf, 4, &short_read)) {
      if (err) *err = "truncated frame header at offset " + std::to_string(off);
      return VaultStatus::TamperedRecord;
    }
    std::uint32_t len = get_u32(lenbuf);
    if (len < 2 + kFixedTail || off + 4 + len > end_offset_) {
      if (err) *err = "implausible frame length at offset " + std::to_string(off);
      return VaultStatus::TamperedRecord;
    }
    std::vector<std::uint8_t> frame(len);
    if (!read_exact(fd_, off + 4, frame.data(), len, &short_read)) {
      if (err) *err = "truncated frame at offset " + std::to_string(off);
      return VaultStatus::TamperedRecord;
    }
    std::uint16_t keylen = get_u16(frame.data());
    if (2u + keylen + kFixedTail > len) {
      if (err) *err = "record key overruns frame at offset " + std::to_string(off);
      return VaultStatus::TamperedRecord;
    }
    std::string record_key(reinterpret_cast<const char*>(frame.data() + 2),
                           keylen);
    const std::uint8_t* p = frame.data() + 2 + keylen;
    std::array<std::uint8_t, 8> key_id;
    std::memcpy(key_id.data(), p, 8);
    GcmNonce nonce;
    std::memcpy(nonce.data(), p + 8, 12);
    GcmTag tag;
    std::memcpy(tag.data(), p + 20, 16);
    std::span<const std::uint8_t> ciphertext(p + 20 + 16,
                                             len - 2 - keylen - kFixedTail);

    if (key_id != key_.key_id) {
      if (err) {
        *err = "frame at offset " + std::to_string(off) +
               " sealed under key id " +
               to_hex(std::span<const std::uint8_t>(key_id.data(), 8));
      }
      return VaultStatus::WrongKey;
    }
    std::vector<std::uint8_t> aad = frame_aad(record_key, key_id);
    auto plain = aes256gcm_open(key_.bytes, nonce, aad, ciphertext, tag);
    if (!plain) {
      if (err) {
        *err = "frame for \"" + record_key + "\" at offset " +
               std::to_string(off) + " fails authentication";
      }
      return VaultStatus::TamperedRecord;
    }
    index_[record_key] = IndexEntry{off, len, key_id};
    used_nonces_.insert(nonce);
    off += 4 + len;
  }
  return VaultStatus::Ok;
}

GcmNonce Vault::fresh_nonce_locked() {
  GcmNonce nonce;
  do {
    rng_.fill(std::span<std::uint8_t>(nonce.data(), nonce.size()));
  } while (!used_nonces_.insert(nonce).second);
  return nonce;
}

VaultStatus Vault::put(const std::string& record_key,
                       std::span<const std::uint8_t> plaintext,
                       const VaultKey& key) {
  if (record_key.empty() || record_key.size() > 0xffff)
    return VaultStatus::IoFailure;
  std::lock_guard<std::mutex> lock(mu_);
  if (key.key_id != key_.key_id) return VaultStatus::WrongKey;

  GcmNonce nonce = fresh_nonce_locked();
  std::vector<std::uint8_t> aad = frame_aad(record_key, key_.key_id);
  SealedBox box = aes256gcm_seal(key_.bytes, nonce, aad, plaintext);

  const std::uint32_t len = static_cast<std::uint32_t>(
      2 + record_key.size() + kFixedTail + box.ciphertext.size());
  std::vector<std::uint8_t> frame(4 + len);
  std::uint8_t* p = frame.data();
  put_u32(p, len);
  put_u16(p + 4, static_cast<std::uint16_t>(record_key.size()));
  std::memcpy(p + 6, record_key.data(), record_key.size());
  p += 6 + record_key.size();
  std::memcpy(p, key_.key_id.data(), 8);
  std::memcpy(p + 8, nonce.data(), 12);
  std::memcpy(p + 20, box.tag.data(), 16);
  std::memcpy(p + 36, box.ciphertext.data(), box.ciphertext.size());

  std::size_t done = 0;
  while (done < frame.size()) {
    ssize_t w = ::write(fd_, frame.data() + done, frame.size() - done);
    if (w < 0) {
      if (errno == EINTR) continue;
      return VaultStatus::IoFailure;
    }
    done += static_cast<std::size_t>(w);
  }
  if (::fsync(fd_) != 0) return VaultStatus::IoFailure;

  index_[record_key] = IndexEntry{end_offset_, len, key_.key_id};
  end_offset_ += frame.size();
  return VaultStatus::Ok;
}

Vault::GetResult Vault::get(const std::string& record_key,
                            const VaultKey& key) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = index_.find(record_key);
  if (it == index_.end()) return {VaultStatus::NotFound, {}};
  const IndexEntry& entry = it->second;

  // Re-read the frame from disk and require byte agreement with what the
  // index remembers; any divergence (length, key, key_id, truncation) is
  // tampering, reported before the wrong-key check so a flipped key_id
  // byte cannot masquerade as an honest key mismatch.
  std::vector<std::uint8_t> frame(4 + entry.frame_len);
  bool short_read = false;
  if (!read_exact(fd_, entry.offset, frame.data(), frame.size(), &short_read))
    return {short_read ? VaultStatus::TamperedRecord : VaultStatus::IoFailure,
            {}};
  if (get_u32(frame.data()) != entry.frame_len)
    return {VaultStatus::TamperedRecord, {}};
  std::uint16_t keylen = get_u16(frame.data() + 4);
  if (keylen != record_key.size() ||
      2u + keylen + kFixedTail > entry.frame_len)
    return {VaultStatus::TamperedRecord, {}};
  if (std::memcmp(frame.data() + 6, record_key.data(), keylen) != 0)
    return {VaultStatus::TamperedRecord, {}};
  const std::uint8_t* p = frame.data() + 6 + keylen;
  std::array<std::uint8_t, 8> key_id;
  std::memcpy(key_id.data(), p, 8);
  if (key_id != entry.key_id) return {VaultStatus::TamperedRecord, {}};

  if (key.key_id != entry.key_id) return {VaultStatus::WrongKey, {}};

  GcmNonce nonce;
  std::memcpy(nonce.data(), p + 8, 12);
  GcmTag tag;
  std::memcpy(tag.data(), p + 20, 16);
  std::span<const std::uint8_t> ciphertext(
      p + 36, entry.frame_len - 2 - keylen - kFixedTail);
  std::vector<std::uint8_t> aad = frame_aad(record_key, key_id);
  auto plain = aes256gcm_open(key.bytes, nonce, aad, ciphertext, tag);
  if (!plain) return {VaultStatus::TamperedRecord, {}};
  return {VaultStatus::Ok, std::move(*plain)};
}

std::size_t Vault::record_count() const {
  std::lock_guard<std::mutex> lock(mu_);
  return index_.size();
}

}  // namespace sentinel
