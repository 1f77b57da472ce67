#include "sentinel/rng.hpp"

#include <openssl/rand.h>

#include <cstring>
#include <stdexcept>

namespace sentinel {

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

}  // namespace

std::string RandomSource::hex(std::size_t n_bytes) {
  std::string out(n_bytes * 2, '0');
  std::uint8_t buf[64];
  std::size_t done = 0;
  while (done < n_bytes) {
    const std::size_t chunk = std::min(n_bytes - done, sizeof(buf));
    fill({buf, chunk});
    for (std::size_t i = 0; i < chunk; ++i) {
      out[2 * (done + i)] = kHexDigits[buf[i] >> 4];
      out[2 * (done + i) + 1] = kHexDigits[buf[i] & 0xf];
    }
    done += chunk;
  }
  return out;
}

std::uint64_t RandomSource::next_u64() {
  std::uint8_t buf[8];
  fill(buf);
  std::uint64_t v;
  std::memcpy(&v, buf, 8);
  return v;
}

void SystemRandom::fill(std::span<std::uint8_t> out) {
  if (out.empty()) return;
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
    throw std::runtime_error("RAND_bytes failed");
  }
}

SeededRandom::SeededRandom(std::uint64_t seed) {
  for (auto& s : state_) s = splitmix64(seed);
}

void SeededRandom::fill(std::span<std::uint8_t> out) {
  std::size_t i = 0;
  while (i < out.size()) {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
      out[i] = static_cast<std::uint8_t>(result >> (8 * b));
    }
  }
}

}  // namespace sentinel
