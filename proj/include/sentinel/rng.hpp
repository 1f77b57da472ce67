#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace sentinel {

// Byte source for nonces, salts and vault IVs. The gateway takes one by
// reference so tests and the harness can substitute a seeded stream; the
// default is the OS CSPRNG.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;

  std::string hex(std::size_t n_bytes);
  std::uint64_t next_u64();
};

// OS randomness (OpenSSL RAND_bytes). Thread-safe.
class SystemRandom final : public RandomSource {
 public:
  void fill(std::span<std::uint8_t> out) override;
};

// xoshiro256** seeded via splitmix64. Deterministic, not cryptographic;
// only the harness and tests use it.
class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(std::uint64_t seed);
  void fill(std::span<std::uint8_t> out) override;

 private:
  std::uint64_t state_[4];
};

}  // namespace sentinel
