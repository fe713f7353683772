#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>

#include <gmpxx.h>

namespace oope {

// AES-256-CTR keystream generator. Seeded instances are fully deterministic, which
// is what makes protocol transcripts reproducible; unseeded instances draw their key
// from the OS entropy source.
class Rng {
 public:
  explicit Rng(const std::array<uint8_t, 32>& key);
  ~Rng();
  Rng(Rng&&) noexcept;
  Rng& operator=(Rng&&) noexcept;
  Rng(const Rng&) = delete;
  Rng& operator=(const Rng&) = delete;

  static Rng from_seed(uint64_t seed, std::string_view label);
  static Rng system();
  // Child generator with an independent stream, keyed from this one's output.
  Rng fork(std::string_view label);

  void fill(std::span<uint8_t> out);
  uint64_t next_u64();
  bool bit() { return (next_u64() & 1) != 0; }
  // Uniform in [0, bound); bound > 0.
  uint64_t below(uint64_t bound);
  // Uniform integer with `bits` random bits (top bit not forced).
  mpz_class bits(unsigned nbits);
  // Uniform in [0, bound) by rejection sampling.
  mpz_class below(const mpz_class& bound);

 private:
  void refill();

  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace oope
