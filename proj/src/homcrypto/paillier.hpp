#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>

#include <gmpxx.h>

#include "common/bytes.hpp"
#include "common/rng.hpp"

// Paillier encryption with the generator fixed to g = 1 + N, CRT decryption and an
// optional pool of precomputed r^N values.
namespace oope::hom {

using KeyId = std::array<uint8_t, 32>;

class PublicKey {
 public:
  PublicKey() = default;
  explicit PublicKey(mpz_class n);

  const mpz_class& n() const { return n_; }
  const mpz_class& n2() const { return n2_; }
  int key_bits() const { return key_bits_; }
  // SHA-256 of the big-endian modulus.
  const KeyId& id() const { return id_; }
  // Byte width of a fixed-width ciphertext residue (2 * key_bits / 8).
  size_t ciphertext_width() const { return static_cast<size_t>(2 * key_bits_ + 7) / 8; }

  bool operator==(const PublicKey& other) const { return n_ == other.n_; }

 private:
  mpz_class n_;
  mpz_class n2_;
  int key_bits_ = 0;
  KeyId id_{};
};

struct Ciphertext {
  mpz_class value;
  KeyId key_id{};

  bool operator==(const Ciphertext& o) const { return value == o.value && key_id == o.key_id; }
};

class PrivateKey {
 public:
  // Validates P != Q, equal bit lengths and primality.
  PrivateKey(mpz_class p, mpz_class q);

  const PublicKey& public_key() const { return pk_; }
  const mpz_class& p() const { return p_; }
  const mpz_class& q() const { return q_; }
  const mpz_class& lambda() const { return lambda_; }
  const mpz_class& mu() const { return mu_; }

  // CRT decryption.
  mpz_class decrypt(const Ciphertext& c) const;
  // L(c^lambda mod N^2) * mu mod N, no CRT.
  mpz_class decrypt_direct(const Ciphertext& c) const;
  // r^N mod N^2 via exponentiation modulo P^2 and Q^2.
  mpz_class randomizer(const mpz_class& r) const;

 private:
  void check_key(const Ciphertext& c) const;

  PublicKey pk_;
  mpz_class p_, q_, lambda_, mu_;
  // CRT constants.
  mpz_class p2_, q2_, p_minus_1_, q_minus_1_, hp_, hq_, q_inv_p_, q2_inv_p2_;
};

struct KeygenOptions {
  // Permits key sizes outside {1024, 2048, 3072, 4096}; only meant for tests.
  bool allow_test_sizes = false;
  int max_attempts = 1'000'000;
};

PrivateKey keygen(int key_bits, Rng& rng, const KeygenOptions& opts = {});

// Queue of precomputed r^N mod N^2 values; each one is handed out at most once.
class RandomnessPool {
 public:
  explicit RandomnessPool(PublicKey pk, bool allow_fallback = true)
      : pk_(std::move(pk)), allow_fallback_(allow_fallback) {}

  // `owner` enables the faster CRT exponentiation for the key holder.
  void fill(size_t count, Rng& rng, const PrivateKey* owner = nullptr);
  // Benchmark-only: values are products of pairs drawn from `base` fresh values, so
  // they are valid randomizers but not independent. Never use for real data.
  void fill_derived(size_t count, size_t base, Rng& rng, const PrivateKey* owner = nullptr);

  std::optional<mpz_class> take();
  size_t size() const;
  bool allow_fallback() const { return allow_fallback_; }
  const PublicKey& public_key() const { return pk_; }

 private:
  PublicKey pk_;
  bool allow_fallback_;
  mutable std::mutex mu_;
  std::deque<mpz_class> values_;
};

// Uniform r in Z*_N.
mpz_class random_unit(const PublicKey& pk, Rng& rng);

Ciphertext encrypt(const PublicKey& pk, const mpz_class& m, Rng& rng, RandomnessPool* pool = nullptr);
// (1 + mN) * rn mod N^2 for a given randomizer rn = r^N.
Ciphertext encrypt_with_randomizer(const PublicKey& pk, const mpz_class& m, const mpz_class& rn);
// g^m r^N mod N^2 with g = 1 + N, computed by plain exponentiation.
Ciphertext encrypt_textbook(const PublicKey& pk, const mpz_class& m, const mpz_class& r);

inline mpz_class decrypt(const PrivateKey& sk, const Ciphertext& c) { return sk.decrypt(c); }

Ciphertext hom_add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b);
// Encrypts (a - b) mod N as a * b^(N-1).
Ciphertext hom_sub(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b);
// Encrypts (m * s) mod N; s must lie in (0, N).
Ciphertext hom_scale(const PublicKey& pk, const Ciphertext& c, const mpz_class& s);
Ciphertext rerandomize(const PublicKey& pk, const Ciphertext& c, Rng& rng, RandomnessPool* pool = nullptr);

// 4-byte length, minimal big-endian residue, 32-byte key id.
void write_ciphertext(ByteWriter& w, const Ciphertext& c);
Ciphertext read_ciphertext(ByteReader& r);
// Same layout, residue left-padded to the key's fixed width.
void write_ciphertext_fixed(ByteWriter& w, const Ciphertext& c, size_t width);
Bytes serialize(const Ciphertext& c);
Ciphertext deserialize_ciphertext(std::span<const uint8_t> data);

}  // namespace oope::hom
