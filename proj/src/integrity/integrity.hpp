#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include <gmpxx.h>

#include "homcrypto/paillier.hpp"

// Node authentication against a CSP that substitutes its own ciphertexts. Both
// schemes work in the order-q subgroup of Z*_p; the parameters are shared by DO and
// DA only.
namespace oope::integ {

enum class Scheme : uint8_t { off = 0, dlmac = 1, pedersen = 2 };

std::string_view scheme_name(Scheme s);
Scheme parse_scheme(std::string_view text);

struct MacParams {
  mpz_class p;
  mpz_class q;
  mpz_class g;
  mpz_class h;  // Pedersen second generator, derived by hashing

  // False for default-constructed parameters, i.e. a role that never received them.
  bool present() const { return p != 0; }
  Bytes serialize() const;
  static MacParams parse(std::span<const uint8_t> data);
};

// p is a p_bits prime with q | p - 1 and q a q_bits prime. Production sizes are
// 2048/256; smaller sizes are accepted for tests.
MacParams generate_params(unsigned p_bits, unsigned q_bits, Rng& rng);
// Checks primality of p and q, q | p - 1 and that g, h have order q.
bool validate_params(const MacParams& params);

// g^x mod p.
mpz_class dl_mac_make(const mpz_class& x, const MacParams& params);
// mac * g^r == m (mod p).
bool dl_mac_verify(const mpz_class& mac, const mpz_class& r, const mpz_class& m, const MacParams& params);

// g^x h^a mod p.
mpz_class ped_commit_make(const mpz_class& x, const mpz_class& a, const MacParams& params);
// commit * g^r * h^r2 == m (mod p).
bool ped_verify(const mpz_class& commit, const mpz_class& r, const mpz_class& r2, const mpz_class& m,
                const MacParams& params);

// What the DO computes from the decrypted blinded values.
mpz_class dl_response(const mpz_class& v, const MacParams& params);
mpz_class ped_response(const mpz_class& v, const mpz_class& va, const MacParams& params);

struct NodeTag {
  std::optional<mpz_class> dl_mac;
  std::optional<mpz_class> ped_commit;
  std::optional<hom::Ciphertext> ped_a;  // [[a]] under the DO key

  bool operator==(const NodeTag&) const = default;
};

// Tag for plaintext x under the chosen scheme; off yields an empty tag.
NodeTag make_tag(Scheme scheme, const mpz_class& x, const MacParams& params, const hom::PublicKey& pk, Rng& rng,
                 hom::RandomnessPool* pool = nullptr);

}  // namespace oope::integ
