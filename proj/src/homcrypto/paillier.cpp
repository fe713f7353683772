#include "homcrypto/paillier.hpp"

#include <string>

namespace oope::hom {

namespace {

// 40 Miller-Rabin rounds bound the error by 4^-40 = 2^-80.
constexpr int kPrimalityReps = 40;

size_t bit_length(const mpz_class& v) { return mpz_sizeinbase(v.get_mpz_t(), 2); }

mpz_class powm(const mpz_class& b, const mpz_class& e, const mpz_class& m) {
  mpz_class out;
  mpz_powm(out.get_mpz_t(), b.get_mpz_t(), e.get_mpz_t(), m.get_mpz_t());
  return out;
}

mpz_class invert(const mpz_class& a, const mpz_class& m) {
  mpz_class out;
  if (mpz_invert(out.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t()) == 0) {
    fail(Errc::domain, "value is not invertible");
  }
  return out;
}

void check_same_key(const PublicKey& pk, const Ciphertext& c) {
  if (c.key_id != pk.id()) fail(Errc::usage, "ciphertext was produced under a different public key");
}

mpz_class random_prime(unsigned bits, Rng& rng, int& attempts, int max_attempts) {
  for (;;) {
    if (++attempts > max_attempts) fail(Errc::retryable, "prime generation exhausted its attempt budget");
    mpz_class c = rng.bits(bits);
    // Top two bits set so the product has exactly 2 * bits bits.
    mpz_setbit(c.get_mpz_t(), bits - 1);
    mpz_setbit(c.get_mpz_t(), bits - 2);
    mpz_setbit(c.get_mpz_t(), 0);
    if (mpz_probab_prime_p(c.get_mpz_t(), kPrimalityReps) > 0) return c;
  }
}

}  // namespace

PublicKey::PublicKey(mpz_class n) : n_(std::move(n)) {
  if (n_ < 15 || mpz_even_p(n_.get_mpz_t())) fail(Errc::domain, "Paillier modulus must be odd and composite");
  n2_ = n_ * n_;
  key_bits_ = static_cast<int>(bit_length(n_));
  id_ = sha256(mpz_to_bytes(n_));
}

PrivateKey::PrivateKey(mpz_class p, mpz_class q) : p_(std::move(p)), q_(std::move(q)) {
  if (p_ == q_) fail(Errc::domain, "Paillier primes must differ");
  if (bit_length(p_) != bit_length(q_)) fail(Errc::domain, "Paillier primes must have equal length");
  if (mpz_probab_prime_p(p_.get_mpz_t(), kPrimalityReps) == 0 ||
      mpz_probab_prime_p(q_.get_mpz_t(), kPrimalityReps) == 0) {
    fail(Errc::domain, "Paillier key factor is not prime");
  }
  pk_ = PublicKey(p_ * q_);
  const mpz_class& n = pk_.n();
  p_minus_1_ = p_ - 1;
  q_minus_1_ = q_ - 1;
  mpz_lcm(lambda_.get_mpz_t(), p_minus_1_.get_mpz_t(), q_minus_1_.get_mpz_t());

  // With g = 1 + N, g^lambda = 1 + lambda*N mod N^2, so L(g^lambda) = lambda mod N.
  mpz_class g_lambda = powm(n + 1, lambda_, pk_.n2());
  mu_ = invert(mpz_class((g_lambda - 1) / n), n);

  p2_ = p_ * p_;
  q2_ = q_ * q_;
  hp_ = invert(mpz_class((powm(n + 1, p_minus_1_, p2_) - 1) / p_), p_);
  hq_ = invert(mpz_class((powm(n + 1, q_minus_1_, q2_) - 1) / q_), q_);
  q_inv_p_ = invert(q_, p_);
  q2_inv_p2_ = invert(q2_, p2_);
}

void PrivateKey::check_key(const Ciphertext& c) const {
  if (c.key_id != pk_.id()) fail(Errc::usage, "ciphertext does not belong to this private key");
}

mpz_class PrivateKey::decrypt(const Ciphertext& c) const {
  check_key(c);
  mpz_class mp = (powm(c.value % p2_, p_minus_1_, p2_) - 1) / p_;
  mp = mp * hp_ % p_;
  mpz_class mq = (powm(c.value % q2_, q_minus_1_, q2_) - 1) / q_;
  mq = mq * hq_ % q_;
  // Garner recombination: m = mq + q * ((mp - mq) * q^-1 mod p).
  mpz_class t = (mp - mq) * q_inv_p_ % p_;
  if (t < 0) t += p_;
  return mq + q_ * t;
}

mpz_class PrivateKey::decrypt_direct(const Ciphertext& c) const {
  check_key(c);
  mpz_class u = powm(c.value, lambda_, pk_.n2());
  mpz_class l = (u - 1) / pk_.n();
  return l * mu_ % pk_.n();
}

mpz_class PrivateKey::randomizer(const mpz_class& r) const {
  const mpz_class& n = pk_.n();
  // Exponents reduced modulo the group orders p(p-1) and q(q-1).
  mpz_class ep = n % (p_ * p_minus_1_);
  mpz_class eq = n % (q_ * q_minus_1_);
  mpz_class a = powm(r % p2_, ep, p2_);
  mpz_class b = powm(r % q2_, eq, q2_);
  mpz_class t = (a - b) * q2_inv_p2_ % p2_;
  if (t < 0) t += p2_;
  return b + q2_ * t;
}

PrivateKey keygen(int key_bits, Rng& rng, const KeygenOptions& opts) {
  const bool standard = key_bits == 1024 || key_bits == 2048 || key_bits == 3072 || key_bits == 4096;
  if (!standard && !opts.allow_test_sizes) {
    fail(Errc::config, "key_bits must be one of 1024, 2048, 3072, 4096 (got " + std::to_string(key_bits) + ")");
  }
  if (key_bits < 32 || key_bits % 2 != 0) fail(Errc::config, "key_bits must be even and at least 32");
  const unsigned half = static_cast<unsigned>(key_bits / 2);
  int attempts = 0;
  for (;;) {
    mpz_class p = random_prime(half, rng, attempts, opts.max_attempts);
    mpz_class q = random_prime(half, rng, attempts, opts.max_attempts);
    if (p == q) continue;
    mpz_class n = p * q;
    if (bit_length(n) != static_cast<size_t>(key_bits)) continue;
    mpz_class g;
    mpz_class phi = (p - 1) * (q - 1);
    mpz_gcd(g.get_mpz_t(), n.get_mpz_t(), phi.get_mpz_t());
    if (g != 1) continue;
    return PrivateKey(std::move(p), std::move(q));
  }
}

mpz_class random_unit(const PublicKey& pk, Rng& rng) {
  for (;;) {
    mpz_class r = rng.below(pk.n());
    if (r == 0) continue;
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), r.get_mpz_t(), pk.n().get_mpz_t());
    if (g == 1) return r;
  }
}

void RandomnessPool::fill(size_t count, Rng& rng, const PrivateKey* owner) {
  if (owner && !(owner->public_key() == pk_)) fail(Errc::usage, "pool owner key mismatch");
  std::deque<mpz_class> fresh;
  for (size_t i = 0; i < count; ++i) {
    mpz_class r = random_unit(pk_, rng);
    fresh.push_back(owner ? owner->randomizer(r) : powm(r, pk_.n(), pk_.n2()));
  }
  std::lock_guard lock(mu_);
  for (auto& v : fresh) values_.push_back(std::move(v));
}

void RandomnessPool::fill_derived(size_t count, size_t base, Rng& rng, const PrivateKey* owner) {
  if (base < 2) fail(Errc::usage, "derived pool needs at least two base values");
  RandomnessPool seeds(pk_);
  seeds.fill(base, rng, owner);
  std::vector<mpz_class> b;
  while (auto v = seeds.take()) b.push_back(std::move(*v));
  std::deque<mpz_class> fresh;
  for (size_t i = 0; i < count; ++i) {
    size_t a = rng.below(base), c = rng.below(base);
    fresh.push_back(b[a] * b[c] % pk_.n2());
  }
  std::lock_guard lock(mu_);
  for (auto& v : fresh) values_.push_back(std::move(v));
}

std::optional<mpz_class> RandomnessPool::take() {
  std::lock_guard lock(mu_);
  if (values_.empty()) return std::nullopt;
  mpz_class v = std::move(values_.front());
  values_.pop_front();
  return v;
}

size_t RandomnessPool::size() const {
  std::lock_guard lock(mu_);
  return values_.size();
}

namespace {

mpz_class next_randomizer(const PublicKey& pk, Rng& rng, RandomnessPool* pool) {
  if (pool) {
    if (!(pool->public_key() == pk)) fail(Errc::usage, "randomness pool belongs to another key");
    if (auto v = pool->take()) return std::move(*v);
    if (!pool->allow_fallback()) fail(Errc::config, "randomness pool exhausted and fallback disabled");
  }
  return powm(random_unit(pk, rng), pk.n(), pk.n2());
}

}  // namespace

Ciphertext encrypt_with_randomizer(const PublicKey& pk, const mpz_class& m, const mpz_class& rn) {
  if (m < 0 || m >= pk.n()) fail(Errc::domain, "plaintext outside [0, N)");
  // (1 + N)^m = 1 + mN mod N^2.
  mpz_class gm = (1 + m * pk.n()) % pk.n2();
  return Ciphertext{gm * rn % pk.n2(), pk.id()};
}

Ciphertext encrypt(const PublicKey& pk, const mpz_class& m, Rng& rng, RandomnessPool* pool) {
  if (m < 0 || m >= pk.n()) fail(Errc::domain, "plaintext outside [0, N)");
  return encrypt_with_randomizer(pk, m, next_randomizer(pk, rng, pool));
}

Ciphertext encrypt_textbook(const PublicKey& pk, const mpz_class& m, const mpz_class& r) {
  if (m < 0 || m >= pk.n()) fail(Errc::domain, "plaintext outside [0, N)");
  mpz_class g = pk.n() + 1;
  return Ciphertext{powm(g, m, pk.n2()) * powm(r, pk.n(), pk.n2()) % pk.n2(), pk.id()};
}

Ciphertext hom_add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
  check_same_key(pk, a);
  check_same_key(pk, b);
  return Ciphertext{a.value * b.value % pk.n2(), pk.id()};
}

Ciphertext hom_sub(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
  check_same_key(pk, a);
  check_same_key(pk, b);
  mpz_class neg = powm(b.value, pk.n() - 1, pk.n2());
  return Ciphertext{a.value * neg % pk.n2(), pk.id()};
}

Ciphertext hom_scale(const PublicKey& pk, const Ciphertext& c, const mpz_class& s) {
  check_same_key(pk, c);
  if (s <= 0 || s >= pk.n()) fail(Errc::domain, "scalar outside (0, N)");
  return Ciphertext{powm(c.value, s, pk.n2()), pk.id()};
}

Ciphertext rerandomize(const PublicKey& pk, const Ciphertext& c, Rng& rng, RandomnessPool* pool) {
  check_same_key(pk, c);
  return Ciphertext{c.value * next_randomizer(pk, rng, pool) % pk.n2(), pk.id()};
}

void write_ciphertext(ByteWriter& w, const Ciphertext& c) {
  w.blob(mpz_to_bytes(c.value));
  w.raw(c.key_id);
}

void write_ciphertext_fixed(ByteWriter& w, const Ciphertext& c, size_t width) {
  w.blob(mpz_to_fixed(c.value, width));
  w.raw(c.key_id);
}

Ciphertext read_ciphertext(ByteReader& r) {
  Ciphertext c;
  c.value = r.mpz();
  c.key_id = r.array<32>();
  return c;
}

Bytes serialize(const Ciphertext& c) {
  ByteWriter w;
  write_ciphertext(w, c);
  return w.take();
}

Ciphertext deserialize_ciphertext(std::span<const uint8_t> data) {
  ByteReader r(data);
  Ciphertext c = read_ciphertext(r);
  r.expect_done("ciphertext");
  return c;
}

}  // namespace oope::hom
