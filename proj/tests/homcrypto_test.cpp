#include <set>

#include <gtest/gtest.h>

#include "homcrypto/paillier.hpp"

namespace oope::hom {
namespace {

const PrivateKey& key64() {
  static Rng rng = Rng::from_seed(64, "homcrypto-test");
  static const PrivateKey sk = keygen(64, rng, {.allow_test_sizes = true});
  return sk;
}

const PrivateKey& key512() {
  static Rng rng = Rng::from_seed(512, "homcrypto-test");
  static const PrivateKey sk = keygen(512, rng, {.allow_test_sizes = true});
  return sk;
}

TEST(Keygen, ModulusHasRequestedLength) {
  const auto& sk = key512();
  EXPECT_EQ(sk.public_key().key_bits(), 512);
  EXPECT_EQ(mpz_sizeinbase(sk.p().get_mpz_t(), 2), mpz_sizeinbase(sk.q().get_mpz_t(), 2));
  EXPECT_NE(sk.p(), sk.q());
  EXPECT_TRUE(mpz_odd_p(sk.public_key().n().get_mpz_t()));
}

TEST(Keygen, Standard2048) {
  Rng rng = Rng::from_seed(2048, "homcrypto-test");
  PrivateKey sk = keygen(2048, rng);
  EXPECT_EQ(sk.public_key().key_bits(), 2048);
  Rng enc = Rng::from_seed(1, "enc");
  EXPECT_EQ(sk.decrypt(encrypt(sk.public_key(), 12345, enc)), 12345);
}

TEST(Keygen, RejectsNonStandardSizeOutsideTests) {
  Rng rng = Rng::from_seed(1, "k");
  try {
    keygen(64, rng);
    FAIL() << "expected config error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config);
  }
}

TEST(Keygen, AttemptBudgetIsRetryable) {
  Rng rng = Rng::from_seed(1, "k");
  try {
    keygen(512, rng, {.allow_test_sizes = true, .max_attempts = 1});
    FAIL() << "expected retryable error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::retryable);
  }
}

TEST(Keygen, MuMatchesDefinition) {
  const auto& sk = key512();
  const auto& n = sk.public_key().n();
  mpz_class u;
  mpz_class g = n + 1;
  mpz_powm(u.get_mpz_t(), g.get_mpz_t(), sk.lambda().get_mpz_t(), sk.public_key().n2().get_mpz_t());
  mpz_class l = (u - 1) / n;
  EXPECT_EQ(l * sk.mu() % n, 1);
}

TEST(Encrypt, ZeroRoundTrip) {
  Rng rng = Rng::from_seed(7, "enc");
  const auto& sk = key64();
  EXPECT_EQ(sk.decrypt(encrypt(sk.public_key(), 0, rng)), 0);
}

TEST(Encrypt, RandomRoundTrip64) {
  Rng rng = Rng::from_seed(8, "enc");
  const auto& sk = key64();
  for (int i = 0; i < 1000; ++i) {
    mpz_class m = rng.below(sk.public_key().n());
    ASSERT_EQ(sk.decrypt(encrypt(sk.public_key(), m, rng)), m);
  }
}

TEST(Encrypt, ProbabilisticEncryption) {
  Rng rng = Rng::from_seed(9, "enc");
  const auto& sk = key512();
  auto c1 = encrypt(sk.public_key(), 42, rng);
  auto c2 = encrypt(sk.public_key(), 42, rng);
  EXPECT_NE(c1.value, c2.value);
  EXPECT_EQ(sk.decrypt(c1), 42);
  EXPECT_EQ(sk.decrypt(c2), 42);
}

TEST(Encrypt, PlaintextDomainBoundaries) {
  Rng rng = Rng::from_seed(10, "enc");
  const auto& sk = key512();
  const auto& pk = sk.public_key();
  EXPECT_EQ(sk.decrypt(encrypt(pk, pk.n() - 1, rng)), pk.n() - 1);
  EXPECT_THROW(encrypt(pk, pk.n(), rng), Error);
  EXPECT_THROW(encrypt(pk, -1, rng), Error);
}

TEST(Encrypt, FastGeneratorMatchesTextbook) {
  Rng rng = Rng::from_seed(11, "enc");
  const auto& sk = key512();
  const auto& pk = sk.public_key();
  for (int i = 0; i < 50; ++i) {
    mpz_class m = rng.below(pk.n());
    mpz_class r = random_unit(pk, rng);
    mpz_class rn;
    mpz_powm(rn.get_mpz_t(), r.get_mpz_t(), pk.n().get_mpz_t(), pk.n2().get_mpz_t());
    EXPECT_EQ(encrypt_with_randomizer(pk, m, rn), encrypt_textbook(pk, m, r));
    EXPECT_EQ(sk.randomizer(r), rn);
  }
}

TEST(Decrypt, CrtMatchesDirect) {
  Rng rng = Rng::from_seed(12, "enc");
  const auto& sk = key512();
  for (int i = 0; i < 100; ++i) {
    mpz_class m = rng.below(sk.public_key().n());
    auto c = encrypt(sk.public_key(), m, rng);
    ASSERT_EQ(sk.decrypt(c), sk.decrypt_direct(c));
    ASSERT_EQ(sk.decrypt(c), m);
  }
}

TEST(Decrypt, ForeignKeyIsUsageError) {
  Rng rng = Rng::from_seed(13, "enc");
  auto c = encrypt(key64().public_key(), 5, rng);
  try {
    key512().decrypt(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::usage);
  }
}

TEST(Homomorphic, Addition) {
  Rng rng = Rng::from_seed(14, "enc");
  const auto& sk = key512();
  const auto& pk = sk.public_key();
  EXPECT_EQ(sk.decrypt(hom_add(pk, encrypt(pk, 20, rng), encrypt(pk, 5, rng))), 25);
  mpz_class m = rng.below(pk.n());
  EXPECT_EQ(sk.decrypt(hom_add(pk, encrypt(pk, 0, rng), encrypt(pk, m, rng))), m);
  // Wraps modulo N.
  EXPECT_EQ(sk.decrypt(hom_add(pk, encrypt(pk, pk.n() - 1, rng), encrypt(pk, 3, rng))), 2);
}

TEST(Homomorphic, AdditionAssociative) {
  Rng rng = Rng::from_seed(15, "enc");
  const auto& sk = key512();
  const auto& pk = sk.public_key();
  for (int i = 0; i < 20; ++i) {
    mpz_class a = rng.below(pk.n()), b = rng.below(pk.n()), c = rng.below(pk.n());
    auto ca = encrypt(pk, a, rng), cb = encrypt(pk, b, rng), cc = encrypt(pk, c, rng);
    mpz_class left = sk.decrypt(hom_add(pk, hom_add(pk, ca, cb), cc));
    mpz_class right = sk.decrypt(hom_add(pk, ca, hom_add(pk, cb, cc)));
    EXPECT_EQ(left, right);
    EXPECT_EQ(left, mpz_class((a + b + c) % pk.n()));
  }
}

TEST(Homomorphic, Scale) {
  Rng rng = Rng::from_seed(16, "enc");
  const auto& sk = key512();
  const auto& pk = sk.public_key();
  EXPECT_EQ(sk.decrypt(hom_scale(pk, encrypt(pk, 3, rng), 7)), 21);
  mpz_class m = rng.below(pk.n());
  EXPECT_EQ(sk.decrypt(hom_scale(pk, encrypt(pk, m, rng), 1)), m);
  EXPECT_THROW(hom_scale(pk, encrypt(pk, 3, rng), 0), Error);
}

TEST(Homomorphic, BlindedDifferenceIsZeroIffEqual) {
  Rng rng = Rng::from_seed(17, "enc");
  const auto& sk = key512();
  const auto& pk = sk.public_key();
  for (int xi = 0; xi < 16; ++xi) {
    for (int xbar = 0; xbar < 16; ++xbar) {
      mpz_class s = 1 + rng.below(mpz_class(pk.n() - 1));
      auto d = hom_scale(pk, hom_sub(pk, encrypt(pk, xi, rng), encrypt(pk, xbar, rng)), s);
      EXPECT_EQ(sk.decrypt(d) == 0, xi == xbar) << xi << " " << xbar;
    }
  }
}

TEST(Homomorphic, CrossKeyOperationsRejected) {
  Rng rng = Rng::from_seed(18, "enc");
  auto a = encrypt(key64().public_key(), 1, rng);
  auto b = encrypt(key512().public_key(), 1, rng);
  EXPECT_THROW(hom_add(key512().public_key(), a, b), Error);
}

TEST(Pool, ValuesConsumedOnceThenFallback) {
  Rng rng = Rng::from_seed(19, "pool");
  const auto& sk = key512();
  RandomnessPool pool(sk.public_key());
  pool.fill(3, rng, &sk);
  EXPECT_EQ(pool.size(), 3u);
  std::set<std::string> seen;
  for (int i = 0; i < 5; ++i) {
    auto c = encrypt(sk.public_key(), i, rng, &pool);
    EXPECT_EQ(sk.decrypt(c), i);
    seen.insert(c.value.get_str(16));
  }
  EXPECT_EQ(pool.size(), 0u);
  EXPECT_EQ(seen.size(), 5u);
}

TEST(Pool, ExhaustedWithoutFallbackIsConfigError) {
  Rng rng = Rng::from_seed(20, "pool");
  const auto& sk = key512();
  RandomnessPool pool(sk.public_key(), /*allow_fallback=*/false);
  pool.fill(1, rng);
  encrypt(sk.public_key(), 1, rng, &pool);
  try {
    encrypt(sk.public_key(), 1, rng, &pool);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config);
  }
}

TEST(Serialization, LengthPrefixedBigEndianWithKeyId) {
  const auto& pk = key64().public_key();
  Ciphertext c{mpz_class(0x0102), pk.id()};
  Bytes b = serialize(c);
  ASSERT_EQ(b.size(), 4u + 2u + 32u);
  EXPECT_EQ(b[0], 0);
  EXPECT_EQ(b[3], 2);
  EXPECT_EQ(b[4], 0x01);
  EXPECT_EQ(b[5], 0x02);
  EXPECT_TRUE(std::equal(pk.id().begin(), pk.id().end(), b.begin() + 6));
  EXPECT_EQ(deserialize_ciphertext(b), c);
}

TEST(Serialization, RoundTripProperty) {
  Rng rng = Rng::from_seed(21, "ser");
  const auto& pk = key512().public_key();
  for (int i = 0; i < 50; ++i) {
    auto c = encrypt(pk, rng.below(pk.n()), rng);
    EXPECT_EQ(deserialize_ciphertext(serialize(c)), c);
  }
  Bytes truncated = serialize(encrypt(pk, 1, rng));
  truncated.pop_back();
  EXPECT_THROW(deserialize_ciphertext(truncated), Error);
}

TEST(KeyId, IsHashOfModulus) {
  const auto& pk = key512().public_key();
  EXPECT_EQ(pk.id(), sha256(mpz_to_bytes(pk.n())));
  EXPECT_NE(pk.id(), key64().public_key().id());
}

}  // namespace
}  // namespace oope::hom
